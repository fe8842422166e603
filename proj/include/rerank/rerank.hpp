#pragma once

#include "rerank/baselines.hpp"
#include "rerank/bench.hpp"
#include "rerank/errors.hpp"
#include "rerank/eval.hpp"
#include "rerank/feature_set.hpp"
#include "rerank/gnn.hpp"
#include "rerank/parallel.hpp"
#include "rerank/ranking.hpp"
#include "rerank/rng.hpp"
#include "rerank/similarity.hpp"
#include "rerank/sparse.hpp"
