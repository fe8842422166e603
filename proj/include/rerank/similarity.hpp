#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "rerank/errors.hpp"
#include "rerank/feature_set.hpp"
#include "rerank/parallel.hpp"

namespace rerank {

// Fixed-order 8-accumulator dot product. The accumulator layout is part of
// the numeric contract: every similarity in the project goes through this
// kernel so rankings are reproducible for any thread count.
inline float dot_f32(const float* a, const float* b, std::size_t d) {
    float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= d; i += 8)
        for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
    for (; i < d; ++i) acc[i % 8] += a[i] * b[i];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

inline FeatureSet l2_normalize(const FeatureSet& fs) {
    FeatureSet out = fs;
    for (std::size_t i = 0; i < fs.n; ++i) {
        const float* r = fs.row(i);
        double norm2 = 0.0;
        for (std::size_t j = 0; j < fs.d; ++j) norm2 += static_cast<double>(r[j]) * r[j];
        const double norm = std::sqrt(norm2);
        if (norm < 1e-12)
            throw ZeroVector("l2_normalize: row " + std::to_string(i) + " has norm < 1e-12");
        float* o = out.row(i);
        for (std::size_t j = 0; j < fs.d; ++j)
            o[j] = static_cast<float>(static_cast<double>(r[j]) / norm);
    }
    return out;
}

// Dense n x n cosine similarity on the union set. Symmetric by construction
// (upper triangle computed once and mirrored).
struct SimilarityMatrix {
    std::size_t n = 0;
    std::vector<float> values; // n * n

    float at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
    const float* row(std::size_t i) const { return values.data() + i * n; }
};

inline SimilarityMatrix cosine_similarity_matrix(const FeatureSet& fs, int threads = 1) {
    const FeatureSet norm = l2_normalize(fs);
    SimilarityMatrix sim;
    sim.n = fs.n;
    sim.values.assign(fs.n * fs.n, 0.0f);
    parallel_for(0, fs.n, threads, [&](std::size_t i) {
        for (std::size_t j = i; j < fs.n; ++j) {
            const float v = dot_f32(norm.row(i), norm.row(j), fs.d);
            sim.values[i * fs.n + j] = v;
            sim.values[j * fs.n + i] = v;
        }
    });
    return sim;
}

// Ordered neighbor lists: descending similarity, ties by ascending index.
struct NeighborLists {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::int32_t> indices; // n * k, row-major, rank order
    std::vector<float> sims;           // n * k, matching similarities

    const std::int32_t* row(std::size_t i) const { return indices.data() + i * k; }
    const float* sim_row(std::size_t i) const { return sims.data() + i * k; }
};

namespace detail {

// top-k of one similarity row under the (sim desc, index asc) tie rule
inline void topk_row(const float* simrow, std::size_t n, std::size_t k,
                     std::int32_t* out_idx, float* out_sim,
                     std::vector<std::int32_t>& scratch) {
    scratch.resize(n);
    std::iota(scratch.begin(), scratch.end(), 0);
    auto cmp = [simrow](std::int32_t a, std::int32_t b) {
        if (simrow[a] != simrow[b]) return simrow[a] > simrow[b];
        return a < b;
    };
    std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k),
                      scratch.end(), cmp);
    for (std::size_t r = 0; r < k; ++r) {
        out_idx[r] = scratch[r];
        out_sim[r] = simrow[scratch[r]];
    }
}

} // namespace detail

inline NeighborLists top_k(const SimilarityMatrix& sim, std::size_t k, int threads = 1) {
    if (k < 1 || k > sim.n)
        throw KOutOfRange("top_k: k=" + std::to_string(k) + " not in [1, n]");
    NeighborLists nl;
    nl.n = sim.n;
    nl.k = k;
    nl.indices.resize(sim.n * k);
    nl.sims.resize(sim.n * k);
    parallel_for(0, sim.n, threads, [&](std::size_t i) {
        thread_local std::vector<std::int32_t> scratch;
        detail::topk_row(sim.row(i), sim.n, k, nl.indices.data() + i * k,
                         nl.sims.data() + i * k, scratch);
    });
    return nl;
}

// Blocked variant: computes similarity rows on the fly and keeps only the
// top-k, so peak memory stays O(block * n) instead of O(n^2). Produces
// exactly the same lists as top_k(cosine_similarity_matrix(fs), k).
inline NeighborLists top_k_blocked(const FeatureSet& fs, std::size_t k, int threads = 1,
                                   std::size_t block = 256) {
    if (k < 1 || k > fs.n)
        throw KOutOfRange("top_k_blocked: k not in [1, n]");
    const FeatureSet norm = l2_normalize(fs);
    NeighborLists nl;
    nl.n = fs.n;
    nl.k = k;
    nl.indices.resize(fs.n * k);
    nl.sims.resize(fs.n * k);
    for (std::size_t lo = 0; lo < fs.n; lo += block) {
        const std::size_t hi = std::min(fs.n, lo + block);
        parallel_for(lo, hi, threads, [&](std::size_t i) {
            thread_local std::vector<float> simrow;
            thread_local std::vector<std::int32_t> scratch;
            simrow.resize(fs.n);
            for (std::size_t j = 0; j < fs.n; ++j)
                simrow[j] = dot_f32(norm.row(i), norm.row(j), fs.d);
            detail::topk_row(simrow.data(), fs.n, k, nl.indices.data() + i * k,
                             nl.sims.data() + i * k, scratch);
        });
    }
    return nl;
}

} // namespace rerank
