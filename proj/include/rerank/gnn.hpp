#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "rerank/errors.hpp"
#include "rerank/feature_set.hpp"
#include "rerank/parallel.hpp"
#include "rerank/ranking.hpp"
#include "rerank/similarity.hpp"
#include "rerank/sparse.hpp"

namespace rerank {

enum class Aggregator { sum, mean, max };

struct GnnConfig {
    std::size_t k1 = 26;
    std::size_t k2 = 7;
    double alpha = 2.0;
    std::size_t layers = 2;
    Aggregator aggregator = Aggregator::sum;
};

// floor(n / c) clamped to [1, n-1]
inline std::size_t suggest_k1(std::size_t n, std::size_t c) {
    if (c < 1 || n < c) throw KOutOfRange("suggest_k1: need c >= 1 and n >= c");
    std::size_t k1 = n / c;
    if (k1 < 1) k1 = 1;
    if (k1 > n - 1) k1 = n - 1;
    return k1;
}

namespace detail {

inline SparseGraph adjacency_from_neighbors(const NeighborLists& nl, std::size_t k,
                                            bool with_weights) {
    SparseGraph g;
    g.n = nl.n;
    g.row_offsets.resize(nl.n + 1);
    g.col_indices.resize(nl.n * k);
    g.weights.resize(nl.n * k);
    std::vector<std::pair<std::int32_t, double>> row(k);
    for (std::size_t i = 0; i < nl.n; ++i) {
        for (std::size_t r = 0; r < k; ++r)
            row[r] = {nl.row(i)[r], with_weights ? static_cast<double>(nl.sim_row(i)[r]) : 1.0};
        std::sort(row.begin(), row.end());
        g.row_offsets[i] = i * k;
        for (std::size_t r = 0; r < k; ++r) {
            g.col_indices[i * k + r] = row[r].first;
            g.weights[i * k + r] = row[r].second;
        }
    }
    g.row_offsets[nl.n] = nl.n * k;
    return g;
}

} // namespace detail

// A: 0/1 adjacency of the k1-NN relation (Eq-style hard neighborhood).
// Exactly k1 stored entries per row; self edge included via the unit diagonal.
inline SparseGraph build_adjacency(const SimilarityMatrix& sim, std::size_t k1,
                                   int threads = 1) {
    if (k1 < 1 || k1 >= sim.n) throw KOutOfRange("build_adjacency: k1 not in [1, n)");
    return detail::adjacency_from_neighbors(top_k(sim, k1, threads), k1, false);
}

// A* = (A + A^T) / 2: weight 1.0 on mutual edges, 0.5 on one-directional ones.
inline SparseGraph symmetrize(const SparseGraph& a) {
    SparseGraph s;
    s.n = a.n;
    s.symmetric = true;
    // column-count pass over A^T
    std::vector<std::vector<std::int32_t>> incoming(a.n);
    for (std::size_t i = 0; i < a.n; ++i)
        for (std::size_t e = a.row_begin(i); e < a.row_end(i); ++e)
            incoming[a.col_indices[e]].push_back(static_cast<std::int32_t>(i));

    s.row_offsets.resize(a.n + 1, 0);
    std::vector<std::int32_t> cols;
    std::vector<double> ws;
    for (std::size_t i = 0; i < a.n; ++i) {
        s.row_offsets[i] = cols.size();
        // merge sorted out-row of A with sorted in-row of A^T
        const std::int32_t* out = a.col_indices.data() + a.row_begin(i);
        const std::size_t nout = a.row_end(i) - a.row_begin(i);
        const auto& in = incoming[i]; // ascending by construction
        std::size_t p = 0, q = 0;
        while (p < nout || q < in.size()) {
            std::int32_t c;
            double w;
            if (q >= in.size() || (p < nout && out[p] < in[q])) {
                c = out[p++];
                w = 0.5;
            } else if (p >= nout || in[q] < out[p]) {
                c = in[q++];
                w = 0.5;
            } else {
                c = out[p];
                ++p;
                ++q;
                w = 1.0;
            }
            cols.push_back(c);
            ws.push_back(w);
        }
    }
    s.row_offsets[a.n] = cols.size();
    s.col_indices = std::move(cols);
    s.weights = std::move(ws);
    return s;
}

// Node features h_i: row i of A*, L2-normalized. Sparse rows, or a dense
// n x n buffer once propagation densifies past the threshold.
struct NodeFeatureMatrix {
    std::size_t n = 0;
    std::size_t layer = 0;
    bool is_dense = false;
    // sparse representation (canonical CSR)
    std::vector<std::size_t> row_offsets;
    std::vector<std::int32_t> cols;
    std::vector<double> vals;
    // dense representation
    std::vector<double> dense;

    std::size_t nnz() const { return is_dense ? n * n : cols.size(); }

    double at(std::size_t i, std::size_t j) const {
        if (is_dense) return dense[i * n + j];
        const auto b = row_offsets[i], e = row_offsets[i + 1];
        const auto it = std::lower_bound(cols.begin() + b, cols.begin() + e,
                                         static_cast<std::int32_t>(j));
        if (it != cols.begin() + e && *it == static_cast<std::int32_t>(j))
            return vals[static_cast<std::size_t>(it - cols.begin())];
        return 0.0;
    }

    void to_dense() {
        if (is_dense) return;
        dense.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t e = row_offsets[i]; e < row_offsets[i + 1]; ++e)
                dense[i * n + cols[e]] = vals[e];
        is_dense = true;
        row_offsets.clear();
        cols.clear();
        vals.clear();
    }
};

inline NodeFeatureMatrix node_features(const SparseGraph& a_star) {
    if (!a_star.symmetric) throw DimensionMismatch("node_features: expected symmetric A*");
    NodeFeatureMatrix h;
    h.n = a_star.n;
    h.layer = 0;
    h.row_offsets = a_star.row_offsets;
    h.cols = a_star.col_indices;
    h.vals = a_star.weights;
    for (std::size_t i = 0; i < h.n; ++i) {
        double norm2 = 0.0;
        for (std::size_t e = h.row_offsets[i]; e < h.row_offsets[i + 1]; ++e)
            norm2 += h.vals[e] * h.vals[e];
        if (norm2 < 1e-24)
            throw EmptyRow("node_features: node " + std::to_string(i) + " has no neighbors");
        const double norm = std::sqrt(norm2);
        for (std::size_t e = h.row_offsets[i]; e < h.row_offsets[i + 1]; ++e)
            h.vals[e] /= norm;
    }
    return h;
}

// k2-NN propagation graph: out-edges to N(i, k2), weights e_ij = S[i][j].
inline SparseGraph build_propagation_graph(const SimilarityMatrix& sim, std::size_t k2,
                                           int threads = 1) {
    if (k2 < 1 || k2 >= sim.n) throw KOutOfRange("build_propagation_graph: k2 not in [1, n)");
    return detail::adjacency_from_neighbors(top_k(sim, k2, threads), k2, true);
}

namespace detail {

inline bool alpha_is_integer(double alpha) {
    return alpha == std::floor(alpha);
}

// f(e) = e^alpha; negative similarities are clamped to 0 for fractional alpha
// (otherwise pow would return NaN). Integer alpha keeps the sign.
inline std::vector<double> edge_propagation_weights(const SparseGraph& g, double alpha) {
    std::vector<double> w(g.nnz());
    bool warned = false;
    const bool integral = alpha_is_integer(alpha);
    for (std::size_t e = 0; e < g.nnz(); ++e) {
        double v = g.weights[e];
        if (v < 0.0 && !integral) {
            if (!warned) {
                std::fprintf(stderr,
                             "warning: negative edge weight with fractional alpha=%g; "
                             "clamping to 0\n", alpha);
                warned = true;
            }
            v = 0.0;
        }
        w[e] = std::pow(v, alpha);
    }
    return w;
}

} // namespace detail

// One message-propagation round:
//   h_i <- normalize( h_i + aggregate({ e_ij^alpha * h_j : j in N(i,k2) }) )
// Switches to a dense row buffer once H reaches 25% density; either path
// yields the same values.
inline NodeFeatureMatrix propagate_step(const NodeFeatureMatrix& h, const SparseGraph& g,
                                        const GnnConfig& cfg, int threads = 1) {
    if (h.n != g.n) throw DimensionMismatch("propagate_step: size mismatch");
    const std::size_t n = h.n;
    const std::vector<double> w = detail::edge_propagation_weights(g, cfg.alpha);

    NodeFeatureMatrix out;
    out.n = n;
    out.layer = h.layer + 1;

    std::atomic<bool> zero_row{false};
    const bool go_dense = h.is_dense || h.nnz() * 4 >= n * n;

    if (go_dense) {
        NodeFeatureMatrix hd = h;
        hd.to_dense();
        out.is_dense = true;
        out.dense.assign(n * n, 0.0);
        parallel_for(0, n, threads, [&](std::size_t i) {
            double* dst = out.dense.data() + i * n;
            const std::size_t b = g.row_begin(i), e = g.row_end(i);
            const std::size_t deg = e - b;
            if (cfg.aggregator == Aggregator::max) {
                for (std::size_t ee = b; ee < e; ++ee) {
                    const double* src = hd.dense.data() +
                                        static_cast<std::size_t>(g.col_indices[ee]) * n;
                    const double wj = w[ee];
                    if (ee == b)
                        for (std::size_t c = 0; c < n; ++c) dst[c] = wj * src[c];
                    else
                        for (std::size_t c = 0; c < n; ++c) dst[c] = std::max(dst[c], wj * src[c]);
                }
            } else {
                for (std::size_t ee = b; ee < e; ++ee) {
                    const double* src = hd.dense.data() +
                                        static_cast<std::size_t>(g.col_indices[ee]) * n;
                    const double wj = w[ee];
                    for (std::size_t c = 0; c < n; ++c) dst[c] += wj * src[c];
                }
                if (cfg.aggregator == Aggregator::mean && deg > 0)
                    for (std::size_t c = 0; c < n; ++c) dst[c] /= static_cast<double>(deg);
            }
            const double* own = hd.dense.data() + i * n;
            for (std::size_t c = 0; c < n; ++c) dst[c] += own[c];
            double norm2 = 0.0;
            for (std::size_t c = 0; c < n; ++c) norm2 += dst[c] * dst[c];
            if (norm2 < 1e-24) {
                zero_row.store(true);
                return;
            }
            const double norm = std::sqrt(norm2);
            for (std::size_t c = 0; c < n; ++c) dst[c] /= norm;
        });
        if (zero_row.load()) throw ZeroVector("propagate: zero row after update");
        return out;
    }

    std::vector<std::vector<std::int32_t>> out_cols(n);
    std::vector<std::vector<double>> out_vals(n);
    const bool is_max = cfg.aggregator == Aggregator::max;
    parallel_for(0, n, threads, [&](std::size_t i) {
        thread_local std::vector<double> acc;
        thread_local std::vector<std::uint32_t> cnt;
        thread_local std::vector<std::int32_t> touched;
        if (acc.size() < n) {
            acc.assign(n, 0.0);
            cnt.assign(n, 0);
        }
        touched.clear();

        const std::size_t b = g.row_begin(i), e = g.row_end(i);
        const std::size_t deg = e - b;
        for (std::size_t ee = b; ee < e; ++ee) {
            const std::size_t j = static_cast<std::size_t>(g.col_indices[ee]);
            const double wj = w[ee];
            for (std::size_t f = h.row_offsets[j]; f < h.row_offsets[j + 1]; ++f) {
                const std::int32_t c = h.cols[f];
                const double val = wj * h.vals[f];
                if (cnt[c] == 0) {
                    acc[c] = val;
                    touched.push_back(c);
                } else if (is_max) {
                    acc[c] = std::max(acc[c], val);
                } else {
                    acc[c] += val;
                }
                ++cnt[c];
            }
        }
        if (is_max) {
            // neighbors with no stored entry at c contribute an implicit 0
            for (std::int32_t c : touched)
                if (cnt[c] < deg) acc[c] = std::max(acc[c], 0.0);
        } else if (cfg.aggregator == Aggregator::mean && deg > 0) {
            for (std::int32_t c : touched) acc[c] /= static_cast<double>(deg);
        }
        // residual term h_i
        for (std::size_t f = h.row_offsets[i]; f < h.row_offsets[i + 1]; ++f) {
            const std::int32_t c = h.cols[f];
            if (cnt[c] == 0) {
                acc[c] = h.vals[f];
                touched.push_back(c);
                ++cnt[c];
            } else {
                acc[c] += h.vals[f];
            }
        }
        std::sort(touched.begin(), touched.end());
        double norm2 = 0.0;
        for (std::int32_t c : touched) norm2 += acc[c] * acc[c];
        if (norm2 < 1e-24) {
            zero_row.store(true);
            for (std::int32_t c : touched) {
                acc[c] = 0.0;
                cnt[c] = 0;
            }
            return;
        }
        const double norm = std::sqrt(norm2);
        auto& oc = out_cols[i];
        auto& ov = out_vals[i];
        oc.reserve(touched.size());
        ov.reserve(touched.size());
        for (std::int32_t c : touched) {
            oc.push_back(c);
            ov.push_back(acc[c] / norm);
            acc[c] = 0.0;
            cnt[c] = 0;
        }
    });
    if (zero_row.load()) throw ZeroVector("propagate: zero row after update");

    out.row_offsets.resize(n + 1);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out.row_offsets[i] = total;
        total += out_cols[i].size();
    }
    out.row_offsets[n] = total;
    out.cols.reserve(total);
    out.vals.reserve(total);
    for (std::size_t i = 0; i < n; ++i) {
        out.cols.insert(out.cols.end(), out_cols[i].begin(), out_cols[i].end());
        out.vals.insert(out.vals.end(), out_vals[i].begin(), out_vals[i].end());
    }
    return out;
}

inline NodeFeatureMatrix propagate(const NodeFeatureMatrix& h0, const SparseGraph& g,
                                   const GnnConfig& cfg, int threads = 1) {
    if (cfg.layers < 1) throw KOutOfRange("propagate: layers must be >= 1");
    NodeFeatureMatrix h = h0;
    for (std::size_t l = 0; l < cfg.layers; ++l) h = propagate_step(h, g, cfg, threads);
    return h;
}

// Full pipeline: S -> A -> A* -> h, e -> k2-NN graph -> propagate -> rank.
// Queries occupy union indices [0, n_q); gallery follows. Final lists rank
// gallery items by cosine of refined node features, ties by ascending index.
inline RankingResult gnn_rerank(const FeatureSet& query, const FeatureSet& gallery,
                                const GnnConfig& cfg, int threads = 1) {
    if (query.d != gallery.d) throw DimensionMismatch("gnn_rerank: dim mismatch");
    const std::size_t n_q = query.n, n_g = gallery.n, n = n_q + n_g;
    if (cfg.k1 < 1 || cfg.k1 >= n) throw KOutOfRange("gnn_rerank: k1 not in [1, n)");
    if (cfg.k2 < 1 || cfg.k2 >= n) throw KOutOfRange("gnn_rerank: k2 not in [1, n)");
    if (cfg.k2 > cfg.k1)
        std::fprintf(stderr, "warning: k2=%zu > k1=%zu is unusual\n", cfg.k2, cfg.k1);

    const auto t0 = std::chrono::steady_clock::now();

    FeatureSet uni;
    uni.n = n;
    uni.d = query.d;
    uni.features.reserve(n * uni.d);
    uni.features.insert(uni.features.end(), query.features.begin(), query.features.end());
    uni.features.insert(uni.features.end(), gallery.features.begin(), gallery.features.end());
    uni.ids.resize(n);
    uni.labels.assign(n, 0);
    uni.cameras.assign(n, -1);
    uni.roles.assign(n, Role::gallery);

    // Phase 1: similarity + graph construction (Eq. 7-12 analogue)
    const std::size_t kmax = std::max(cfg.k1, cfg.k2);
    const NeighborLists nl = top_k_blocked(uni, kmax, threads);
    NeighborLists nl1 = nl;
    if (cfg.k1 < kmax) {
        nl1.k = cfg.k1;
        nl1.indices.resize(n * cfg.k1);
        nl1.sims.resize(n * cfg.k1);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < cfg.k1; ++r) {
                nl1.indices[i * cfg.k1 + r] = nl.row(i)[r];
                nl1.sims[i * cfg.k1 + r] = nl.sim_row(i)[r];
            }
    }
    NeighborLists nl2 = nl;
    if (cfg.k2 < kmax) {
        nl2.k = cfg.k2;
        nl2.indices.resize(n * cfg.k2);
        nl2.sims.resize(n * cfg.k2);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < cfg.k2; ++r) {
                nl2.indices[i * cfg.k2 + r] = nl.row(i)[r];
                nl2.sims[i * cfg.k2 + r] = nl.sim_row(i)[r];
            }
    }
    const SparseGraph a = detail::adjacency_from_neighbors(nl1, cfg.k1, false);
    const SparseGraph a_star = symmetrize(a);
    const NodeFeatureMatrix h0 = node_features(a_star);
    const SparseGraph prop_graph = detail::adjacency_from_neighbors(nl2, cfg.k2, true);

    const auto t1 = std::chrono::steady_clock::now();

    // Phase 2: message propagation + final ranking (Eq. 13-14 analogue)
    const NodeFeatureMatrix h = propagate(h0, prop_graph, cfg, threads);

    RankingResult rr;
    rr.method = "gnn";
    rr.order.resize(n_q);
    rr.scores.resize(n_q);
    parallel_for(0, n_q, threads, [&](std::size_t q) {
        thread_local std::vector<double> qrow;
        qrow.assign(n, 0.0);
        if (h.is_dense) {
            const double* src = h.dense.data() + q * n;
            std::copy(src, src + n, qrow.begin());
        } else {
            for (std::size_t f = h.row_offsets[q]; f < h.row_offsets[q + 1]; ++f)
                qrow[h.cols[f]] = h.vals[f];
        }
        std::vector<double> scores(n_g, 0.0);
        for (std::size_t gi = 0; gi < n_g; ++gi) {
            const std::size_t u = n_q + gi;
            double acc = 0.0;
            if (h.is_dense) {
                const double* src = h.dense.data() + u * n;
                for (std::size_t c = 0; c < n; ++c) acc += src[c] * qrow[c];
            } else {
                for (std::size_t f = h.row_offsets[u]; f < h.row_offsets[u + 1]; ++f)
                    acc += h.vals[f] * qrow[h.cols[f]];
            }
            scores[gi] = acc;
        }
        rr.order[q] = rank_by_score(scores);
        rr.scores[q].resize(n_g);
        for (std::size_t r = 0; r < n_g; ++r) rr.scores[q][r] = scores[rr.order[q][r]];
    });

    const auto t2 = std::chrono::steady_clock::now();
    rr.timings.phase1_s = std::chrono::duration<double>(t1 - t0).count();
    rr.timings.phase2_s = std::chrono::duration<double>(t2 - t1).count();
    rr.timings.total_s = std::chrono::duration<double>(t2 - t0).count();
    return rr;
}

} // namespace rerank
