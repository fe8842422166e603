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

namespace rerank {

struct KReciprocalConfig {
    std::size_t k1 = 20;
    std::size_t k2 = 6;
    double lambda = 0.3;
};

// sparse nonnegative feature row: (column, value), columns ascending
using SparseRow = std::vector<std::pair<std::int32_t, double>>;

struct DistanceMatrix {
    std::size_t n_query = 0;
    std::size_t n_gallery = 0;
    std::vector<double> values; // n_query * n_gallery

    double at(std::size_t q, std::size_t g) const { return values[q * n_gallery + g]; }
};

namespace detail {

// per-row sorted neighbor sets for O(log k) membership
struct SortedNeighbors {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::int32_t> sorted; // n * k, each row ascending

    bool contains(std::size_t row, std::int32_t j) const {
        const auto b = sorted.begin() + static_cast<std::ptrdiff_t>(row * k);
        return std::binary_search(b, b + static_cast<std::ptrdiff_t>(k), j);
    }
};

inline SortedNeighbors sort_neighbors(const NeighborLists& nl) {
    SortedNeighbors s;
    s.n = nl.n;
    s.k = nl.k;
    s.sorted = nl.indices;
    for (std::size_t i = 0; i < nl.n; ++i) {
        auto b = s.sorted.begin() + static_cast<std::ptrdiff_t>(i * nl.k);
        std::sort(b, b + static_cast<std::ptrdiff_t>(nl.k));
    }
    return s;
}

// R(i, k) = { j in N(i,k) : i in N(j,k) }, ascending
inline std::vector<std::int32_t> reciprocal_row(const SortedNeighbors& sn, std::size_t i) {
    std::vector<std::int32_t> out;
    const auto b = sn.sorted.begin() + static_cast<std::ptrdiff_t>(i * sn.k);
    for (std::size_t r = 0; r < sn.k; ++r) {
        const std::int32_t j = b[static_cast<std::ptrdiff_t>(r)];
        if (sn.contains(static_cast<std::size_t>(j), static_cast<std::int32_t>(i)))
            out.push_back(j);
    }
    return out;
}

inline std::size_t intersection_size(const std::vector<std::int32_t>& a,
                                     const std::vector<std::int32_t>& b) {
    std::size_t cnt = 0, p = 0, q = 0;
    while (p < a.size() && q < b.size()) {
        if (a[p] < b[q]) ++p;
        else if (b[q] < a[p]) ++q;
        else { ++cnt; ++p; ++q; }
    }
    return cnt;
}

inline std::vector<std::int32_t> set_union(const std::vector<std::int32_t>& a,
                                           const std::vector<std::int32_t>& b) {
    std::vector<std::int32_t> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

// R*(i, k1) per the 2/3-overlap expansion rule, ascending
inline std::vector<std::int32_t> expanded_row(const std::vector<std::vector<std::int32_t>>& recip,
                                              const std::vector<std::vector<std::int32_t>>& recip_half,
                                              std::size_t i) {
    const auto& base = recip[i];
    std::vector<std::int32_t> out = base;
    for (std::int32_t g : base) {
        const auto& half = recip_half[static_cast<std::size_t>(g)];
        if (3 * intersection_size(base, half) >= 2 * half.size() && !half.empty())
            out = set_union(out, half);
    }
    return out;
}

} // namespace detail

inline std::vector<std::int32_t> reciprocal_set(const SimilarityMatrix& sim, std::size_t i,
                                                std::size_t k) {
    if (k < 1 || k >= sim.n) throw KOutOfRange("reciprocal_set: k not in [1, n)");
    const auto sn = detail::sort_neighbors(top_k(sim, k));
    return detail::reciprocal_row(sn, i);
}

inline std::vector<std::int32_t> expanded_reciprocal_set(const SimilarityMatrix& sim,
                                                         std::size_t i, std::size_t k1) {
    if (k1 < 1 || k1 >= sim.n) throw KOutOfRange("expanded_reciprocal_set: k1 not in [1, n)");
    const auto sn = detail::sort_neighbors(top_k(sim, k1));
    std::vector<std::vector<std::int32_t>> recip(sim.n), recip_half(sim.n);
    for (std::size_t r = 0; r < sim.n; ++r) recip[r] = detail::reciprocal_row(sn, r);
    const std::size_t half_k = k1 / 2;
    if (half_k >= 1) {
        const auto snh = detail::sort_neighbors(top_k(sim, half_k));
        for (std::size_t r = 0; r < sim.n; ++r) recip_half[r] = detail::reciprocal_row(snh, r);
    }
    return detail::expanded_row(recip, recip_half, i);
}

// F_{i,g} = exp(-d(i,g)) on R*(i,k1), d = 2 - 2*S (squared Euclidean on
// normalized features), 0 elsewhere.
inline SparseRow k_reciprocal_feature(const SimilarityMatrix& sim, std::size_t i,
                                      std::size_t k1) {
    const auto rstar = expanded_reciprocal_set(sim, i, k1);
    SparseRow row;
    row.reserve(rstar.size());
    for (std::int32_t g : rstar) {
        const double d = 2.0 - 2.0 * static_cast<double>(sim.at(i, static_cast<std::size_t>(g)));
        row.emplace_back(g, std::exp(-d));
    }
    return row;
}

namespace detail {

// F_i <- (1/k2) * sum of F_g over g in N(i, k2), neighbors visited in
// ascending index order
inline std::vector<SparseRow> lqe_rows(const std::vector<SparseRow>& F,
                                       const SortedNeighbors& sn2, std::size_t n,
                                       std::size_t k2, int threads) {
    std::vector<SparseRow> out(n);
    parallel_for(0, n, threads, [&](std::size_t i) {
        thread_local std::vector<double> acc;
        thread_local std::vector<char> seen;
        thread_local std::vector<std::int32_t> touched;
        if (acc.size() < n) {
            acc.assign(n, 0.0);
            seen.assign(n, 0);
        }
        touched.clear();
        const auto b = sn2.sorted.begin() + static_cast<std::ptrdiff_t>(i * k2);
        for (std::size_t r = 0; r < k2; ++r) {
            const auto g = static_cast<std::size_t>(b[static_cast<std::ptrdiff_t>(r)]);
            for (const auto& [c, v] : F[g]) {
                if (!seen[c]) {
                    seen[c] = 1;
                    touched.push_back(c);
                    acc[c] = v;
                } else {
                    acc[c] += v;
                }
            }
        }
        std::sort(touched.begin(), touched.end());
        auto& row = out[i];
        row.reserve(touched.size());
        for (std::int32_t c : touched) {
            row.emplace_back(c, acc[c] / static_cast<double>(k2));
            acc[c] = 0.0;
            seen[c] = 0;
        }
    });
    return out;
}

inline double jaccard_pair(const SparseRow& a, const SparseRow& b) {
    double sum_min = 0.0, sum_max = 0.0;
    std::size_t p = 0, q = 0;
    while (p < a.size() || q < b.size()) {
        if (q >= b.size() || (p < a.size() && a[p].first < b[q].first)) {
            sum_max += a[p].second;
            ++p;
        } else if (p >= a.size() || b[q].first < a[p].first) {
            sum_max += b[q].second;
            ++q;
        } else {
            sum_min += std::min(a[p].second, b[q].second);
            sum_max += std::max(a[p].second, b[q].second);
            ++p;
            ++q;
        }
    }
    if (sum_max == 0.0) throw ZeroDenominator("jaccard: both rows all-zero");
    return 1.0 - sum_min / sum_max;
}

} // namespace detail

inline std::vector<SparseRow> local_query_expansion(const std::vector<SparseRow>& F,
                                                    const SimilarityMatrix& sim,
                                                    std::size_t k2, int threads = 1) {
    if (k2 < 1 || k2 > sim.n) throw KOutOfRange("local_query_expansion: k2 not in [1, n]");
    const auto sn2 = detail::sort_neighbors(top_k(sim, k2, threads));
    return detail::lqe_rows(F, sn2, sim.n, k2, threads);
}

// d_J for every query-gallery pair; rows [0, n_q) of F are queries,
// the rest gallery.
inline DistanceMatrix jaccard_distance(const std::vector<SparseRow>& F, std::size_t n_q,
                                       int threads = 1) {
    DistanceMatrix dm;
    dm.n_query = n_q;
    dm.n_gallery = F.size() - n_q;
    dm.values.resize(dm.n_query * dm.n_gallery);
    std::atomic<bool> zero_denom{false};
    parallel_for(0, n_q, threads, [&](std::size_t q) {
        for (std::size_t g = 0; g < dm.n_gallery; ++g) {
            const SparseRow& a = F[q];
            const SparseRow& b = F[n_q + g];
            if (a.empty() && b.empty()) {
                zero_denom.store(true);
                return;
            }
            dm.values[q * dm.n_gallery + g] = detail::jaccard_pair(a, b);
        }
    });
    if (zero_denom.load()) throw ZeroDenominator("jaccard: both rows all-zero");
    return dm;
}

// Full pipeline: R -> R* -> F -> local query expansion -> Jaccard ->
// d* = (1-lambda)*d_J + lambda*d_original, ranked ascending.
inline RankingResult k_reciprocal_rerank(const FeatureSet& query, const FeatureSet& gallery,
                                         const KReciprocalConfig& cfg, int threads = 1) {
    if (query.d != gallery.d) throw DimensionMismatch("k_reciprocal_rerank: dim mismatch");
    if (cfg.lambda < 0.0 || cfg.lambda > 1.0)
        throw KOutOfRange("k_reciprocal_rerank: lambda not in [0,1]");
    const std::size_t n_q = query.n, n_g = gallery.n, n = n_q + n_g;
    if (cfg.k1 < 1 || cfg.k1 >= n) throw KOutOfRange("k_reciprocal_rerank: k1 not in [1, n)");
    if (cfg.k2 < 1 || cfg.k2 >= n) throw KOutOfRange("k_reciprocal_rerank: k2 not in [1, n)");

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

    // Phase 1: similarity + reciprocal sets + k-reciprocal features
    const SimilarityMatrix sim = cosine_similarity_matrix(uni, threads);
    const auto sn1 = detail::sort_neighbors(top_k(sim, cfg.k1, threads));
    std::vector<std::vector<std::int32_t>> recip(n), recip_half(n);
    parallel_for(0, n, threads, [&](std::size_t i) { recip[i] = detail::reciprocal_row(sn1, i); });
    const std::size_t half_k = cfg.k1 / 2;
    if (half_k >= 1) {
        const auto snh = detail::sort_neighbors(top_k(sim, half_k, threads));
        parallel_for(0, n, threads,
                     [&](std::size_t i) { recip_half[i] = detail::reciprocal_row(snh, i); });
    }
    std::vector<SparseRow> F(n);
    parallel_for(0, n, threads, [&](std::size_t i) {
        const auto rstar = detail::expanded_row(recip, recip_half, i);
        F[i].reserve(rstar.size());
        for (std::int32_t g : rstar) {
            const double d =
                2.0 - 2.0 * static_cast<double>(sim.at(i, static_cast<std::size_t>(g)));
            F[i].emplace_back(g, std::exp(-d));
        }
    });

    const auto t1 = std::chrono::steady_clock::now();

    // Phase 2: local query expansion + Jaccard + blended ranking
    const auto sn2 = detail::sort_neighbors(top_k(sim, cfg.k2, threads));
    const std::vector<SparseRow> Fx = detail::lqe_rows(F, sn2, n, cfg.k2, threads);

    RankingResult rr;
    rr.method = "kreciprocal";
    rr.order.resize(n_q);
    rr.scores.resize(n_q);
    parallel_for(0, n_q, threads, [&](std::size_t q) {
        std::vector<double> scores(n_g);
        for (std::size_t g = 0; g < n_g; ++g) {
            const double dj = detail::jaccard_pair(Fx[q], Fx[n_q + g]);
            const double d_orig = 2.0 - 2.0 * static_cast<double>(sim.at(q, n_q + g));
            const double dstar = (1.0 - cfg.lambda) * dj + cfg.lambda * d_orig;
            scores[g] = -dstar;
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

// Plain cosine ranking of the original features (method "none").
inline RankingResult baseline_ranking(const FeatureSet& query, const FeatureSet& gallery,
                                      int threads = 1) {
    if (query.d != gallery.d) throw DimensionMismatch("baseline_ranking: dim mismatch");
    const auto t0 = std::chrono::steady_clock::now();
    const FeatureSet qn = l2_normalize(query);
    const FeatureSet gn = l2_normalize(gallery);
    RankingResult rr;
    rr.method = "none";
    rr.order.resize(query.n);
    rr.scores.resize(query.n);
    parallel_for(0, query.n, threads, [&](std::size_t q) {
        std::vector<double> scores(gallery.n);
        for (std::size_t g = 0; g < gallery.n; ++g)
            scores[g] = dot_f32(qn.row(q), gn.row(g), qn.d);
        rr.order[q] = rank_by_score(scores);
        rr.scores[q].resize(gallery.n);
        for (std::size_t r = 0; r < gallery.n; ++r) rr.scores[q][r] = scores[rr.order[q][r]];
    });
    const auto t1 = std::chrono::steady_clock::now();
    rr.timings.total_s = rr.timings.phase2_s = std::chrono::duration<double>(t1 - t0).count();
    return rr;
}

// alpha-weighted query expansion: expanded query = normalize(q + sum over its
// top-k gallery neighbors of cos(q, g)^alpha * g), then cosine ranking.
// alpha = 0 is plain AQE (all weights 1, the query itself included).
inline RankingResult alpha_qe(const FeatureSet& query, const FeatureSet& gallery,
                              std::size_t k, double alpha, int threads = 1) {
    if (query.d != gallery.d) throw DimensionMismatch("alpha_qe: dim mismatch");
    if (k < 1 || k > gallery.n) throw KOutOfRange("alpha_qe: k not in [1, n_g]");
    const auto t0 = std::chrono::steady_clock::now();
    const FeatureSet qn = l2_normalize(query);
    const FeatureSet gn = l2_normalize(gallery);
    const std::size_t d = qn.d;
    const bool integral = alpha == std::floor(alpha);

    RankingResult rr;
    rr.method = alpha == 0.0 ? "aqe" : "alpha-qe";
    rr.order.resize(query.n);
    rr.scores.resize(query.n);
    std::atomic<bool> warn_clamp{false};
    parallel_for(0, query.n, threads, [&](std::size_t q) {
        // top-k gallery neighbors of this query
        std::vector<double> sims(gallery.n);
        for (std::size_t g = 0; g < gallery.n; ++g)
            sims[g] = dot_f32(qn.row(q), gn.row(g), d);
        std::vector<std::int32_t> nb = rank_by_score(sims);
        nb.resize(k);

        // expanded query: own feature (weight 1) + weighted neighbors
        std::vector<double> acc(d);
        for (std::size_t j = 0; j < d; ++j) acc[j] = qn.row(q)[j];
        for (std::int32_t g : nb) {
            double s = sims[static_cast<std::size_t>(g)];
            if (s < 0.0 && !integral) {
                warn_clamp.store(true);
                s = 0.0;
            }
            const double w = std::pow(s, alpha);
            const float* gr = gn.row(static_cast<std::size_t>(g));
            for (std::size_t j = 0; j < d; ++j) acc[j] += w * gr[j];
        }
        double norm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) norm2 += acc[j] * acc[j];
        const double norm = std::sqrt(norm2);
        std::vector<float> newq(d);
        for (std::size_t j = 0; j < d; ++j)
            newq[j] = norm < 1e-12 ? qn.row(q)[j] : static_cast<float>(acc[j] / norm);

        std::vector<double> scores(gallery.n);
        for (std::size_t g = 0; g < gallery.n; ++g)
            scores[g] = dot_f32(newq.data(), gn.row(g), d);
        rr.order[q] = rank_by_score(scores);
        rr.scores[q].resize(gallery.n);
        for (std::size_t r = 0; r < gallery.n; ++r) rr.scores[q][r] = scores[rr.order[q][r]];
    });
    if (warn_clamp.load())
        std::fprintf(stderr,
                     "warning: negative similarity with fractional alpha=%g; clamped to 0\n",
                     alpha);
    const auto t1 = std::chrono::steady_clock::now();
    rr.timings.total_s = rr.timings.phase2_s = std::chrono::duration<double>(t1 - t0).count();
    return rr;
}

inline RankingResult aqe(const FeatureSet& query, const FeatureSet& gallery, std::size_t k,
                         int threads = 1) {
    RankingResult rr = alpha_qe(query, gallery, k, 0.0, threads);
    rr.method = "aqe";
    return rr;
}

} // namespace rerank
