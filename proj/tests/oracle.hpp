// Deliberately naive, dense, loop-level re-derivations of every re-ranking
// pipeline, used as ground truth on small instances. Test-only; never part
// of the shipped library surface.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "rerank/rerank.hpp"

namespace oracle {

using rerank::FeatureSet;
using rerank::GnnConfig;
using rerank::KReciprocalConfig;
using rerank::RankingResult;

using Dense = std::vector<std::vector<double>>;

inline FeatureSet make_union(const FeatureSet& query, const FeatureSet& gallery) {
    FeatureSet uni;
    uni.n = query.n + gallery.n;
    uni.d = query.d;
    uni.features = query.features;
    uni.features.insert(uni.features.end(), gallery.features.begin(), gallery.features.end());
    uni.ids.resize(uni.n);
    uni.labels.assign(uni.n, 0);
    uni.cameras.assign(uni.n, -1);
    uni.roles.assign(uni.n, rerank::Role::gallery);
    return uni;
}

// dense cosine similarity; shares only the low-level dot kernel with the
// implementation so both see identical float similarities
inline std::vector<std::vector<float>> cosine_dense(const FeatureSet& fs) {
    const FeatureSet norm = rerank::l2_normalize(fs);
    std::vector<std::vector<float>> s(fs.n, std::vector<float>(fs.n));
    for (std::size_t i = 0; i < fs.n; ++i)
        for (std::size_t j = 0; j < fs.n; ++j)
            s[i][j] = rerank::dot_f32(norm.row(i), norm.row(j), fs.d);
    return s;
}

// full-sort top-k under the (sim desc, index asc) tie rule
inline std::vector<std::int32_t> topk_row(const std::vector<float>& simrow, std::size_t k) {
    std::vector<std::int32_t> idx(simrow.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int32_t>(i);
    std::sort(idx.begin(), idx.end(), [&](std::int32_t a, std::int32_t b) {
        if (simrow[a] != simrow[b]) return simrow[a] > simrow[b];
        return a < b;
    });
    idx.resize(k);
    return idx;
}

inline std::vector<std::int32_t> rank_desc(const std::vector<double>& scores) {
    std::vector<std::int32_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int32_t>(i);
    std::sort(idx.begin(), idx.end(), [&](std::int32_t a, std::int32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return idx;
}

inline double edge_weight(double e, double alpha) {
    if (e < 0.0 && alpha != std::floor(alpha)) e = 0.0;
    return std::pow(e, alpha);
}

// literal transcription of the GNN pipeline with dense matrices throughout
inline RankingResult gnn_rerank(const FeatureSet& query, const FeatureSet& gallery,
                                const GnnConfig& cfg) {
    const FeatureSet uni = make_union(query, gallery);
    const std::size_t n = uni.n, n_q = query.n, n_g = gallery.n;
    const auto S = cosine_dense(uni);

    // neighbor lists, ascending index order (matches CSR edge order)
    std::vector<std::vector<std::int32_t>> n1(n), n2(n);
    for (std::size_t i = 0; i < n; ++i) {
        n1[i] = topk_row(S[i], cfg.k1);
        std::sort(n1[i].begin(), n1[i].end());
        n2[i] = topk_row(S[i], cfg.k2);
        std::sort(n2[i].begin(), n2[i].end());
    }

    Dense A(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::int32_t j : n1[i]) A[i][j] = 1.0;

    Dense Astar(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) Astar[i][j] = (A[i][j] + A[j][i]) / 2.0;

    Dense H(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double norm2 = 0.0;
        for (std::size_t c = 0; c < n; ++c) norm2 += Astar[i][c] * Astar[i][c];
        const double norm = std::sqrt(norm2);
        for (std::size_t c = 0; c < n; ++c) H[i][c] = Astar[i][c] / norm;
    }

    for (std::size_t l = 0; l < cfg.layers; ++l) {
        Dense next(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < n; ++c) {
                double agg = 0.0;
                bool first = true;
                for (std::int32_t j : n2[i]) {
                    const double w =
                        edge_weight(static_cast<double>(S[i][j]), cfg.alpha);
                    const double val = w * H[j][c];
                    switch (cfg.aggregator) {
                        case rerank::Aggregator::sum:
                        case rerank::Aggregator::mean:
                            agg += val;
                            break;
                        case rerank::Aggregator::max:
                            agg = first ? val : std::max(agg, val);
                            break;
                    }
                    first = false;
                }
                if (cfg.aggregator == rerank::Aggregator::mean)
                    agg /= static_cast<double>(n2[i].size());
                next[i][c] = H[i][c] + agg;
            }
            double norm2 = 0.0;
            for (std::size_t c = 0; c < n; ++c) norm2 += next[i][c] * next[i][c];
            const double norm = std::sqrt(norm2);
            for (std::size_t c = 0; c < n; ++c) next[i][c] /= norm;
        }
        H = std::move(next);
    }

    RankingResult rr;
    rr.method = "oracle-gnn";
    rr.order.resize(n_q);
    rr.scores.resize(n_q);
    for (std::size_t q = 0; q < n_q; ++q) {
        std::vector<double> scores(n_g, 0.0);
        for (std::size_t g = 0; g < n_g; ++g)
            for (std::size_t c = 0; c < n; ++c) scores[g] += H[n_q + g][c] * H[q][c];
        rr.order[q] = rank_desc(scores);
        rr.scores[q].resize(n_g);
        for (std::size_t r = 0; r < n_g; ++r) rr.scores[q][r] = scores[rr.order[q][r]];
    }
    return rr;
}

// literal set-arithmetic transcription of k-reciprocal re-ranking
inline RankingResult k_reciprocal(const FeatureSet& query, const FeatureSet& gallery,
                                  const KReciprocalConfig& cfg) {
    const FeatureSet uni = make_union(query, gallery);
    const std::size_t n = uni.n, n_q = query.n, n_g = gallery.n;
    const auto S = cosine_dense(uni);

    auto neighbor_sets = [&](std::size_t k) {
        std::vector<std::set<std::int32_t>> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto lst = topk_row(S[i], k);
            out[i] = std::set<std::int32_t>(lst.begin(), lst.end());
        }
        return out;
    };
    const auto nk1 = neighbor_sets(cfg.k1);
    std::vector<std::set<std::int32_t>> recip(n), recip_half(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::int32_t j : nk1[i])
            if (nk1[static_cast<std::size_t>(j)].count(static_cast<std::int32_t>(i)))
                recip[i].insert(j);
    const std::size_t half_k = cfg.k1 / 2;
    if (half_k >= 1) {
        const auto nkh = neighbor_sets(half_k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::int32_t j : nkh[i])
                if (nkh[static_cast<std::size_t>(j)].count(static_cast<std::int32_t>(i)))
                    recip_half[i].insert(j);
    }

    std::vector<std::set<std::int32_t>> rstar(n);
    for (std::size_t i = 0; i < n; ++i) {
        rstar[i] = recip[i];
        for (std::int32_t g : recip[i]) {
            const auto& half = recip_half[static_cast<std::size_t>(g)];
            if (half.empty()) continue;
            std::size_t inter = 0;
            for (std::int32_t x : half)
                if (recip[i].count(x)) ++inter;
            if (3 * inter >= 2 * half.size())
                for (std::int32_t x : half) rstar[i].insert(x);
        }
    }

    Dense F(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::int32_t g : rstar[i]) {
            const double d = 2.0 - 2.0 * static_cast<double>(S[i][g]);
            F[i][g] = std::exp(-d);
        }

    // local query expansion over N(i, k2), ascending
    std::vector<std::vector<std::int32_t>> n2(n);
    for (std::size_t i = 0; i < n; ++i) {
        n2[i] = topk_row(S[i], cfg.k2);
        std::sort(n2[i].begin(), n2[i].end());
    }
    Dense F2(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < n; ++c) {
            double acc = 0.0;
            for (std::int32_t g : n2[i]) acc += F[g][c];
            F2[i][c] = acc / static_cast<double>(cfg.k2);
        }

    RankingResult rr;
    rr.method = "oracle-kreciprocal";
    rr.order.resize(n_q);
    rr.scores.resize(n_q);
    for (std::size_t q = 0; q < n_q; ++q) {
        std::vector<double> scores(n_g);
        for (std::size_t g = 0; g < n_g; ++g) {
            double sum_min = 0.0, sum_max = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                sum_min += std::min(F2[q][c], F2[n_q + g][c]);
                sum_max += std::max(F2[q][c], F2[n_q + g][c]);
            }
            const double dj = 1.0 - sum_min / sum_max;
            const double d_orig = 2.0 - 2.0 * static_cast<double>(S[q][n_q + g]);
            scores[g] = -((1.0 - cfg.lambda) * dj + cfg.lambda * d_orig);
        }
        rr.order[q] = rank_desc(scores);
        rr.scores[q].resize(n_g);
        for (std::size_t r = 0; r < n_g; ++r) rr.scores[q][r] = scores[rr.order[q][r]];
    }
    return rr;
}

// discrete PR-sum AP over an explicit relevance/junk walk
inline double average_precision(const std::vector<bool>& relevant,
                                const std::vector<bool>& junk, std::size_t total_positives) {
    double ap = 0.0;
    std::size_t rank = 0, hits = 0;
    for (std::size_t i = 0; i < relevant.size(); ++i) {
        if (junk[i]) continue;
        ++rank;
        if (relevant[i]) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(rank);
        }
    }
    return ap / static_cast<double>(total_positives);
}

// seeded random feature set for differential tests
inline FeatureSet random_features(std::size_t n, std::size_t d, std::uint64_t seed,
                                  rerank::Role role = rerank::Role::gallery) {
    rerank::SplitMix64 rng(seed);
    FeatureSet fs;
    fs.n = n;
    fs.d = d;
    fs.features.resize(n * d);
    for (auto& v : fs.features) v = static_cast<float>(rng.next_gaussian());
    for (std::size_t i = 0; i < n; ++i) {
        fs.ids.push_back((role == rerank::Role::query ? "q" : "g") + std::to_string(i));
        fs.labels.push_back(static_cast<std::int32_t>(i % 3));
        fs.cameras.push_back(static_cast<std::int32_t>(i % 2));
        fs.roles.push_back(role);
    }
    return fs;
}

} // namespace oracle
