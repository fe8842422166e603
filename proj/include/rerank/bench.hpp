#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "rerank/baselines.hpp"
#include "rerank/errors.hpp"
#include "rerank/eval.hpp"
#include "rerank/feature_set.hpp"
#include "rerank/gnn.hpp"
#include "rerank/ranking.hpp"

namespace rerank {

enum class Method { none, gnn, kreciprocal, aqe, alpha_qe };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::none: return "none";
        case Method::gnn: return "gnn";
        case Method::kreciprocal: return "kreciprocal";
        case Method::aqe: return "aqe";
        case Method::alpha_qe: return "alpha-qe";
    }
    return "?";
}

struct BenchConfig {
    GnnConfig gnn;
    KReciprocalConfig kr;
    std::size_t qe_k = 7;     // top-k for aqe / alpha-qe
    double qe_alpha = 3.0;    // alpha for alpha-qe
    int threads = 1;
};

struct BenchResult {
    Method method = Method::none;
    std::size_t n_query = 0, n_gallery = 0, dim = 0;
    double phase1_s = 0.0, phase2_s = 0.0, total_s = 0.0; // medians over repeats
    int threads = 1;
    std::size_t repeats = 0;
    std::vector<double> per_repeat; // total_s of each timed run
    double map = 0.0;
    double recall_at_1 = 0.0;
    RankingResult ranking; // from the last timed run
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace detail

inline RankingResult run_method(Method m, const FeatureSet& query, const FeatureSet& gallery,
                                const BenchConfig& cfg) {
    switch (m) {
        case Method::none: return baseline_ranking(query, gallery, cfg.threads);
        case Method::gnn: return gnn_rerank(query, gallery, cfg.gnn, cfg.threads);
        case Method::kreciprocal:
            return k_reciprocal_rerank(query, gallery, cfg.kr, cfg.threads);
        case Method::aqe: return aqe(query, gallery, cfg.qe_k, cfg.threads);
        case Method::alpha_qe:
            return alpha_qe(query, gallery, cfg.qe_k, cfg.qe_alpha, cfg.threads);
    }
    throw Error("run_method: unknown method");
}

// One warm-up run (discarded), then `repeats` timed runs; medians reported.
inline std::vector<BenchResult> run_bench(const FeatureSet& query, const FeatureSet& gallery,
                                          const std::vector<Method>& methods,
                                          const BenchConfig& cfg, std::size_t repeats) {
    if (repeats < 1) throw KOutOfRange("run_bench: repeats must be >= 1");
    std::vector<BenchResult> results;
    for (Method m : methods) {
        BenchResult br;
        br.method = m;
        br.n_query = query.n;
        br.n_gallery = gallery.n;
        br.dim = query.d;
        br.threads = cfg.threads;
        br.repeats = repeats;

        run_method(m, query, gallery, cfg); // warm-up

        std::vector<double> p1, p2, tot;
        for (std::size_t r = 0; r < repeats; ++r) {
            RankingResult rr = run_method(m, query, gallery, cfg);
            p1.push_back(rr.timings.phase1_s);
            p2.push_back(rr.timings.phase2_s);
            tot.push_back(rr.timings.total_s);
            br.ranking = std::move(rr);
        }
        br.per_repeat = tot;
        br.phase1_s = detail::median(p1);
        br.phase2_s = detail::median(p2);
        br.total_s = detail::median(tot);

        const EvalReport rep = evaluate(br.ranking, query, gallery, {1});
        br.map = rep.map;
        br.recall_at_1 = rep.recall_at.count(1) ? rep.recall_at.at(1) : 0.0;
        results.push_back(std::move(br));
    }
    return results;
}

inline void append_bench_csv(const std::vector<BenchResult>& results, const BenchConfig& cfg,
                             const std::string& path) {
    const bool fresh = !std::ifstream(path).good();
    std::ofstream os(path, std::ios::app);
    if (!os) throw IoFailure("cannot open for append: " + path);
    if (fresh)
        os << "method,n_query,n_gallery,dim,k1,k2,alpha,layers,threads,"
              "phase1_s,phase2_s,total_s,map,recall_at_1\n";
    for (const auto& r : results) {
        std::size_t k1 = 0, k2 = 0, layers = 0;
        double alpha = 0.0;
        if (r.method == Method::gnn) {
            k1 = cfg.gnn.k1;
            k2 = cfg.gnn.k2;
            alpha = cfg.gnn.alpha;
            layers = cfg.gnn.layers;
        } else if (r.method == Method::kreciprocal) {
            k1 = cfg.kr.k1;
            k2 = cfg.kr.k2;
        } else if (r.method == Method::aqe || r.method == Method::alpha_qe) {
            k2 = cfg.qe_k;
            alpha = r.method == Method::alpha_qe ? cfg.qe_alpha : 0.0;
        }
        os << method_name(r.method) << ',' << r.n_query << ',' << r.n_gallery << ','
           << r.dim << ',' << k1 << ',' << k2 << ',' << alpha << ',' << layers << ','
           << r.threads << ',' << r.phase1_s << ',' << r.phase2_s << ',' << r.total_s
           << ',' << r.map << ',' << r.recall_at_1 << '\n';
    }
    if (!os) throw IoFailure("write failed: " + path);
}

} // namespace rerank
