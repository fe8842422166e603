#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rerank/rerank.hpp"

namespace {

rerank::Method parse_method(const std::string& s) {
    if (s == "none") return rerank::Method::none;
    if (s == "gnn") return rerank::Method::gnn;
    if (s == "kreciprocal") return rerank::Method::kreciprocal;
    if (s == "aqe") return rerank::Method::aqe;
    if (s == "alpha-qe") return rerank::Method::alpha_qe;
    throw CLI::ValidationError("unknown method: " + s);
}

rerank::Aggregator parse_aggregator(const std::string& s) {
    if (s == "sum") return rerank::Aggregator::sum;
    if (s == "mean") return rerank::Aggregator::mean;
    if (s == "max") return rerank::Aggregator::max;
    throw CLI::ValidationError("unknown aggregator: " + s);
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"re-ranking engine for content-based image retrieval"};
    app.require_subcommand(1);

    int threads = 1;
    app.add_option("--threads", threads, "worker thread cap (default 1 for reproducibility)")
        ->envname("RERANK_THREADS");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    rerank::SynthSpec spec;
    std::string synth_out;
    synth->add_option("--classes", spec.n_classes, "number of classes")->required();
    synth->add_option("--per-class", spec.per_class, "points per class")->required();
    synth->add_option("--dim", spec.dim, "feature dimension")->required();
    synth->add_option("--sigma", spec.noise_sigma, "Gaussian noise sigma");
    synth->add_option("--queries-per-class", spec.queries_per_class, "queries per class");
    synth->add_option("--seed", spec.seed, "RNG seed")->envname("RERANK_SEED");
    synth->add_option("--out", synth_out, "output directory")->required();

    // shared method hyperparameters
    std::string method_str = "gnn";
    std::string query_path, gallery_path, out_path;
    std::size_t k1 = 0, k2 = 7, layers = 2, classes_hint = 0, qe_k = 0;
    double alpha = 2.0, lambda = 0.3;
    std::string aggregator_str = "sum";

    auto add_method_flags = [&](CLI::App* cmd) {
        cmd->add_option("--query", query_path, "query feature file")->required();
        cmd->add_option("--gallery", gallery_path, "gallery feature file")->required();
        cmd->add_option("--k1", k1, "neighborhood size for graph / reciprocal sets");
        cmd->add_option("--k2", k2, "expansion / propagation neighborhood size");
        cmd->add_option("--alpha", alpha, "edge-weight exponent");
        cmd->add_option("--layers", layers, "propagation layers");
        cmd->add_option("--aggregator", aggregator_str, "sum | mean | max");
        cmd->add_option("--lambda", lambda, "k-reciprocal blend factor");
        cmd->add_option("--qe-k", qe_k, "neighbor count for aqe/alpha-qe (default k2)");
        cmd->add_option("--classes", classes_hint,
                        "class-count estimate; sets k1 = floor(n / classes) when --k1 unset");
    };

    // rerank
    auto* rr_cmd = app.add_subcommand("rerank", "run a re-ranking method, write ranking CSV");
    rr_cmd->add_option("--method", method_str, "none | gnn | kreciprocal | aqe | alpha-qe");
    add_method_flags(rr_cmd);
    rr_cmd->add_option("--out", out_path, "output ranking CSV")->required();

    // eval
    auto* ev_cmd = app.add_subcommand("eval", "score a ranking CSV against labels");
    std::string ranking_path, ks_str = "1,5,10", report_path;
    ev_cmd->add_option("--ranking", ranking_path, "ranking CSV")->required();
    ev_cmd->add_option("--query", query_path, "query feature file")->required();
    ev_cmd->add_option("--gallery", gallery_path, "gallery feature file")->required();
    ev_cmd->add_option("--ks", ks_str, "comma-separated K values for Recall@K");
    ev_cmd->add_option("--out", report_path, "output EvalReport JSON");

    // bench
    auto* bn_cmd = app.add_subcommand("bench", "time methods, append results CSV");
    std::string methods_str = "gnn";
    std::size_t repeats = 3;
    bn_cmd->add_option("--methods", methods_str, "comma-separated method list");
    add_method_flags(bn_cmd);
    bn_cmd->add_option("--repeats", repeats, "timed runs per method (median reported)");
    bn_cmd->add_option("--out", out_path, "results CSV (appended)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            auto [q, g] = rerank::synth_dataset(spec);
            std::filesystem::create_directories(synth_out);
            rerank::write_feature_set(q, synth_out + "/query.feat");
            rerank::write_feature_set(g, synth_out + "/gallery.feat");
            std::printf("wrote %zu query and %zu gallery rows (d=%zu) to %s\n", q.n, g.n,
                        q.d, synth_out.c_str());
            return 0;
        }

        if (rr_cmd->parsed() || bn_cmd->parsed()) {
            const rerank::FeatureSet query = rerank::load_feature_set(query_path);
            const rerank::FeatureSet gallery = rerank::load_feature_set(gallery_path);
            const std::size_t n = query.n + gallery.n;
            if (k1 == 0) {
                if (classes_hint > 0) {
                    k1 = rerank::suggest_k1(n, classes_hint);
                } else if (rr_cmd->parsed() && method_str != "none" && method_str != "aqe" &&
                           method_str != "alpha-qe") {
                    std::cerr << "error: --k1 required (or provide --classes)\n";
                    return 1;
                } else {
                    k1 = 26;
                }
            }
            if (qe_k == 0) qe_k = k2;

            rerank::BenchConfig cfg;
            cfg.gnn = {k1, k2, alpha, layers, parse_aggregator(aggregator_str)};
            cfg.kr = {k1, k2, lambda};
            cfg.qe_k = qe_k;
            cfg.qe_alpha = alpha;
            cfg.threads = threads;

            if (rr_cmd->parsed()) {
                const rerank::RankingResult rr =
                    rerank::run_method(parse_method(method_str), query, gallery, cfg);
                rerank::write_ranking_csv(rr, query, gallery, out_path);
                std::printf("method=%s phase1=%.3fs phase2=%.3fs total=%.3fs -> %s\n",
                            rr.method.c_str(), rr.timings.phase1_s, rr.timings.phase2_s,
                            rr.timings.total_s, out_path.c_str());
            } else {
                std::vector<rerank::Method> methods;
                std::stringstream ss(methods_str);
                std::string item;
                while (std::getline(ss, item, ',')) methods.push_back(parse_method(item));
                const auto results = rerank::run_bench(query, gallery, methods, cfg, repeats);
                rerank::append_bench_csv(results, cfg, out_path);
                for (const auto& r : results)
                    std::printf("%-12s total=%.3fs (p1=%.3fs p2=%.3fs) mAP=%.4f R@1=%.4f\n",
                                rerank::method_name(r.method).c_str(), r.total_s, r.phase1_s,
                                r.phase2_s, r.map, r.recall_at_1);
            }
            return 0;
        }

        if (ev_cmd->parsed()) {
            const rerank::FeatureSet query = rerank::load_feature_set(query_path);
            const rerank::FeatureSet gallery = rerank::load_feature_set(gallery_path);
            const rerank::RankingResult rr =
                rerank::load_ranking_csv(ranking_path, query, gallery);
            const rerank::EvalReport rep =
                rerank::evaluate(rr, query, gallery, parse_size_list(ks_str));
            std::cout << rerank::eval_report_table(rep);
            if (!report_path.empty()) {
                std::ofstream os(report_path, std::ios::trunc);
                if (!os) throw rerank::IoFailure("cannot open for write: " + report_path);
                os << rerank::eval_report_to_json(rep).dump(2) << '\n';
            }
            return 0;
        }
    } catch (const rerank::Error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
