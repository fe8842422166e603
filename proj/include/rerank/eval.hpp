#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "rerank/errors.hpp"
#include "rerank/feature_set.hpp"
#include "rerank/ranking.hpp"

#include "json.hpp"

namespace rerank {

struct EvalReport {
    double map = 0.0;
    std::map<std::size_t, double> recall_at; // K -> recall
    std::vector<double> per_query_ap;        // evaluated queries only
    std::size_t n_queries_evaluated = 0;
    std::size_t n_queries_skipped = 0; // no valid cross-camera positive
};

namespace detail {

// Market-1501 style junk rule: distractors (label -1) and same-id/same-camera
// hits never count, for mAP and Recall@K alike.
inline bool is_junk(std::int32_t g_label, std::int32_t g_camera, std::int32_t q_label,
                    std::int32_t q_camera) {
    if (g_label == -1) return true;
    return g_label == q_label && q_camera != -1 && g_camera == q_camera;
}

} // namespace detail

// Discrete-sum AP over the junk-filtered list:
// AP = sum over hit positions of (hits_so_far / position) / total_positives.
inline double average_precision(const std::vector<std::int32_t>& ranking,
                                const std::vector<std::int32_t>& gallery_labels,
                                std::int32_t query_label, std::int32_t query_camera,
                                const std::vector<std::int32_t>& gallery_cameras) {
    if (query_label == -1) throw NoValidPositives("average_precision: query is a distractor");
    std::size_t total_pos = 0;
    for (std::size_t g = 0; g < gallery_labels.size(); ++g)
        if (gallery_labels[g] == query_label &&
            !detail::is_junk(gallery_labels[g], gallery_cameras[g], query_label, query_camera))
            ++total_pos;
    if (total_pos == 0)
        throw NoValidPositives("average_precision: no valid positives for query");

    double ap = 0.0;
    std::size_t rank = 0, hits = 0;
    for (std::int32_t g : ranking) {
        const auto gi = static_cast<std::size_t>(g);
        if (detail::is_junk(gallery_labels[gi], gallery_cameras[gi], query_label, query_camera))
            continue;
        ++rank;
        if (gallery_labels[gi] == query_label) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(rank);
        }
    }
    return ap / static_cast<double>(total_pos);
}

inline EvalReport evaluate(const RankingResult& rr, const FeatureSet& query,
                           const FeatureSet& gallery, const std::vector<std::size_t>& ks) {
    if (rr.order.size() != query.n)
        throw DimensionMismatch("evaluate: ranking/query count mismatch");
    EvalReport rep;
    std::map<std::size_t, std::size_t> first_hit_within; // K -> count
    for (std::size_t k : ks) first_hit_within[k] = 0;

    for (std::size_t q = 0; q < query.n; ++q) {
        double ap;
        try {
            ap = average_precision(rr.order[q], gallery.labels, query.labels[q],
                                   query.cameras[q], gallery.cameras);
        } catch (const NoValidPositives&) {
            ++rep.n_queries_skipped;
            continue;
        }
        rep.per_query_ap.push_back(ap);

        // rank of the first true match after junk removal
        std::size_t rank = 0, first_match = 0;
        for (std::int32_t g : rr.order[q]) {
            const auto gi = static_cast<std::size_t>(g);
            if (detail::is_junk(gallery.labels[gi], gallery.cameras[gi], query.labels[q],
                                query.cameras[q]))
                continue;
            ++rank;
            if (gallery.labels[gi] == query.labels[q]) {
                first_match = rank;
                break;
            }
        }
        for (std::size_t k : ks)
            if (first_match >= 1 && first_match <= k) ++first_hit_within[k];
    }

    rep.n_queries_evaluated = rep.per_query_ap.size();
    if (rep.n_queries_evaluated > 0) {
        double sum = 0.0;
        for (double ap : rep.per_query_ap) sum += ap;
        rep.map = sum / static_cast<double>(rep.n_queries_evaluated);
        for (std::size_t k : ks)
            rep.recall_at[k] = static_cast<double>(first_hit_within[k]) /
                               static_cast<double>(rep.n_queries_evaluated);
    }
    return rep;
}

inline nlohmann::json eval_report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["map"] = rep.map;
    for (const auto& [k, v] : rep.recall_at) j["recall_at_" + std::to_string(k)] = v;
    j["n_queries_evaluated"] = rep.n_queries_evaluated;
    j["n_queries_skipped"] = rep.n_queries_skipped;
    return j;
}

inline std::string eval_report_table(const EvalReport& rep) {
    std::string out;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-18s %10.6f\n", "mAP", rep.map);
    out += buf;
    for (const auto& [k, v] : rep.recall_at) {
        std::snprintf(buf, sizeof(buf), "Recall@%-11zu %10.6f\n", k, v);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%-18s %10zu\n", "queries evaluated",
                  rep.n_queries_evaluated);
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-18s %10zu\n", "queries skipped", rep.n_queries_skipped);
    out += buf;
    return out;
}

} // namespace rerank
