#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rerank/errors.hpp"
#include "rerank/feature_set.hpp"

namespace rerank {

struct PhaseTimings {
    double phase1_s = 0.0; // neighbor / graph construction
    double phase2_s = 0.0; // feature update + final ranking
    double total_s = 0.0;
};

// Per-query ordered gallery lists. `order[q]` holds 0-based gallery indices,
// best first; `scores[q]` the matching scores, nonincreasing for
// similarity-based methods (distance-based methods store negated distance).
struct RankingResult {
    std::vector<std::vector<std::int32_t>> order;
    std::vector<std::vector<double>> scores;
    std::string method;
    PhaseTimings timings;
};

// sort gallery indices by (score desc, index asc)
inline std::vector<std::int32_t> rank_by_score(const std::vector<double>& scores) {
    std::vector<std::int32_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int32_t>(i);
    std::stable_sort(idx.begin(), idx.end(), [&](std::int32_t a, std::int32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return idx;
}

inline void write_ranking_csv(const RankingResult& rr, const FeatureSet& query,
                              const FeatureSet& gallery, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoFailure("cannot open for write: " + path);
    os << "query_id,rank,gallery_id,score\n";
    for (std::size_t q = 0; q < rr.order.size(); ++q) {
        for (std::size_t r = 0; r < rr.order[q].size(); ++r) {
            std::ostringstream score;
            score.precision(17);
            score << rr.scores[q][r];
            os << query.ids[q] << ',' << (r + 1) << ',' << gallery.ids[rr.order[q][r]]
               << ',' << score.str() << '\n';
        }
    }
    if (!os) throw IoFailure("write failed: " + path);
}

inline RankingResult load_ranking_csv(const std::string& path, const FeatureSet& query,
                                      const FeatureSet& gallery) {
    std::ifstream is(path);
    if (!is) throw IoFailure("cannot open: " + path);
    std::map<std::string, std::int32_t> qidx, gidx;
    for (std::size_t i = 0; i < query.n; ++i) qidx[query.ids[i]] = static_cast<std::int32_t>(i);
    for (std::size_t i = 0; i < gallery.n; ++i) gidx[gallery.ids[i]] = static_cast<std::int32_t>(i);

    RankingResult rr;
    rr.order.resize(query.n);
    rr.scores.resize(query.n);
    std::string line;
    if (!std::getline(is, line)) throw IoFailure(path + ": empty ranking file");
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cols = detail::split_csv_line(line);
        if (cols.size() != 4)
            throw IoFailure(path + ":" + std::to_string(lineno) + ": expected 4 columns");
        auto qi = qidx.find(cols[0]);
        auto gi = gidx.find(cols[2]);
        if (qi == qidx.end())
            throw IoFailure(path + ":" + std::to_string(lineno) + ": unknown query id " + cols[0]);
        if (gi == gidx.end())
            throw IoFailure(path + ":" + std::to_string(lineno) + ": unknown gallery id " + cols[2]);
        rr.order[qi->second].push_back(gi->second);
        rr.scores[qi->second].push_back(std::stod(cols[3]));
    }
    return rr;
}

} // namespace rerank
