#pragma once

#include <fstream>
#include <optional>

#include "smbop/model/decoder.hpp"
#include "smbop/sql/render.hpp"

namespace smbop {

/// Symbolic view of one decode, the layer shared by the eval metrics and the
/// on-disk trace format: per-step beam digests, the returnable pool, and the
/// chosen tree.
struct TraceView {
    std::vector<std::vector<Digest>> beam_digests;
    std::vector<int> frontier_sizes;
    std::vector<Digest> pool_digests;
    std::optional<Digest> chosen;
};

inline TraceView trace_view(const DecodeResult& result) {
    TraceView v;
    for (const auto& beam : result.beams) {
        std::vector<Digest> ds;
        ds.reserve(static_cast<std::size_t>(beam.size()));
        for (const auto& item : beam.items) ds.push_back(item.digest);
        v.beam_digests.push_back(std::move(ds));
    }
    v.frontier_sizes = result.frontier_sizes;
    for (const auto& [t, i] : result.pool)
        v.pool_digests.push_back(
            result.beams[static_cast<std::size_t>(t)].items[static_cast<std::size_t>(i)].digest);
    if (result.chosen >= 0)
        v.chosen = v.pool_digests[static_cast<std::size_t>(result.chosen)];
    return v;
}

/// One JSON object per example: serialized beams with scores, frontier sizes,
/// the returnable pool with its scores, the chosen tree, and its SQL when the
/// tree has a dialect rendering.
inline nlohmann::json trace_to_json(const DecodeResult& result) {
    nlohmann::json beams = nlohmann::json::array();
    for (const auto& beam : result.beams) {
        nlohmann::json items = nlohmann::json::array();
        for (const auto& item : beam.items)
            items.push_back({{"tree", ra::serialize(item.tree)}, {"score", item.step_score}});
        beams.push_back(std::move(items));
    }
    nlohmann::json pool = nlohmann::json::array();
    for (std::size_t m = 0; m < result.pool.size(); ++m) {
        const BeamItem& item =
            result.beams[static_cast<std::size_t>(result.pool[m].first)]
                .items[static_cast<std::size_t>(result.pool[m].second)];
        double score = result.reranker_used && m < result.pool_scores.size()
                           ? result.pool_scores[m]
                           : item.step_score;
        pool.push_back({{"tree", ra::serialize(item.tree)}, {"score", score}});
    }
    nlohmann::json out = {{"beams", std::move(beams)},
                          {"frontier_sizes", result.frontier_sizes},
                          {"pool", std::move(pool)}};
    ra::RaTree chosen = result.chosen_tree();
    if (chosen) {
        out["chosen"] = ra::serialize(chosen);
        try {
            out["sql"] = sql::ra_to_sql(chosen);
        } catch (const Error&) {
            out["sql"] = nullptr;  // outside the dialect image
        }
    } else {
        out["chosen"] = nullptr;
        out["sql"] = nullptr;
    }
    return out;
}

inline void write_traces(const std::vector<nlohmann::json>& traces, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (const auto& t : traces) out << t.dump() << "\n";
}

inline TraceView trace_view_from_json(const nlohmann::json& j) {
    TraceView v;
    for (const auto& beam : j.at("beams")) {
        std::vector<Digest> ds;
        for (const auto& item : beam)
            ds.push_back(ra::canonical_digest(ra::parse_tree(item.at("tree").get<std::string>())));
        v.beam_digests.push_back(std::move(ds));
    }
    if (j.contains("frontier_sizes"))
        v.frontier_sizes = j.at("frontier_sizes").get<std::vector<int>>();
    for (const auto& item : j.at("pool"))
        v.pool_digests.push_back(
            ra::canonical_digest(ra::parse_tree(item.at("tree").get<std::string>())));
    if (!j.at("chosen").is_null())
        v.chosen = ra::canonical_digest(ra::parse_tree(j.at("chosen").get<std::string>()));
    return v;
}

inline std::vector<TraceView> read_traces(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<TraceView> out;
    std::string line;
    std::size_t record = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(trace_view_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(record, e.what());
        } catch (const Error& e) {
            throw ValidationError(record, e.what());
        }
        ++record;
    }
    return out;
}

}  // namespace smbop
