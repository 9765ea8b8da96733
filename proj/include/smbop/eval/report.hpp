#pragma once

#include <filesystem>
#include <map>

#include "smbop/eval/metrics.hpp"
#include "smbop/schema/dataset.hpp"

namespace smbop::eval {

struct ExampleRecord {
    bool em = false;
    bool bem = false;
    int failure_step = -1;  // -1: search found the gold tree
    int gold_height = 0;
    int gold_size_unbalanced = 0;
    int gold_size_balanced = 0;
    std::vector<int> z_recall;  // per step t <= gold height, 0/1
};

/// Aggregated evaluation results plus the per-example records they were
/// computed from.
struct EvalReport {
    std::vector<ExampleRecord> records;
    double em = 0.0;
    double bem = 0.0;
    double z0_recall = 0.0;
    // height -> (count, em hits, bem hits)
    std::map<int, std::array<int, 3>> by_height;
    // step -> (examples with gold height >= step, recall hits)
    std::map<int, std::array<int, 2>> recall_by_step;
    // failure step -> count over BEM failures
    std::map<int, int> failure_hist;
};

inline EvalReport evaluate(const std::vector<TraceView>& traces,
                           const std::vector<Example>& golds) {
    if (traces.size() != golds.size())
        throw Error("trace / dataset size mismatch: " + std::to_string(traces.size()) + " vs " +
                    std::to_string(golds.size()));
    EvalReport report;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const TraceView& trace = traces[i];
        const Example& ex = golds[i];
        auto slices = ra::level_slice_digests(ex.gold_balanced);
        Digest gold_digest = ra::canonical_digest(ex.gold_tree);

        ExampleRecord rec;
        rec.gold_height = ex.gold_balanced->height();
        rec.gold_size_unbalanced = ex.gold_tree->size();
        rec.gold_size_balanced = ex.gold_balanced->size();
        rec.em = exact_match(trace, gold_digest);
        rec.bem = beam_em(trace, gold_digest);
        for (int t = 0; t < static_cast<int>(slices.size()); ++t)
            rec.z_recall.push_back(z_recall(trace, slices, t) ? 1 : 0);
        rec.failure_step = failure_step(trace, slices, gold_digest);
        report.records.push_back(std::move(rec));
    }

    double n = static_cast<double>(report.records.size());
    for (const auto& rec : report.records) {
        report.em += rec.em ? 1 : 0;
        report.bem += rec.bem ? 1 : 0;
        report.z0_recall += rec.z_recall.empty() ? 0 : rec.z_recall[0];
        auto& h = report.by_height[rec.gold_height];
        h[0] += 1;
        h[1] += rec.em ? 1 : 0;
        h[2] += rec.bem ? 1 : 0;
        for (int t = 0; t < static_cast<int>(rec.z_recall.size()); ++t) {
            auto& r = report.recall_by_step[t];
            r[0] += 1;
            r[1] += rec.z_recall[static_cast<std::size_t>(t)];
        }
        if (rec.failure_step >= 0) report.failure_hist[rec.failure_step] += 1;
    }
    if (n > 0) {
        report.em /= n;
        report.bem /= n;
        report.z0_recall /= n;
    }
    return report;
}

/// Writes the analysis tables: em_by_height.csv, z_recall_by_step.csv,
/// failure_steps.csv (raw per-example pairs), tree_stats.csv, summary.json.
inline EvalReport analysis_report(const std::vector<TraceView>& traces,
                                  const std::vector<Example>& golds,
                                  const std::string& out_dir) {
    EvalReport report = evaluate(traces, golds);
    std::filesystem::create_directories(out_dir);
    auto open = [&](const std::string& name) {
        std::ofstream out(out_dir + "/" + name);
        if (!out) throw Error("cannot write " + out_dir + "/" + name);
        return out;
    };
    {
        auto out = open("em_by_height.csv");
        out << "gold_height,n,em,bem\n";
        for (const auto& [h, v] : report.by_height)
            out << h << "," << v[0] << "," << static_cast<double>(v[1]) / v[0] << ","
                << static_cast<double>(v[2]) / v[0] << "\n";
    }
    {
        auto out = open("z_recall_by_step.csv");
        out << "step,n,recall\n";
        for (const auto& [t, v] : report.recall_by_step)
            out << t << "," << v[0] << "," << static_cast<double>(v[1]) / v[0] << "\n";
    }
    {
        // raw (failure step, gold height) pairs; binning is the plot's job
        auto out = open("failure_steps.csv");
        out << "example,failure_step,gold_height\n";
        for (std::size_t i = 0; i < report.records.size(); ++i)
            if (report.records[i].failure_step >= 0)
                out << i << "," << report.records[i].failure_step << ","
                    << report.records[i].gold_height << "\n";
    }
    {
        auto out = open("tree_stats.csv");
        out << "example,gold_height,size_unbalanced,size_balanced,em,bem\n";
        for (std::size_t i = 0; i < report.records.size(); ++i) {
            const auto& r = report.records[i];
            out << i << "," << r.gold_height << "," << r.gold_size_unbalanced << ","
                << r.gold_size_balanced << "," << (r.em ? 1 : 0) << "," << (r.bem ? 1 : 0)
                << "\n";
        }
    }
    {
        auto out = open("summary.json");
        nlohmann::json failure = nlohmann::json::object();
        for (const auto& [step, count] : report.failure_hist)
            failure[std::to_string(step)] = count;
        nlohmann::json j = {{"n", report.records.size()},
                            {"em", report.em},
                            {"bem", report.bem},
                            {"z0_recall", report.z0_recall},
                            {"failure_steps", failure}};
        out << j.dump(2) << "\n";
    }
    return report;
}

}  // namespace smbop::eval
