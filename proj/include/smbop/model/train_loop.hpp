#pragma once

#include <cstdio>

#include "smbop/eval/metrics.hpp"
#include "smbop/model/training.hpp"

namespace smbop {

struct TrainMetricsRow {
    int step = 0;
    double train_loss = 0.0;
    double search_loss = 0.0;
    double rerank_loss = 0.0;
    double dev_em = -1.0;  // -1 means not evaluated this round
    double dev_bem = -1.0;
};

struct TrainOutcome {
    std::vector<TrainMetricsRow> rows;
    int steps_run = 0;
    double best_dev_em = -1.0;
    bool early_stopped = false;
};

/// EM / BEM of free decoding over a dataset. Examples decode in parallel;
/// aggregation runs in index order, so the result is thread-count independent.
inline std::pair<double, double> evaluate_em(const Model& model,
                                             const std::vector<Example>& dataset,
                                             const DecoderConfig& cfg, int threads) {
    std::vector<char> em(dataset.size(), 0), bem(dataset.size(), 0);
    parallel_for(dataset.size(), threads, [&](std::size_t i) {
        DecodeOptions opt;
        opt.cfg = cfg;
        DecodeResult r = decode(model, dataset[i], opt);
        TraceView v = trace_view(r);
        Digest gold = ra::canonical_digest(dataset[i].gold_tree);
        em[i] = eval::exact_match(v, gold) ? 1 : 0;
        bem[i] = eval::beam_em(v, gold) ? 1 : 0;
    });
    double em_sum = 0.0, bem_sum = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        em_sum += em[i];
        bem_sum += bem[i];
    }
    double n = static_cast<double>(dataset.size());
    return {em_sum / n, bem_sum / n};
}

inline std::string format_metrics_row(const TrainMetricsRow& r) {
    char buf[256];
    auto num = [](double v) {
        char b[64];
        std::snprintf(b, sizeof(b), "%.17g", v);
        return std::string(b);
    };
    std::string dev_em = r.dev_em < 0 ? "" : num(r.dev_em);
    std::string dev_bem = r.dev_bem < 0 ? "" : num(r.dev_bem);
    std::snprintf(buf, sizeof(buf), "%d,%s,%s,%s,%s,%s", r.step, num(r.train_loss).c_str(),
                  num(r.search_loss).c_str(), num(r.rerank_loss).c_str(), dev_em.c_str(),
                  dev_bem.c_str());
    return buf;
}

/// Teacher-forced training: per example, decode for exactly the gold height
/// with all gold subtrees forced onto the beam, take the joint search +
/// re-ranker loss, and Adam-update on the batch mean. Per-example gradients
/// land in private buffers and reduce in example order, so runs are
/// byte-identical for any thread count. Early stopping watches dev EM.
inline TrainOutcome train(Model& model, const std::vector<Example>& train_set,
                          const std::vector<Example>* dev_set, const TrainConfig& tc,
                          const DecoderConfig& decoder_cfg, int threads,
                          const std::string& metrics_path = "",
                          const std::function<bool(const TrainMetricsRow&)>& on_eval = nullptr) {
    tc.validate();
    if (train_set.empty()) throw Error("empty training set");

    std::vector<GoldInfo> gold;
    gold.reserve(train_set.size());
    for (const auto& ex : train_set) gold.push_back(make_gold_info(ex, tc.t_train));

    DecoderConfig train_cfg = decoder_cfg;
    train_cfg.beam_size = tc.k_train;

    Rng rng(tc.seed);
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();

    std::vector<nn::GradStore> buffers;
    for (int b = 0; b < tc.batch_size; ++b) buffers.push_back(nn::GradStore::like(model.store));

    std::ofstream csv;
    if (!metrics_path.empty()) {
        csv.open(metrics_path);
        if (!csv) throw Error("cannot write " + metrics_path);
        csv << "step,train_loss,search_loss,rerank_loss,dev_em,dev_bem\n";
    }

    TrainOutcome out;
    double acc_total = 0.0, acc_search = 0.0, acc_rerank = 0.0;
    int acc_n = 0;
    int since_best = 0;

    for (int step = 1; step <= tc.max_steps; ++step) {
        std::vector<std::size_t> batch;
        batch.reserve(static_cast<std::size_t>(tc.batch_size));
        for (int b = 0; b < tc.batch_size; ++b) {
            if (cursor >= order.size()) {
                rng.shuffle(order);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }

        std::vector<LossParts> losses(batch.size());
        parallel_for(batch.size(), threads, [&](std::size_t b) {
            buffers[b].zero();
            const Example& ex = train_set[batch[b]];
            const GoldInfo& gi = gold[batch[b]];
            DecodeOptions opt;
            opt.cfg = train_cfg;
            opt.gold = &gi.slices;
            DecodeResult trace = decode(model, ex, opt);
            losses[b] = compute_losses(trace, gi, tc, train_cfg);
            decode_backward(model, buffers[b], trace, gi, tc, train_cfg);
        });

        model.store.zero_grads();
        double scale = 1.0 / static_cast<double>(batch.size());
        double total = 0.0, search = 0.0, rerank = 0.0;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            model.store.add_scaled_grads(buffers[b].grads, scale);
            total += losses[b].total * scale;
            search += losses[b].search * scale;
            rerank += losses[b].rerank * scale;
        }
        if (!std::isfinite(total))
            throw Error("non-finite loss at step " + std::to_string(step) +
                        " (search=" + std::to_string(search) + ", rerank=" + std::to_string(rerank) +
                        ")");
        model.store.adam_step(tc.lr);
        out.steps_run = step;

        acc_total += total;
        acc_search += search;
        acc_rerank += rerank;
        ++acc_n;

        if (step % tc.eval_interval == 0 || step == tc.max_steps) {
            TrainMetricsRow row;
            row.step = step;
            row.train_loss = acc_total / acc_n;
            row.search_loss = acc_search / acc_n;
            row.rerank_loss = acc_rerank / acc_n;
            acc_total = acc_search = acc_rerank = 0.0;
            acc_n = 0;
            if (dev_set && !dev_set->empty()) {
                auto [em, bem] = evaluate_em(model, *dev_set, decoder_cfg, threads);
                row.dev_em = em;
                row.dev_bem = bem;
                if (em > out.best_dev_em) {
                    out.best_dev_em = em;
                    since_best = 0;
                } else if (++since_best >= tc.patience) {
                    out.early_stopped = true;
                }
            }
            out.rows.push_back(row);
            if (csv.is_open()) csv << format_metrics_row(row) << "\n";
            bool stop_requested = on_eval && !on_eval(row);
            if (out.early_stopped || stop_requested) break;
        }
    }
    return out;
}

}  // namespace smbop
