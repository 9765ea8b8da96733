#pragma once

#include <fstream>
#include <optional>

#include "smbop/model/decoder.hpp"

namespace smbop {

/// Gold supervision for one example: level-slice digests of the balanced
/// tree, the canonical digest of the query, the node count of the balanced
/// tree (the search-loss normalizer), and which DB constants are gold.
struct GoldInfo {
    std::vector<std::vector<Digest>> slices;
    Digest digest;
    int z_gold_size = 0;
    std::vector<int> gold_consts;
};

/// With t_train > gold height the gold sets extend past the root: the only
/// gold t-high tree beyond the height is the Keep-extended root, whose
/// canonical digest is the root's own. This keeps supervision defined for a
/// fixed decoding budget and teaches the model to keep the answer alive.
inline GoldInfo make_gold_info(const Example& ex, int t_train = 0) {
    GoldInfo g;
    g.slices = ra::level_slice_digests(ex.gold_balanced);
    g.digest = ra::canonical_digest(ex.gold_tree);
    while (static_cast<int>(g.slices.size()) <= t_train) g.slices.push_back({g.digest});
    g.z_gold_size = ex.gold_balanced->size();
    std::unordered_set<Digest, DigestHash> slice0(g.slices[0].begin(), g.slices[0].end());
    for (int c = 0; c < ex.schema->n_constants(); ++c) {
        ra::RaTree t = ex.schema->constant_is_table(c)
                           ? ra::leaf(ra::Leaf::table(ex.schema->constant_name(c), c))
                           : ra::leaf(ra::Leaf::column(ex.schema->constant_name(c),
                                                       ex.schema->column_of_constant(c)));
        if (slice0.count(ra::canonical_digest(t))) g.gold_consts.push_back(c);
    }
    return g;
}

struct LossParts {
    double total = 0.0;
    double search = 0.0;
    double rerank = 0.0;
    bool empty_gold_pool = false;
};

/// Maximum marginal likelihood over the gold-equivalent subset E:
/// -log sum_{m in E} softmax(scores)_m. Returns nullopt when E is empty.
inline std::optional<double> rerank_mml_loss(const nn::Vec& scores,
                                             const std::vector<bool>& in_e) {
    nn::Vec logp = nn::log_softmax(scores);
    double p = 0.0;
    bool any = false;
    for (std::size_t m = 0; m < scores.size(); ++m)
        if (in_e[m]) {
            p += std::exp(logp[m]);
            any = true;
        }
    if (!any) return std::nullopt;
    return -std::log(p);
}

/// Search loss: -(1/|z_gold|) sum over levels of the gold log-probabilities,
/// with the level-0 term coming from the constant-scorer softmax. Re-ranker
/// loss: maximum marginal likelihood of the gold-equivalent pool subset.
inline LossParts compute_losses(const DecodeResult& trace, const GoldInfo& gold,
                                const TrainConfig& tc, const DecoderConfig& cfg) {
    LossParts out;
    double gold_logp = 0.0;
    for (int c : gold.gold_consts)
        gold_logp += trace.const_log_probs[static_cast<std::size_t>(c)];
    for (const auto& step : trace.steps)
        for (const auto& e : step.frontier)
            if (e.gold) gold_logp += e.log_prob;
    out.search = -gold_logp / static_cast<double>(gold.z_gold_size);

    if (!cfg.no_reranker) {
        std::optional<double> mml;
        if (!trace.pool.empty()) {
            std::vector<bool> in_e(trace.pool.size(), false);
            for (std::size_t m = 0; m < trace.pool.size(); ++m) {
                const BeamItem& item =
                    trace.beams[static_cast<std::size_t>(trace.pool[m].first)]
                        .items[static_cast<std::size_t>(trace.pool[m].second)];
                in_e[m] = item.digest == gold.digest;
            }
            mml = rerank_mml_loss(trace.pool_scores, in_e);
        }
        if (mml) {
            out.rerank = *mml;
        } else {
            out.rerank = tc.empty_gold_penalty;
            out.empty_gold_pool = true;
        }
    }
    out.total = tc.search_weight * out.search + tc.rerank_weight * out.rerank;
    return out;
}

/// Backpropagates the teacher-forced losses through the whole decode trace
/// into `sink`: re-ranker, then each transition in reverse (represent cells,
/// frontier scores, beam Transformer), then the constant scorer and encoder.
inline void decode_backward(const Model& model, nn::GradStore& sink, const DecodeResult& trace,
                            const GoldInfo& gold, const TrainConfig& tc,
                            const DecoderConfig& cfg) {
    std::int64_t d = model.cfg.dim;
    int T = static_cast<int>(trace.steps.size());
    double search_scale = tc.search_weight / static_cast<double>(gold.z_gold_size);

    // gradient buffers per beam item
    std::vector<std::vector<nn::Vec>> dh(trace.beams.size()), dc(trace.beams.size());
    for (std::size_t t = 0; t < trace.beams.size(); ++t) {
        dh[t].assign(static_cast<std::size_t>(trace.beams[t].size()),
                     nn::Vec(static_cast<std::size_t>(d), 0.0));
        dc[t].assign(static_cast<std::size_t>(trace.beams[t].size()),
                     nn::Vec(static_cast<std::size_t>(d), 0.0));
    }
    nn::Tensor dx_enc({trace.enc.out.rows(), d});

    // --- re-ranker loss ------------------------------------------------------
    if (!cfg.no_reranker && trace.reranker_used && !trace.pool.empty()) {
        int M = static_cast<int>(trace.pool.size());
        nn::Vec logp = nn::log_softmax(trace.pool_scores);
        double p_gold = 0.0;
        std::vector<bool> in_e(static_cast<std::size_t>(M), false);
        for (int m = 0; m < M; ++m) {
            const BeamItem& item =
                trace.beams[static_cast<std::size_t>(trace.pool[static_cast<std::size_t>(m)].first)]
                    .items[static_cast<std::size_t>(trace.pool[static_cast<std::size_t>(m)].second)];
            in_e[static_cast<std::size_t>(m)] = item.digest == gold.digest;
            if (in_e[static_cast<std::size_t>(m)]) p_gold += std::exp(logp[static_cast<std::size_t>(m)]);
        }
        if (p_gold > 0.0) {
            nn::Vec dscore(static_cast<std::size_t>(M));
            for (int m = 0; m < M; ++m) {
                double pm = std::exp(logp[static_cast<std::size_t>(m)]);
                double member = in_e[static_cast<std::size_t>(m)] ? pm / p_gold : 0.0;
                dscore[static_cast<std::size_t>(m)] = tc.rerank_weight * (pm - member);
            }
            nn::Tensor dzbar({M, d});
            {
                nn::Tensor dzbar_local({M, d});
                nn::ffn_score_backward(dscore, trace.zbar, model.store.p("dec.rerank.W"),
                                       model.store.p("dec.rerank.w"), trace.rerank_ffn,
                                       dzbar_local, sink["dec.rerank.W"], sink["dec.rerank.w"]);
                dzbar = std::move(dzbar_local);
            }
            nn::Tensor dpool({M, d});
            if (cfg.no_rerank_cntx) {
                dpool = std::move(dzbar);
            } else {
                std::int64_t nx = trace.enc.n_tokens;
                nn::Tensor djoint_out({nx + M, d});
                for (int m = 0; m < M; ++m)
                    std::copy(dzbar.row(m), dzbar.row(m) + d, djoint_out.row(nx + m));
                nn::AttnParams p = model.attn_params("dec.rerank_tf.l0", false);
                nn::AttnGrads g = model.attn_grads("dec.rerank_tf.l0", false, sink);
                nn::Tensor djoint({nx + M, d});
                nn::attention_block_backward(djoint_out, p, g, model.cfg.heads, nullptr, 0,
                                             trace.rerank_tf, djoint);
                for (std::int64_t i = 0; i < nx; ++i)
                    nn::axpy_raw(1.0, djoint.row(i), dx_enc.row(i), d);
                for (int m = 0; m < M; ++m)
                    std::copy(djoint.row(nx + m), djoint.row(nx + m) + d, dpool.row(m));
            }
            for (int m = 0; m < M; ++m) {
                auto [t, idx] = trace.pool[static_cast<std::size_t>(m)];
                nn::axpy_raw(1.0, dpool.row(m),
                             dh[static_cast<std::size_t>(t)][static_cast<std::size_t>(idx)].data(),
                             d);
            }
        }
    }

    // --- transitions, last to first -------------------------------------------
    for (int t = T - 1; t >= 0; --t) {
        const StepCache& step = trace.steps[static_cast<std::size_t>(t)];
        const Beam& prev = trace.beams[static_cast<std::size_t>(t)];
        const Beam& next = trace.beams[static_cast<std::size_t>(t + 1)];
        int k = prev.size();
        nn::Tensor dzprime({k, d});

        // represent backward: beams[t+1] items consume beams[t] vectors
        for (int n = 0; n < next.size(); ++n) {
            const BeamItem& item = next.items[static_cast<std::size_t>(n)];
            const nn::Vec& dh_item = dh[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(n)];
            const nn::Vec& dc_item = dc[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(n)];
            auto route_h = [&](int child, const nn::Vec& grad) {
                if (cfg.cntx_rep)
                    nn::axpy_raw(1.0, grad.data(), dzprime.row(child), d);
                else
                    nn::axpy_raw(1.0, grad.data(),
                                 dh[static_cast<std::size_t>(t)][static_cast<std::size_t>(child)]
                                     .data(),
                                 d);
            };
            switch (item.src) {
                case BeamItem::Src::Keep: {
                    route_h(item.child_l, dh_item);
                    nn::axpy_raw(1.0, dc_item.data(),
                                 dc[static_cast<std::size_t>(t)]
                                   [static_cast<std::size_t>(item.child_l)]
                                       .data(),
                                 d);
                    break;
                }
                case BeamItem::Src::Unary: {
                    nn::Vec dembed(static_cast<std::size_t>(d), 0.0);
                    nn::Vec dh0(static_cast<std::size_t>(d), 0.0);
                    nn::lstm_backward(dh_item, dc_item, model.lstm_params(),
                                      model.lstm_grads(sink), item.lstm_cache, dembed, dh0);
                    nn::axpy_raw(1.0, dembed.data(),
                                 sink["dec.op_embed"].row(static_cast<int>(item.op)), d);
                    route_h(item.child_l, dh0);
                    break;
                }
                case BeamItem::Src::Binary: {
                    nn::Vec dembed(static_cast<std::size_t>(d), 0.0);
                    nn::Vec dhl(static_cast<std::size_t>(d), 0.0), dcl(static_cast<std::size_t>(d), 0.0);
                    nn::Vec dhr(static_cast<std::size_t>(d), 0.0), dcr(static_cast<std::size_t>(d), 0.0);
                    nn::tree_lstm_backward(dh_item, dc_item, model.tree_lstm_params(),
                                           model.tree_lstm_grads(sink), item.tree_cache, dembed,
                                           dhl, dcl, dhr, dcr);
                    nn::axpy_raw(1.0, dembed.data(),
                                 sink["dec.op_embed"].row(static_cast<int>(item.op)), d);
                    route_h(item.child_l, dhl);
                    route_h(item.child_r, dhr);
                    nn::axpy_raw(1.0, dcl.data(),
                                 dc[static_cast<std::size_t>(t)]
                                   [static_cast<std::size_t>(item.child_l)]
                                       .data(),
                                 d);
                    nn::axpy_raw(1.0, dcr.data(),
                                 dc[static_cast<std::size_t>(t)]
                                   [static_cast<std::size_t>(item.child_r)]
                                       .data(),
                                 d);
                    break;
                }
                default: throw Error("leaf item above level 0");
            }
        }

        // frontier score backward: softmax over the deduplicated frontier
        if (step.gold_count > 0) {
            std::array<nn::Vec, ra::kNumUnaryOps> du;
            for (auto& v : du) v.assign(static_cast<std::size_t>(k), 0.0);
            std::array<nn::Tensor, ra::kNumBinaryOps> db;
            std::array<bool, ra::kNumBinaryOps> db_used{};
            for (const auto& e : step.frontier) {
                double pe = std::exp(e.log_prob);
                double ds = search_scale *
                            (static_cast<double>(step.gold_count) * pe - (e.gold ? 1.0 : 0.0));
                if (ds == 0.0) continue;
                int op_idx = static_cast<int>(e.op);
                if (e.j < 0) {
                    du[static_cast<std::size_t>(op_idx)][static_cast<std::size_t>(e.i)] += ds;
                } else {
                    int b = op_idx - ra::kFirstBinaryOp;
                    if (!db_used[static_cast<std::size_t>(b)]) {
                        db[static_cast<std::size_t>(b)] = nn::Tensor({k, k});
                        db_used[static_cast<std::size_t>(b)] = true;
                    }
                    db[static_cast<std::size_t>(b)].at(e.i, e.j) += ds;
                }
            }
            for (int u = 0; u < ra::kNumUnaryOps; ++u) {
                auto op = static_cast<ra::RaOpId>(u);
                const nn::Tensor& w = model.unary_w(op);
                nn::Tensor& dw = sink["dec.unary.w." + std::string(ra::op_info(op).name)];
                for (int i = 0; i < k; ++i) {
                    double g = du[static_cast<std::size_t>(u)][static_cast<std::size_t>(i)];
                    if (g == 0.0) continue;
                    nn::axpy_raw(g, step.zprime.row(i), dw.row(0), d);
                    nn::axpy_raw(g, w.row(0), dzprime.row(i), d);
                }
            }
            for (int b = 0; b < ra::kNumBinaryOps; ++b) {
                if (!db_used[static_cast<std::size_t>(b)]) continue;
                auto op = static_cast<ra::RaOpId>(ra::kFirstBinaryOp + b);
                nn::Tensor& dw = sink["dec.binary.W." + std::string(ra::op_info(op).name)];
                nn::bilinear_backward(db[static_cast<std::size_t>(b)], step.zprime,
                                      model.binary_w(op), step.zprime, dzprime, dw, dzprime);
            }
        }

        // beam transformer backward (or identity when contextualization is off)
        if (cfg.no_beam_cntx) {
            for (int i = 0; i < k; ++i)
                nn::axpy_raw(1.0, dzprime.row(i),
                             dh[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)].data(),
                             d);
        } else {
            std::int64_t nx = trace.enc.n_tokens;
            nn::Tensor dout({nx + k, d});
            for (int i = 0; i < k; ++i)
                std::copy(dzprime.row(i), dzprime.row(i) + d, dout.row(nx + i));
            for (int l = model.cfg.beam_layers - 1; l >= 0; --l) {
                nn::AttnParams p = model.attn_params("dec.beam_tf.l" + std::to_string(l), false);
                nn::AttnGrads g = model.attn_grads("dec.beam_tf.l" + std::to_string(l), false, sink);
                nn::Tensor din({nx + k, d});
                nn::attention_block_backward(dout, p, g, model.cfg.heads, nullptr, 0,
                                             step.tf[static_cast<std::size_t>(l)], din);
                dout = std::move(din);
            }
            for (std::int64_t i = 0; i < nx; ++i) nn::axpy_raw(1.0, dout.row(i), dx_enc.row(i), d);
            for (int i = 0; i < k; ++i)
                nn::axpy_raw(1.0, dout.row(nx + i),
                             dh[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)].data(),
                             d);
        }
    }

    // --- level-0 items back to their sources ----------------------------------
    const Beam& z0 = trace.beams[0];
    for (int i = 0; i < z0.size(); ++i) {
        const BeamItem& item = z0.items[static_cast<std::size_t>(i)];
        const nn::Vec& grad = dh[0][static_cast<std::size_t>(i)];
        switch (item.src) {
            case BeamItem::Src::Constant:
                nn::axpy_raw(1.0, grad.data(), dx_enc.row(trace.enc.n_tokens + item.const_index),
                             d);
                break;
            case BeamItem::Src::ValuePin:
                nn::axpy_raw(1.0, grad.data(), sink["enc.value_embed"].row(0), d);
                break;
            case BeamItem::Src::StarPin:
                nn::axpy_raw(1.0, grad.data(), sink["enc.star_embed"].row(0), d);
                break;
            default: throw Error("non-leaf item at level 0");
        }
    }

    // --- constant scorer (the t = 0 search-loss term) -------------------------
    {
        int nc = static_cast<int>(trace.const_scores.size());
        int g0 = static_cast<int>(gold.gold_consts.size());
        std::vector<bool> is_gold(static_cast<std::size_t>(nc), false);
        for (int c : gold.gold_consts) is_gold[static_cast<std::size_t>(c)] = true;
        nn::Vec dscore(static_cast<std::size_t>(nc), 0.0);
        for (int c = 0; c < nc; ++c) {
            double pc = std::exp(trace.const_log_probs[static_cast<std::size_t>(c)]);
            dscore[static_cast<std::size_t>(c)] =
                search_scale * (static_cast<double>(g0) * pc -
                                (is_gold[static_cast<std::size_t>(c)] ? 1.0 : 0.0));
        }
        nn::Tensor s_vecs({nc, d});
        for (int c = 0; c < nc; ++c)
            std::copy(trace.enc.out.row(trace.enc.n_tokens + c),
                      trace.enc.out.row(trace.enc.n_tokens + c) + d, s_vecs.row(c));
        nn::Tensor ds({nc, d});
        nn::ffn_score_backward(dscore, s_vecs, model.store.p("dec.const.W"),
                               model.store.p("dec.const.w"), trace.const_ffn, ds,
                               sink["dec.const.W"], sink["dec.const.w"]);
        for (int c = 0; c < nc; ++c)
            nn::axpy_raw(1.0, ds.row(c), dx_enc.row(trace.enc.n_tokens + c), d);
    }

    encode_backward(model, sink, trace.enc, dx_enc);
}

}  // namespace smbop
