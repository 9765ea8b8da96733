#pragma once

#include <array>
#include <unordered_map>

#include "smbop/model/encoder.hpp"
#include "smbop/ra/transform.hpp"

namespace smbop {

/// One tree on the beam: symbolic tree, recursive representation (hidden +
/// cell), its creation-step log-probability, and the canonical identity.
/// Provenance fields record how the item was built so training can walk the
/// computation backwards.
struct BeamItem {
    enum class Src : std::uint8_t { Constant, ValuePin, StarPin, Keep, Unary, Binary };

    ra::RaTree tree;
    nn::Vec h, c;
    double step_score = 0.0;
    Digest digest;
    std::string canon;

    Src src = Src::Constant;
    int const_index = -1;          // Src::Constant
    int child_l = -1, child_r = -1;  // beam indices one step earlier
    ra::RaOpId op = ra::RaOpId::Keep;
    nn::LstmCache lstm_cache;
    nn::TreeLstmCache tree_cache;
};

struct Beam {
    std::vector<BeamItem> items;
    int size() const { return static_cast<int>(items.size()); }
};

/// One type-valid application of a grammar op to beam items, after frontier
/// deduplication (the best-scoring derivation of each distinct digest).
struct FrontierEntry {
    ra::RaOpId op = ra::RaOpId::Keep;
    int i = -1;
    int j = -1;  // -1 for unary
    double score = 0.0;
    double log_prob = 0.0;
    Digest digest;
    std::string canon;
    ra::SemanticType out_type = ra::SemanticType::Any;
    bool gold = false;
};

/// Caches for one decoding transition t -> t+1.
struct StepCache {
    nn::Tensor zstack;  // [k, d] item representations
    nn::Tensor joint;   // [tokens + k, d] beam-Transformer input
    std::vector<nn::AttnCache> tf;
    nn::Tensor zprime;  // [k, d] contextualized representations
    std::array<nn::Vec, ra::kNumUnaryOps> unary_scores;
    std::array<nn::Tensor, ra::kNumBinaryOps> binary_scores;
    std::vector<FrontierEntry> frontier;
    std::vector<int> selected;  // frontier indices, in new-beam order
    int raw_count = 0;
    int gold_count = 0;
};

/// Per-example scoring overrides used by oracle experiments: when set, these
/// replace the learned scorers while the rest of the search is unchanged.
struct OracleScorer {
    std::function<double(int constant)> constant_score;
    std::function<double(int level, const Digest&)> frontier_score;
    std::function<double(const Digest&)> rerank_score;
};

struct DecodeResult {
    EncoderCache enc;

    nn::Vec const_scores;      // f_const over all DB constants
    nn::Vec const_log_probs;   // log softmax of const_scores
    nn::FfnScoreCache const_ffn;

    std::vector<Beam> beams;       // Z_0 .. Z_T
    std::vector<StepCache> steps;  // T transitions
    std::vector<int> frontier_sizes;

    std::vector<std::pair<int, int>> pool;  // (step, item) of distinct returnable trees
    nn::Tensor pool_vecs;                   // [M, d]
    nn::Tensor rerank_joint;                // [tokens + M, d]
    nn::AttnCache rerank_tf;
    nn::Tensor zbar;  // [M, d]
    nn::FfnScoreCache rerank_ffn;
    nn::Vec pool_scores;
    bool reranker_used = false;

    int chosen = -1;  // pool index; -1 means no returnable tree was found
    ra::RaTree chosen_tree() const {
        return chosen < 0 ? nullptr
                          : beams[static_cast<std::size_t>(pool[static_cast<std::size_t>(chosen)]
                                                               .first)]
                                .items[static_cast<std::size_t>(
                                    pool[static_cast<std::size_t>(chosen)].second)]
                                .tree;
    }
};

struct DecodeOptions {
    DecoderConfig cfg;
    const OracleScorer* oracle = nullptr;
    // teacher forcing: gold level-slice digests; fixes T to the gold height
    // and forces every gold tree into its beam
    const std::vector<std::vector<Digest>>* gold = nullptr;
};

namespace detail_dec {

inline bool rank_before(double score_a, const Digest& da, double score_b, const Digest& db) {
    if (score_a != score_b) return score_a > score_b;
    return da < db;
}

inline std::string leaf_canon(const ra::RaTree& t) { return ra::canonical_serialization(t); }

}  // namespace detail_dec

inline bool valid_unary(ra::RaOpId op, ra::SemanticType t) {
    return ra::accepts(ra::op_info(op).in1, t);
}

inline bool valid_binary(ra::RaOpId op, ra::SemanticType tl, ra::SemanticType tr) {
    const ra::RaOp& info = ra::op_info(op);
    return ra::accepts(info.in1, tl) && ra::accepts(info.in2, tr);
}

/// Number of type-valid one-op applications over items with the given output
/// types: all unary ops per item plus all binary ops per ordered pair. This is
/// exactly what score_frontier enumerates; the K|U| + K^2|B| bound follows.
inline int frontier_count(const std::vector<ra::SemanticType>& types) {
    int count = 0;
    for (int u = 0; u < ra::kNumUnaryOps; ++u)
        for (auto t : types)
            if (valid_unary(static_cast<ra::RaOpId>(u), t)) ++count;
    for (int b = ra::kFirstBinaryOp; b < ra::kNumOps; ++b)
        for (auto tl : types)
            for (auto tr : types)
                if (valid_binary(static_cast<ra::RaOpId>(b), tl, tr)) ++count;
    return count;
}

/// Scores every DB constant independently with f_const and keeps the top K by
/// (score desc, digest asc); the value and star leaves are pinned beyond the
/// K budget with score 0.
inline Beam init_beam(const Model& model, const Example& ex, const EncoderCache& enc, int K,
                      const OracleScorer* oracle, DecodeResult& result) {
    const Schema& schema = *ex.schema;
    int n_consts = schema.n_constants();
    std::int64_t d = model.cfg.dim;

    nn::Tensor s_vecs({n_consts, d});
    for (int c = 0; c < n_consts; ++c)
        std::copy(enc.out.row(enc.n_tokens + c), enc.out.row(enc.n_tokens + c) + d,
                  s_vecs.row(c));
    result.const_scores =
        nn::ffn_score(s_vecs, model.store.p("dec.const.W"), model.store.p("dec.const.w"),
                      result.const_ffn);
    if (oracle && oracle->constant_score)
        for (int c = 0; c < n_consts; ++c)
            result.const_scores[static_cast<std::size_t>(c)] = oracle->constant_score(c);
    result.const_log_probs = nn::log_softmax(result.const_scores);

    std::vector<BeamItem> items;
    for (int c = 0; c < n_consts; ++c) {
        BeamItem item;
        item.src = BeamItem::Src::Constant;
        item.const_index = c;
        item.tree = schema.constant_is_table(c)
                        ? ra::leaf(ra::Leaf::table(schema.constant_name(c), c))
                        : ra::leaf(ra::Leaf::column(schema.constant_name(c),
                                                    schema.column_of_constant(c)));
        item.canon = detail_dec::leaf_canon(item.tree);
        item.digest = fnv128(item.canon);
        item.h.assign(enc.out.row(enc.n_tokens + c), enc.out.row(enc.n_tokens + c) + d);
        item.c.assign(static_cast<std::size_t>(d), 0.0);
        item.step_score = result.const_log_probs[static_cast<std::size_t>(c)];
        items.push_back(std::move(item));
    }
    std::sort(items.begin(), items.end(), [](const BeamItem& a, const BeamItem& b) {
        return detail_dec::rank_before(a.step_score, a.digest, b.step_score, b.digest);
    });
    if (static_cast<int>(items.size()) > K) items.resize(static_cast<std::size_t>(K));

    auto pin = [&](BeamItem::Src src, const ra::RaTree& tree, const nn::Tensor& embed) {
        BeamItem item;
        item.src = src;
        item.tree = tree;
        item.canon = detail_dec::leaf_canon(tree);
        item.digest = fnv128(item.canon);
        item.h.assign(embed.row(0), embed.row(0) + d);
        item.c.assign(static_cast<std::size_t>(d), 0.0);
        item.step_score = 0.0;
        items.push_back(std::move(item));
    };
    pin(BeamItem::Src::ValuePin, ra::leaf(ra::Leaf::value()), model.store.p("enc.value_embed"));
    pin(BeamItem::Src::StarPin, ra::leaf(ra::Leaf::star()), model.store.p("enc.star_embed"));

    std::sort(items.begin(), items.end(), [](const BeamItem& a, const BeamItem& b) {
        return detail_dec::rank_before(a.step_score, a.digest, b.step_score, b.digest);
    });
    Beam beam;
    beam.items = std::move(items);
    return beam;
}

/// Beam contextualization: one joint pass of the beam Transformer over
/// [utterance ; tree representations]. Under no_beam_cntx the representations
/// pass through unchanged.
inline void contextualize_beam(const Model& model, const EncoderCache& enc, const Beam& beam,
                               const DecoderConfig& cfg, StepCache& step) {
    int k = beam.size();
    std::int64_t d = model.cfg.dim;
    step.zstack = nn::Tensor({k, d});
    for (int i = 0; i < k; ++i)
        std::copy(beam.items[static_cast<std::size_t>(i)].h.begin(),
                  beam.items[static_cast<std::size_t>(i)].h.end(), step.zstack.row(i));
    if (cfg.no_beam_cntx) {
        step.zprime = step.zstack;
        return;
    }
    std::int64_t nx = enc.n_tokens;
    step.joint = nn::Tensor({nx + k, d});
    for (std::int64_t i = 0; i < nx; ++i)
        std::copy(enc.out.row(i), enc.out.row(i) + d, step.joint.row(i));
    for (int i = 0; i < k; ++i)
        std::copy(step.zstack.row(i), step.zstack.row(i) + d, step.joint.row(nx + i));

    nn::Tensor h = step.joint;
    step.tf.resize(static_cast<std::size_t>(model.cfg.beam_layers));
    for (int l = 0; l < model.cfg.beam_layers; ++l) {
        nn::AttnParams p = model.attn_params("dec.beam_tf.l" + std::to_string(l), false);
        h = nn::attention_block(h, p, model.cfg.heads, nullptr, 0,
                                step.tf[static_cast<std::size_t>(l)]);
    }
    step.zprime = nn::Tensor({k, d});
    for (int i = 0; i < k; ++i)
        std::copy(h.row(nx + i), h.row(nx + i) + d, step.zprime.row(i));
}

/// Enumerates all type-valid one-op extensions of the beam and scores them:
/// w_u . z'_i for unary ops, z'_i W_b z'_j over ordered pairs for binary ops.
/// Returns the deduplicated frontier (per digest, the best-scoring derivation
/// with ties broken by (op, i, j)); raw_count counts enumerated applications.
inline void score_frontier(const Model& model, const Beam& beam, StepCache& step, int level,
                           const OracleScorer* oracle,
                           const std::vector<std::vector<Digest>>* gold) {
    int k = beam.size();
    for (int u = 0; u < ra::kNumUnaryOps; ++u) {
        const nn::Tensor& w = model.unary_w(static_cast<ra::RaOpId>(u));
        auto& scores = step.unary_scores[static_cast<std::size_t>(u)];
        scores.assign(static_cast<std::size_t>(k), 0.0);
        for (int i = 0; i < k; ++i)
            scores[static_cast<std::size_t>(i)] =
                nn::dot(step.zprime.row(i), w.row(0), static_cast<std::size_t>(model.cfg.dim));
    }
    for (int b = 0; b < ra::kNumBinaryOps; ++b) {
        const nn::Tensor& w = model.binary_w(static_cast<ra::RaOpId>(ra::kFirstBinaryOp + b));
        step.binary_scores[static_cast<std::size_t>(b)] =
            nn::bilinear_scores(step.zprime, w, step.zprime);
    }

    const std::unordered_set<Digest, DigestHash>* gold_set = nullptr;
    std::unordered_set<Digest, DigestHash> gold_digests;
    if (gold && level + 1 < static_cast<int>(gold->size())) {
        for (const auto& dg : (*gold)[static_cast<std::size_t>(level + 1)]) gold_digests.insert(dg);
        gold_set = &gold_digests;
    } else if (gold) {
        gold_set = &gold_digests;  // empty: past the gold height
    }

    step.frontier.clear();
    step.raw_count = 0;
    std::unordered_map<Digest, std::size_t, DigestHash> dedup;

    auto consider = [&](ra::RaOpId op, int i, int j, double score, std::string canon,
                        ra::SemanticType out_type) {
        ++step.raw_count;
        Digest digest = fnv128(canon);
        if (oracle && oracle->frontier_score) score = oracle->frontier_score(level + 1, digest);
        auto it = dedup.find(digest);
        if (it == dedup.end()) {
            FrontierEntry e;
            e.op = op;
            e.i = i;
            e.j = j;
            e.score = score;
            e.digest = digest;
            e.canon = std::move(canon);
            e.out_type = out_type;
            e.gold = gold_set && gold_set->count(digest) > 0;
            dedup.emplace(digest, step.frontier.size());
            step.frontier.push_back(std::move(e));
            return;
        }
        FrontierEntry& old = step.frontier[it->second];
        bool better = score > old.score ||
                      (score == old.score &&
                       std::make_tuple(static_cast<int>(op), i, j) <
                           std::make_tuple(static_cast<int>(old.op), old.i, old.j));
        if (better) {
            old.op = op;
            old.i = i;
            old.j = j;
            old.score = score;
        }
    };

    for (int u = 0; u < ra::kNumUnaryOps; ++u) {
        auto op = static_cast<ra::RaOpId>(u);
        const ra::RaOp& info = ra::op_info(op);
        for (int i = 0; i < k; ++i) {
            const BeamItem& item = beam.items[static_cast<std::size_t>(i)];
            if (!valid_unary(op, item.tree->out_type())) continue;
            double score = step.unary_scores[static_cast<std::size_t>(u)][static_cast<std::size_t>(i)];
            if (op == ra::RaOpId::Keep) {
                consider(op, i, -1, score, item.canon, item.tree->out_type());
            } else {
                std::string canon = "(" + std::string(info.name) + " " + item.canon + ")";
                consider(op, i, -1, score, std::move(canon), info.out);
            }
        }
    }
    for (int b = 0; b < ra::kNumBinaryOps; ++b) {
        auto op = static_cast<ra::RaOpId>(ra::kFirstBinaryOp + b);
        const ra::RaOp& info = ra::op_info(op);
        const nn::Tensor& scores = step.binary_scores[static_cast<std::size_t>(b)];
        for (int i = 0; i < k; ++i) {
            const BeamItem& left = beam.items[static_cast<std::size_t>(i)];
            if (!ra::accepts(info.in1, left.tree->out_type())) continue;
            for (int j = 0; j < k; ++j) {
                const BeamItem& right = beam.items[static_cast<std::size_t>(j)];
                if (!valid_binary(op, left.tree->out_type(), right.tree->out_type())) continue;
                const std::string* ca = &left.canon;
                const std::string* cb = &right.canon;
                if (info.commutative && *cb < *ca) std::swap(ca, cb);
                std::string canon = "(" + std::string(info.name) + " " + *ca + " " + *cb + ")";
                consider(op, i, j, scores.at(i, j), std::move(canon), info.out);
            }
        }
    }

    if (step.frontier.empty()) throw EmptyFrontier("no valid applications over the beam");

    // softmax over the deduplicated frontier
    nn::Vec raw;
    raw.reserve(step.frontier.size());
    for (const auto& e : step.frontier) raw.push_back(e.score);
    nn::Vec logp = nn::log_softmax(raw);
    step.gold_count = 0;
    for (std::size_t i = 0; i < step.frontier.size(); ++i) {
        step.frontier[i].log_prob = logp[i];
        step.gold_count += step.frontier[i].gold ? 1 : 0;
    }
}

/// Top-K selection over the deduplicated frontier by (score desc, digest
/// asc). With teacher forcing the gold entries come first (the beam grows
/// beyond K when gold outnumbers it) and the rest fill up with the
/// top-scoring non-gold entries.
inline void select_entries(StepCache& step, int K, bool teacher, int expected_gold) {
    std::vector<int> order(step.frontier.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const FrontierEntry& ea = step.frontier[static_cast<std::size_t>(a)];
        const FrontierEntry& eb = step.frontier[static_cast<std::size_t>(b)];
        return detail_dec::rank_before(ea.score, ea.digest, eb.score, eb.digest);
    });
    step.selected.clear();
    if (!teacher) {
        for (int idx : order) {
            if (static_cast<int>(step.selected.size()) >= K) break;
            step.selected.push_back(idx);
        }
        return;
    }
    for (int idx : order)
        if (step.frontier[static_cast<std::size_t>(idx)].gold) step.selected.push_back(idx);
    if (static_cast<int>(step.selected.size()) != expected_gold)
        throw GoldNotInFrontier("expected " + std::to_string(expected_gold) + " gold trees, found " +
                                std::to_string(step.selected.size()));
    int cap = std::max(K, static_cast<int>(step.selected.size()));
    for (int idx : order) {
        if (static_cast<int>(step.selected.size()) >= cap) break;
        if (!step.frontier[static_cast<std::size_t>(idx)].gold) step.selected.push_back(idx);
    }
}

/// Builds the next beam from the selected frontier entries. Keep copies the
/// child representation verbatim; other unary ops run the LSTM cell and
/// binary ops the TreeLSTM cell, with non-contextualized child vectors unless
/// the cntx_rep ablation feeds contextualized ones.
inline Beam represent_new_beam(const Model& model, const Beam& prev, StepCache& step,
                               const DecoderConfig& cfg) {
    Beam next;
    std::int64_t d = model.cfg.dim;
    const nn::Tensor& op_embed = model.store.p("dec.op_embed");
    for (int idx : step.selected) {
        const FrontierEntry& e = step.frontier[static_cast<std::size_t>(idx)];
        const BeamItem& left = prev.items[static_cast<std::size_t>(e.i)];
        BeamItem item;
        item.digest = e.digest;
        item.canon = e.canon;
        item.step_score = e.log_prob;
        item.op = e.op;
        item.child_l = e.i;
        item.child_r = e.j;
        nn::Vec hl = cfg.cntx_rep
                         ? nn::Vec(step.zprime.row(e.i), step.zprime.row(e.i) + d)
                         : left.h;
        if (e.op == ra::RaOpId::Keep) {
            item.src = BeamItem::Src::Keep;
            item.tree = ra::keep(left.tree);
            item.h = hl;
            item.c = left.c;
        } else if (e.j < 0) {
            item.src = BeamItem::Src::Unary;
            item.tree = ra::unary(e.op, left.tree);
            nn::Vec embed(op_embed.row(static_cast<int>(e.op)),
                          op_embed.row(static_cast<int>(e.op)) + d);
            auto [h, c] = nn::lstm_step(embed, hl, model.lstm_params(), item.lstm_cache);
            item.h = std::move(h);
            item.c = std::move(c);
        } else {
            const BeamItem& right = prev.items[static_cast<std::size_t>(e.j)];
            item.src = BeamItem::Src::Binary;
            item.tree = ra::binary(e.op, left.tree, right.tree);
            nn::Vec hr = cfg.cntx_rep
                             ? nn::Vec(step.zprime.row(e.j), step.zprime.row(e.j) + d)
                             : right.h;
            nn::Vec embed(op_embed.row(static_cast<int>(e.op)),
                          op_embed.row(static_cast<int>(e.op)) + d);
            auto [h, c] = nn::tree_lstm_step(embed, hl, left.c, hr, right.c,
                                             model.tree_lstm_params(), item.tree_cache);
            item.h = std::move(h);
            item.c = std::move(c);
        }
        next.items.push_back(std::move(item));
    }
    return next;
}

/// Collects the distinct-digest returnable trees from all beams, scores them
/// with the re-ranking layer, and picks the best by (score desc, digest asc).
/// Under no_reranker the answer is the best returnable tree of the final beam
/// by step score.
inline void rerank(const Model& model, const DecodeOptions& opt, DecodeResult& result) {
    const DecoderConfig& cfg = opt.cfg;
    std::int64_t d = model.cfg.dim;

    std::unordered_set<Digest, DigestHash> seen;
    result.pool.clear();
    for (std::size_t t = 0; t < result.beams.size(); ++t) {
        const Beam& beam = result.beams[t];
        for (int i = 0; i < beam.size(); ++i) {
            const BeamItem& item = beam.items[static_cast<std::size_t>(i)];
            if (item.tree->out_type() != ra::SemanticType::Relation) continue;
            if (!seen.insert(item.digest).second) continue;
            result.pool.push_back({static_cast<int>(t), i});
        }
    }

    if (cfg.no_reranker) {
        // highest step score among returnable trees of the final beam
        const Beam& last = result.beams.back();
        int best = -1;
        for (int i = 0; i < last.size(); ++i) {
            const BeamItem& item = last.items[static_cast<std::size_t>(i)];
            if (item.tree->out_type() != ra::SemanticType::Relation) continue;
            if (best < 0 ||
                detail_dec::rank_before(item.step_score, item.digest,
                                        last.items[static_cast<std::size_t>(best)].step_score,
                                        last.items[static_cast<std::size_t>(best)].digest))
                best = i;
        }
        result.chosen = -1;
        if (best >= 0) {
            int T = static_cast<int>(result.beams.size()) - 1;
            for (std::size_t m = 0; m < result.pool.size(); ++m)
                if (result.pool[m] == std::make_pair(T, best)) result.chosen = static_cast<int>(m);
            if (result.chosen < 0) {  // duplicate digest entered the pool earlier
                Digest want = last.items[static_cast<std::size_t>(best)].digest;
                for (std::size_t m = 0; m < result.pool.size(); ++m) {
                    const BeamItem& it =
                        result.beams[static_cast<std::size_t>(result.pool[m].first)]
                            .items[static_cast<std::size_t>(result.pool[m].second)];
                    if (it.digest == want) result.chosen = static_cast<int>(m);
                }
            }
        }
        return;
    }

    int M = static_cast<int>(result.pool.size());
    if (M == 0) {
        result.chosen = -1;  // diagnostic failure: nothing returnable was built
        return;
    }
    result.reranker_used = true;
    result.pool_vecs = nn::Tensor({M, d});
    for (int m = 0; m < M; ++m) {
        const BeamItem& item = result.beams[static_cast<std::size_t>(result.pool[static_cast<std::size_t>(m)].first)]
                                   .items[static_cast<std::size_t>(result.pool[static_cast<std::size_t>(m)].second)];
        std::copy(item.h.begin(), item.h.end(), result.pool_vecs.row(m));
    }

    if (cfg.no_rerank_cntx) {
        result.zbar = result.pool_vecs;
    } else {
        std::int64_t nx = result.enc.n_tokens;
        result.rerank_joint = nn::Tensor({nx + M, d});
        for (std::int64_t i = 0; i < nx; ++i)
            std::copy(result.enc.out.row(i), result.enc.out.row(i) + d,
                      result.rerank_joint.row(i));
        for (int m = 0; m < M; ++m)
            std::copy(result.pool_vecs.row(m), result.pool_vecs.row(m) + d,
                      result.rerank_joint.row(nx + m));
        nn::AttnParams p = model.attn_params("dec.rerank_tf.l0", false);
        nn::Tensor h = nn::attention_block(result.rerank_joint, p, model.cfg.heads, nullptr, 0,
                                           result.rerank_tf);
        result.zbar = nn::Tensor({M, d});
        for (int m = 0; m < M; ++m)
            std::copy(h.row(nx + m), h.row(nx + m) + d, result.zbar.row(m));
    }
    result.pool_scores = nn::ffn_score(result.zbar, model.store.p("dec.rerank.W"),
                                       model.store.p("dec.rerank.w"), result.rerank_ffn);
    if (opt.oracle && opt.oracle->rerank_score)
        for (int m = 0; m < M; ++m)
            result.pool_scores[static_cast<std::size_t>(m)] = opt.oracle->rerank_score(
                result.beams[static_cast<std::size_t>(result.pool[static_cast<std::size_t>(m)].first)]
                    .items[static_cast<std::size_t>(result.pool[static_cast<std::size_t>(m)].second)]
                    .digest);

    result.chosen = 0;
    for (int m = 1; m < M; ++m) {
        auto digest_of = [&](int idx) {
            return result.beams[static_cast<std::size_t>(result.pool[static_cast<std::size_t>(idx)].first)]
                .items[static_cast<std::size_t>(result.pool[static_cast<std::size_t>(idx)].second)]
                .digest;
        };
        if (detail_dec::rank_before(result.pool_scores[static_cast<std::size_t>(m)], digest_of(m),
                                    result.pool_scores[static_cast<std::size_t>(result.chosen)],
                                    digest_of(result.chosen)))
            result.chosen = m;
    }
}

/// Full decoding: encode, initialize the beam with DB constants, then T
/// rounds of contextualize / score / prune / represent, and finally re-rank
/// all returnable trees. With opt.gold set the loop runs teacher-forced for
/// exactly the gold height.
inline DecodeResult decode(const Model& model, const Example& ex, const DecodeOptions& opt) {
    opt.cfg.validate();
    DecodeResult result;
    result.enc = encode_example(model, ex);

    bool teacher = opt.gold != nullptr;
    int T = teacher ? static_cast<int>(opt.gold->size()) - 1 : opt.cfg.steps;
    int K = opt.cfg.beam_size;

    Beam beam = init_beam(model, ex, result.enc, K, opt.oracle, result);
    if (teacher) {
        // force all gold constants onto the beam (pins cover value and star)
        std::unordered_set<Digest, DigestHash> have;
        for (const auto& item : beam.items) have.insert(item.digest);
        std::vector<BeamItem> forced;
        const Schema& schema = *ex.schema;
        std::unordered_set<Digest, DigestHash> gold0((*opt.gold)[0].begin(), (*opt.gold)[0].end());
        for (int c = 0; c < schema.n_constants(); ++c) {
            ra::RaTree t = schema.constant_is_table(c)
                               ? ra::leaf(ra::Leaf::table(schema.constant_name(c), c))
                               : ra::leaf(ra::Leaf::column(schema.constant_name(c),
                                                           schema.column_of_constant(c)));
            Digest dg = ra::canonical_digest(t);
            if (!gold0.count(dg) || have.count(dg)) continue;
            BeamItem item;
            item.src = BeamItem::Src::Constant;
            item.const_index = c;
            item.tree = t;
            item.canon = detail_dec::leaf_canon(t);
            item.digest = dg;
            item.h.assign(result.enc.out.row(result.enc.n_tokens + c),
                          result.enc.out.row(result.enc.n_tokens + c) + model.cfg.dim);
            item.c.assign(static_cast<std::size_t>(model.cfg.dim), 0.0);
            item.step_score = result.const_log_probs[static_cast<std::size_t>(c)];
            forced.push_back(std::move(item));
        }
        // gold-first ordering: forced + already-present items
        for (auto& item : beam.items) forced.push_back(std::move(item));
        beam.items = std::move(forced);
        std::unordered_set<Digest, DigestHash> final_set;
        for (const auto& item : beam.items) final_set.insert(item.digest);
        for (const auto& dg : (*opt.gold)[0])
            if (!final_set.count(dg))
                throw GoldNotInFrontier("gold leaf missing from the initial beam");
    }
    result.beams.push_back(std::move(beam));

    result.steps.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        StepCache& step = result.steps[static_cast<std::size_t>(t)];
        const Beam& current = result.beams.back();
        contextualize_beam(model, result.enc, current, opt.cfg, step);
        score_frontier(model, current, step, t, opt.oracle, opt.gold);
        int k = current.size();
        int bound = k * ra::kNumUnaryOps + k * k * ra::kNumBinaryOps;
        if (step.raw_count > bound) throw Error("frontier bound exceeded");
        result.frontier_sizes.push_back(step.raw_count);
        int expected_gold =
            teacher && t + 1 < static_cast<int>(opt.gold->size())
                ? static_cast<int>((*opt.gold)[static_cast<std::size_t>(t + 1)].size())
                : 0;
        select_entries(step, K, teacher, expected_gold);
        Beam next = represent_new_beam(model, current, step, opt.cfg);
        for (const auto& item : next.items)
            if (item.tree->height() != t + 1) throw Error("beam item height invariant violated");
        result.beams.push_back(std::move(next));
    }

    rerank(model, opt, result);
    return result;
}

}  // namespace smbop
