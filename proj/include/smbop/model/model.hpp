#pragma once

#include <unordered_map>

#include "smbop/model/config.hpp"
#include "smbop/nn/attention.hpp"
#include "smbop/nn/cells.hpp"
#include "smbop/nn/params.hpp"
#include "smbop/schema/dataset.hpp"
#include "smbop/schema/relations.hpp"

namespace smbop {

/// Word vocabulary. Id 0 is the unknown word; the rest are assigned in first
/// encounter order over the dataset (utterance tokens, then schema name
/// words), which is reproducible for a fixed dataset.
struct Vocab {
    std::vector<std::string> words{"<unk>"};
    std::unordered_map<std::string, int> index{{"<unk>", 0}};

    int add(const std::string& w) {
        auto [it, fresh] = index.emplace(w, static_cast<int>(words.size()));
        if (fresh) words.push_back(w);
        return it->second;
    }
    int lookup(const std::string& w) const {
        auto it = index.find(w);
        return it == index.end() ? 0 : it->second;
    }
    int size() const { return static_cast<int>(words.size()); }
};

inline Vocab build_vocab(const std::vector<Example>& dataset) {
    Vocab v;
    for (const auto& ex : dataset) {
        for (const auto& tok : ex.utterance) v.add(tok);
        for (const auto& t : ex.schema->tables)
            for (const auto& w : tokenize(t)) v.add(w);
        for (const auto& c : ex.schema->columns)
            for (const auto& w : tokenize(c.name)) v.add(w);
    }
    return v;
}

/// The full parser model: config, vocabulary, and every named parameter.
class Model {
  public:
    ModelConfig cfg;
    Vocab vocab;
    nn::ParamStore store;

    Model() = default;
    Model(ModelConfig c, Vocab v, std::uint64_t seed) : cfg(c), vocab(std::move(v)) {
        init_params(seed);
    }

    /// Registers all parameters; matrices start uniform(-1/sqrt(fan_in), ..),
    /// embeddings uniform over 1/sqrt(dim), biases zero, layer-norm gains one.
    void init_params(std::uint64_t seed) {
        Rng rng(seed);
        std::int64_t d = cfg.dim;
        std::int64_t f = cfg.ffn_hidden();
        std::int64_t dh = d / cfg.heads;
        if (d % cfg.heads != 0) throw Error("dim must be divisible by heads");

        auto mat = [&](const std::string& name, std::int64_t r, std::int64_t c) {
            double s = 1.0 / std::sqrt(static_cast<double>(r));
            store.add(name, nn::Tensor::uniform({r, c}, -s, s, rng));
        };
        auto emb = [&](const std::string& name, std::int64_t r, std::int64_t c) {
            double s = 1.0 / std::sqrt(static_cast<double>(c));
            store.add(name, nn::Tensor::uniform({r, c}, -s, s, rng));
        };
        auto zeros = [&](const std::string& name, std::int64_t n) {
            store.add(name, nn::Tensor::zeros({n}));
        };
        auto ones = [&](const std::string& name, std::int64_t n) {
            store.add(name, nn::Tensor::full({n}, 1.0));
        };
        auto block = [&](const std::string& prefix, bool relational) {
            mat(prefix + ".wq", d, d);
            mat(prefix + ".wk", d, d);
            mat(prefix + ".wv", d, d);
            if (relational) {
                emb(prefix + ".rel_k", kNumRelationTags, dh);
                emb(prefix + ".rel_v", kNumRelationTags, dh);
            }
            ones(prefix + ".ln1_g", d);
            zeros(prefix + ".ln1_b", d);
            ones(prefix + ".ln2_g", d);
            zeros(prefix + ".ln2_b", d);
            mat(prefix + ".w1", d, f);
            zeros(prefix + ".b1", f);
            mat(prefix + ".w2", f, d);
            zeros(prefix + ".b2", d);
        };

        emb("enc.tok_embed", vocab.size(), d);
        emb("enc.type_embed", 2, d);
        emb("enc.value_embed", 1, d);
        emb("enc.star_embed", 1, d);
        for (int l = 0; l < cfg.enc_layers; ++l) block("enc.l" + std::to_string(l), true);
        for (int l = 0; l < cfg.beam_layers; ++l) block("dec.beam_tf.l" + std::to_string(l), false);
        block("dec.rerank_tf.l0", false);

        emb("dec.op_embed", ra::kNumOps, d);
        for (int i = 0; i < ra::kNumUnaryOps; ++i) {
            const auto& op = ra::op_info(static_cast<ra::RaOpId>(i));
            emb("dec.unary.w." + std::string(op.name), 1, d);
        }
        for (int i = ra::kFirstBinaryOp; i < ra::kNumOps; ++i) {
            const auto& op = ra::op_info(static_cast<ra::RaOpId>(i));
            // bilinear scorer: 1/d init keeps z' W z' logits on the same scale
            // as the unary w . z' scores, which matters at the fixed small lr
            double s = 1.0 / static_cast<double>(d);
            store.add("dec.binary.W." + std::string(op.name),
                      nn::Tensor::uniform({d, d}, -s, s, rng));
        }
        mat("dec.lstm.wx", d, 4 * d);
        mat("dec.lstm.uh", d, 4 * d);
        zeros("dec.lstm.b", 4 * d);
        mat("dec.treelstm.wx", d, 4 * d);
        mat("dec.treelstm.u", d, 3 * d);
        mat("dec.treelstm.ufl", d, d);
        if (!cfg.tie_tree_forget) mat("dec.treelstm.ufr", d, d);
        zeros("dec.treelstm.b", 4 * d);
        mat("dec.const.W", d, d);
        emb("dec.const.w", 1, d);
        mat("dec.rerank.W", d, d);
        emb("dec.rerank.w", 1, d);
    }

    nn::AttnParams attn_params(const std::string& prefix, bool relational) const {
        nn::AttnParams p;
        p.wq = &store.p(prefix + ".wq");
        p.wk = &store.p(prefix + ".wk");
        p.wv = &store.p(prefix + ".wv");
        if (relational) {
            p.rel_k = &store.p(prefix + ".rel_k");
            p.rel_v = &store.p(prefix + ".rel_v");
        }
        p.ln1_g = &store.p(prefix + ".ln1_g");
        p.ln1_b = &store.p(prefix + ".ln1_b");
        p.ln2_g = &store.p(prefix + ".ln2_g");
        p.ln2_b = &store.p(prefix + ".ln2_b");
        p.w1 = &store.p(prefix + ".w1");
        p.b1 = &store.p(prefix + ".b1");
        p.w2 = &store.p(prefix + ".w2");
        p.b2 = &store.p(prefix + ".b2");
        return p;
    }

    nn::AttnGrads attn_grads(const std::string& prefix, bool relational,
                             nn::GradStore& sink) const {
        nn::AttnGrads g;
        g.wq = &sink[prefix + ".wq"];
        g.wk = &sink[prefix + ".wk"];
        g.wv = &sink[prefix + ".wv"];
        if (relational) {
            g.rel_k = &sink[prefix + ".rel_k"];
            g.rel_v = &sink[prefix + ".rel_v"];
        }
        g.ln1_g = &sink[prefix + ".ln1_g"];
        g.ln1_b = &sink[prefix + ".ln1_b"];
        g.ln2_g = &sink[prefix + ".ln2_g"];
        g.ln2_b = &sink[prefix + ".ln2_b"];
        g.w1 = &sink[prefix + ".w1"];
        g.b1 = &sink[prefix + ".b1"];
        g.w2 = &sink[prefix + ".w2"];
        g.b2 = &sink[prefix + ".b2"];
        return g;
    }

    nn::LstmParams lstm_params() const {
        return {&store.p("dec.lstm.wx"), &store.p("dec.lstm.uh"), &store.p("dec.lstm.b")};
    }
    nn::LstmGrads lstm_grads(nn::GradStore& sink) const {
        return {&sink["dec.lstm.wx"], &sink["dec.lstm.uh"], &sink["dec.lstm.b"]};
    }
    nn::TreeLstmParams tree_lstm_params() const {
        const std::string fr = cfg.tie_tree_forget ? "dec.treelstm.ufl" : "dec.treelstm.ufr";
        return {&store.p("dec.treelstm.wx"), &store.p("dec.treelstm.u"),
                &store.p("dec.treelstm.ufl"), &store.p(fr), &store.p("dec.treelstm.b")};
    }
    nn::TreeLstmGrads tree_lstm_grads(nn::GradStore& sink) const {
        const std::string fr = cfg.tie_tree_forget ? "dec.treelstm.ufl" : "dec.treelstm.ufr";
        return {&sink["dec.treelstm.wx"], &sink["dec.treelstm.u"], &sink["dec.treelstm.ufl"],
                &sink[fr], &sink["dec.treelstm.b"]};
    }

    const nn::Tensor& unary_w(ra::RaOpId op) const {
        return store.p("dec.unary.w." + std::string(ra::op_info(op).name));
    }
    const nn::Tensor& binary_w(ra::RaOpId op) const {
        return store.p("dec.binary.W." + std::string(ra::op_info(op).name));
    }

    // --- checkpointing: params + config + vocab in one file -------------------

    void save(const std::string& path) const {
        nlohmann::json meta = {{"config", to_json(cfg)}, {"vocab", vocab.words}};
        store.save(path, meta.dump());
    }

    static Model load(const std::string& path) {
        Model m;
        std::string meta_str;
        m.store = nn::ParamStore::load(path, meta_str);
        nlohmann::json meta = nlohmann::json::parse(meta_str);
        from_json_opt(meta.at("config"), m.cfg);
        m.vocab.words.clear();
        m.vocab.index.clear();
        for (const auto& w : meta.at("vocab")) {
            m.vocab.index.emplace(w.get<std::string>(), m.vocab.size());
            m.vocab.words.push_back(w.get<std::string>());
        }
        return m;
    }
};

}  // namespace smbop
