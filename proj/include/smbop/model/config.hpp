#pragma once

#include <json.hpp>

#include "smbop/common.hpp"

namespace smbop {

/// Architecture sizes. Paper-default: dim 300, 3 heads, 3 encoder layers and
/// a 3-layer beam Transformer. The desk preset is what the tests train.
struct ModelConfig {
    int dim = 300;
    int heads = 3;
    int enc_layers = 3;
    int beam_layers = 3;
    int ffn_mult = 2;             // feed-forward hidden = ffn_mult * dim
    bool tie_tree_forget = false; // share the two TreeLSTM forget weights

    int ffn_hidden() const { return ffn_mult * dim; }

    static ModelConfig paper_default() { return {}; }
    static ModelConfig desk() {
        ModelConfig c;
        c.dim = 64;
        c.heads = 2;
        c.enc_layers = 2;
        c.beam_layers = 1;
        return c;
    }
};

struct DecoderConfig {
    int beam_size = 30;  // K
    int steps = 9;       // T
    bool no_reranker = false;
    bool no_beam_cntx = false;
    bool no_rerank_cntx = false;
    bool cntx_rep = false;

    void validate() const {
        if (beam_size < 1 || steps < 1) throw Error("beam size and steps must be >= 1");
    }
};

/// Training hyperparameters. Defaults follow the reference setup
/// (lr 1.86e-4, batch 16, 90K steps, early stopping); desk() is the small
/// configuration the acceptance suite uses: K=8, d=64, at most 2000 steps.
struct TrainConfig {
    double lr = 1.86e-4;
    int batch_size = 16;
    int max_steps = 90000;
    int patience = 20;       // eval rounds without dev EM improvement
    double search_weight = 1.0;
    double rerank_weight = 1.0;
    int k_train = 30;
    std::uint64_t seed = 1;
    int eval_interval = 100;
    double empty_gold_penalty = 5.0;
    // teacher-forced steps per example: 0 runs to the gold height; a positive
    // value keeps forcing the kept-alive root up to that step, matching the
    // fixed inference budget
    int t_train = 0;

    void validate() const {
        if (lr < 0 || batch_size < 1 || max_steps < 1 || k_train < 1 || eval_interval < 1)
            throw Error("train config values must be positive");
    }

    static TrainConfig desk() {
        TrainConfig c;
        c.k_train = 8;
        c.max_steps = 2000;
        return c;
    }
};

inline void from_json_opt(const nlohmann::json& j, ModelConfig& c) {
    c.dim = j.value("dim", c.dim);
    c.heads = j.value("heads", c.heads);
    c.enc_layers = j.value("enc_layers", c.enc_layers);
    c.beam_layers = j.value("beam_layers", c.beam_layers);
    c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
    c.tie_tree_forget = j.value("tie_tree_forget", c.tie_tree_forget);
}

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"dim", c.dim},           {"heads", c.heads},
            {"enc_layers", c.enc_layers}, {"beam_layers", c.beam_layers},
            {"ffn_mult", c.ffn_mult}, {"tie_tree_forget", c.tie_tree_forget}};
}

inline void from_json_opt(const nlohmann::json& j, DecoderConfig& c) {
    c.beam_size = j.value("beam_size", c.beam_size);
    c.steps = j.value("steps", c.steps);
    c.no_reranker = j.value("no_reranker", c.no_reranker);
    c.no_beam_cntx = j.value("no_beam_cntx", c.no_beam_cntx);
    c.no_rerank_cntx = j.value("no_rerank_cntx", c.no_rerank_cntx);
    c.cntx_rep = j.value("cntx_rep", c.cntx_rep);
}

inline nlohmann::json to_json(const DecoderConfig& c) {
    return {{"beam_size", c.beam_size},       {"steps", c.steps},
            {"no_reranker", c.no_reranker},   {"no_beam_cntx", c.no_beam_cntx},
            {"no_rerank_cntx", c.no_rerank_cntx}, {"cntx_rep", c.cntx_rep}};
}

inline void from_json_opt(const nlohmann::json& j, TrainConfig& c) {
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.patience = j.value("patience", c.patience);
    c.search_weight = j.value("search_weight", c.search_weight);
    c.rerank_weight = j.value("rerank_weight", c.rerank_weight);
    c.k_train = j.value("k_train", c.k_train);
    c.seed = j.value("seed", c.seed);
    c.eval_interval = j.value("eval_interval", c.eval_interval);
    c.empty_gold_penalty = j.value("empty_gold_penalty", c.empty_gold_penalty);
    c.t_train = j.value("t_train", c.t_train);
}

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"lr", c.lr},
            {"batch_size", c.batch_size},
            {"max_steps", c.max_steps},
            {"patience", c.patience},
            {"search_weight", c.search_weight},
            {"rerank_weight", c.rerank_weight},
            {"k_train", c.k_train},
            {"seed", c.seed},
            {"eval_interval", c.eval_interval},
            {"empty_gold_penalty", c.empty_gold_penalty},
            {"t_train", c.t_train}};
}

}  // namespace smbop
