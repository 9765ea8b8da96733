#pragma once

#include "smbop/model/model.hpp"

namespace smbop {

/// Everything the encoder forward pass computed, kept alive for backward.
struct EncoderCache {
    RelationMatrix rel;
    std::vector<int> token_ids;
    std::vector<std::vector<int>> const_words;  // embedding rows per constant
    std::vector<int> type_index;                // 0 table, 1 column, per constant
    nn::Tensor input;                           // [tokens + constants, d]
    std::vector<nn::AttnCache> layers;
    nn::Tensor out;
    int n_tokens = 0;
    int n_consts = 0;
};

/// Joint relation-aware encoding of utterance tokens and DB constants.
/// Token rows are embedding lookups; a constant row is the mean of its name
/// word embeddings plus a table/column type embedding. L relation-aware
/// layers contextualize the concatenation; out splits back into x (first
/// n_tokens rows) and s (the rest).
inline EncoderCache encode_example(const Model& model, const Example& ex) {
    EncoderCache cache;
    const Schema& schema = *ex.schema;
    cache.rel = compute_relations(ex.utterance, schema);
    cache.n_tokens = static_cast<int>(ex.utterance.size());
    cache.n_consts = schema.n_constants();
    std::int64_t n = cache.n_tokens + cache.n_consts;
    std::int64_t d = model.cfg.dim;

    const nn::Tensor& tok = model.store.p("enc.tok_embed");
    const nn::Tensor& type = model.store.p("enc.type_embed");
    cache.input = nn::Tensor({n, d});
    for (int i = 0; i < cache.n_tokens; ++i) {
        int id = model.vocab.lookup(ex.utterance[static_cast<std::size_t>(i)]);
        cache.token_ids.push_back(id);
        std::copy(tok.row(id), tok.row(id) + d, cache.input.row(i));
    }
    cache.const_words.resize(static_cast<std::size_t>(cache.n_consts));
    for (int c = 0; c < cache.n_consts; ++c) {
        bool is_table = schema.constant_is_table(c);
        std::string name = is_table
                               ? schema.tables[static_cast<std::size_t>(c)]
                               : schema.columns[static_cast<std::size_t>(
                                                    schema.column_of_constant(c))]
                                     .name;
        auto& ids = cache.const_words[static_cast<std::size_t>(c)];
        for (const auto& w : tokenize(name)) ids.push_back(model.vocab.lookup(w));
        if (ids.empty()) ids.push_back(0);
        cache.type_index.push_back(is_table ? 0 : 1);
        double* row = cache.input.row(cache.n_tokens + c);
        double inv = 1.0 / static_cast<double>(ids.size());
        for (int id : ids) nn::axpy_raw(inv, tok.row(id), row, d);
        nn::axpy_raw(1.0, type.row(is_table ? 0 : 1), row, d);
    }

    nn::Tensor h = cache.input;
    cache.layers.resize(static_cast<std::size_t>(model.cfg.enc_layers));
    for (int l = 0; l < model.cfg.enc_layers; ++l) {
        nn::AttnParams p = model.attn_params("enc.l" + std::to_string(l), true);
        std::vector<std::uint8_t> tags(cache.rel.tags.size());
        for (std::size_t i = 0; i < tags.size(); ++i)
            tags[i] = static_cast<std::uint8_t>(cache.rel.tags[i]);
        h = nn::attention_block(h, p, model.cfg.heads, &tags, n,
                                cache.layers[static_cast<std::size_t>(l)]);
    }
    cache.out = std::move(h);
    if (!cache.out.all_finite()) throw Error("encoder produced non-finite values");
    return cache;
}

/// Backpropagates d(out) through the layer stack and embedding lookups.
inline void encode_backward(const Model& model, nn::GradStore& sink, const EncoderCache& cache,
                            const nn::Tensor& dout) {
    std::int64_t n = cache.out.rows(), d = cache.out.cols();
    std::vector<std::uint8_t> tags(cache.rel.tags.size());
    for (std::size_t i = 0; i < tags.size(); ++i)
        tags[i] = static_cast<std::uint8_t>(cache.rel.tags[i]);

    nn::Tensor dh = dout;
    for (int l = model.cfg.enc_layers - 1; l >= 0; --l) {
        nn::AttnParams p = model.attn_params("enc.l" + std::to_string(l), true);
        nn::AttnGrads g = model.attn_grads("enc.l" + std::to_string(l), true, sink);
        nn::Tensor du({n, d});
        nn::attention_block_backward(dh, p, g, model.cfg.heads, &tags, n,
                                     cache.layers[static_cast<std::size_t>(l)], du);
        dh = std::move(du);
    }

    nn::Tensor& dtok = sink["enc.tok_embed"];
    nn::Tensor& dtype = sink["enc.type_embed"];
    for (int i = 0; i < cache.n_tokens; ++i)
        nn::axpy_raw(1.0, dh.row(i), dtok.row(cache.token_ids[static_cast<std::size_t>(i)]), d);
    for (int c = 0; c < cache.n_consts; ++c) {
        const double* drow = dh.row(cache.n_tokens + c);
        const auto& ids = cache.const_words[static_cast<std::size_t>(c)];
        double inv = 1.0 / static_cast<double>(ids.size());
        for (int id : ids) nn::axpy_raw(inv, drow, dtok.row(id), d);
        nn::axpy_raw(1.0, drow, dtype.row(cache.type_index[static_cast<std::size_t>(c)]), d);
    }
}

}  // namespace smbop
