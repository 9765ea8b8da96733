#include <gtest/gtest.h>

#include "smbop/model/encoder.hpp"
#include "smbop/schema/synthetic.hpp"

using namespace smbop;

namespace {

Model tiny_model(const std::vector<Example>& data, ModelConfig cfg, std::uint64_t seed = 5) {
    return Model(cfg, build_vocab(data), seed);
}

ModelConfig small_cfg(int layers) {
    ModelConfig cfg = ModelConfig::desk();
    cfg.dim = 32;
    cfg.heads = 2;
    cfg.enc_layers = layers;
    return cfg;
}

}  // namespace

TEST(Encoder, OutputShapes) {
    auto data = gen_synthetic(61, 5, {3});
    Model model = tiny_model(data, small_cfg(2));
    for (const auto& ex : data) {
        EncoderCache enc = encode_example(model, ex);
        EXPECT_EQ(enc.n_tokens, static_cast<int>(ex.utterance.size()));
        EXPECT_EQ(enc.n_consts, ex.schema->n_constants());
        EXPECT_EQ(enc.out.rows(), enc.n_tokens + enc.n_consts);
        EXPECT_EQ(enc.out.cols(), model.cfg.dim);
        EXPECT_TRUE(enc.out.all_finite());
    }
}

TEST(Encoder, ZeroLayersReturnRawEmbeddings) {
    auto data = gen_synthetic(62, 2, {3});
    Model model = tiny_model(data, small_cfg(0));
    EncoderCache enc = encode_example(model, data[0]);
    for (std::size_t i = 0; i < enc.out.data.size(); ++i)
        EXPECT_DOUBLE_EQ(enc.out[i], enc.input[i]);
}

TEST(Encoder, PermutationEquivariantOverColumns) {
    // swapping two schema columns permutes the corresponding s vectors and
    // leaves everything else unchanged
    auto data = gen_synthetic(63, 3, {3});
    const Example& ex = data[0];
    Model model = tiny_model(data, small_cfg(2));

    int nc = ex.schema->n_columns();
    ASSERT_GE(nc, 2);
    // pick two columns of the same table so the type embedding cannot differ
    int a = -1, b = -1;
    for (int i = 0; i < nc && a < 0; ++i)
        for (int j = i + 1; j < nc; ++j)
            if (ex.schema->columns[static_cast<std::size_t>(i)].table ==
                ex.schema->columns[static_cast<std::size_t>(j)].table) {
                a = i;
                b = j;
                break;
            }
    ASSERT_GE(a, 0);

    Example permuted = ex;
    auto schema2 = std::make_shared<Schema>(*ex.schema);
    std::swap(schema2->columns[static_cast<std::size_t>(a)],
              schema2->columns[static_cast<std::size_t>(b)]);
    // remap key sets through the column permutation
    auto remap = [&](int c) { return c == a ? b : c == b ? a : c; };
    std::set<int> pks;
    for (int pk : ex.schema->primary_keys) pks.insert(remap(pk));
    schema2->primary_keys = pks;
    std::set<std::pair<int, int>> fks;
    for (auto [x, y] : ex.schema->foreign_keys) fks.insert({remap(x), remap(y)});
    schema2->foreign_keys = fks;
    permuted.schema = schema2;

    EncoderCache e1 = encode_example(model, ex);
    EncoderCache e2 = encode_example(model, permuted);
    int nt = e1.n_tokens, ntab = ex.schema->n_tables();
    auto row1 = [&](int c) { return e1.out.row(nt + ntab + c); };
    auto row2 = [&](int c) { return e2.out.row(nt + ntab + c); };
    for (int c = 0; c < nc; ++c) {
        const double* expect = row1(c);
        const double* got = row2(remap(c));
        for (int k = 0; k < model.cfg.dim; ++k) EXPECT_NEAR(expect[k], got[k], 1e-12);
    }
    for (int i = 0; i < nt; ++i)
        for (int k = 0; k < model.cfg.dim; ++k)
            EXPECT_NEAR(e1.out.at(i, k), e2.out.at(i, k), 1e-12);
}

TEST(Encoder, DeterministicAcrossCalls) {
    auto data = gen_synthetic(64, 2, {3});
    Model model = tiny_model(data, small_cfg(2));
    EncoderCache a = encode_example(model, data[0]);
    EncoderCache b = encode_example(model, data[0]);
    EXPECT_EQ(a.out.data, b.out.data);
}

TEST(Encoder, UnknownWordsMapToUnk) {
    auto data = gen_synthetic(65, 2, {3});
    Model model = tiny_model(data, small_cfg(1));
    Example ex = data[0];
    ex.utterance.push_back("zzzneverseen");
    EncoderCache enc = encode_example(model, ex);
    EXPECT_EQ(enc.token_ids.back(), 0);
}
