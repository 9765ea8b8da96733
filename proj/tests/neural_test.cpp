#include <gtest/gtest.h>

#include <cstring>

#include "smbop/nn/gradcheck.hpp"
#include "smbop/nn/params.hpp"

using namespace smbop;
using namespace smbop::nn;

TEST(Softmax, Uniform) {
    Tensor x({1, 2});
    Tensor y = softmax(x);
    EXPECT_DOUBLE_EQ(y[0], 0.5);
    EXPECT_DOUBLE_EQ(y[1], 0.5);
}

TEST(Softmax, MaskedEntryIsExactlyZero) {
    Tensor x({1, 2});
    x[0] = 5.0;
    x[1] = 100.0;  // masked away
    std::vector<std::uint8_t> mask = {1, 0};
    Tensor y = softmax(x, &mask);
    EXPECT_DOUBLE_EQ(y[0], 1.0);
    EXPECT_DOUBLE_EQ(y[1], 0.0);
}

TEST(Softmax, RowsSumToOne) {
    Rng rng(3);
    Tensor x = Tensor::uniform({6, 9}, -4, 4, rng);
    Tensor y = softmax(x);
    for (std::int64_t i = 0; i < y.rows(); ++i) {
        double s = 0.0;
        for (std::int64_t j = 0; j < y.cols(); ++j) s += y.at(i, j);
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(GradCheck, AllOpsWithinTolerance) {
    for (const auto& [op, tol] : grad_check_ops()) {
        GradCheckResult r = grad_check(op, 0);
        EXPECT_LT(r.max_rel_err, tol) << op;
    }
}

TEST(GradCheck, UnknownOp) { EXPECT_THROW(grad_check("fused_everything", 0), UnknownOp); }

TEST(Lstm, ZeroWeightsGiveZeroOutput) {
    const std::int64_t d = 4;
    Tensor wx({d, 4 * d}), uh({d, 4 * d}), b({4 * d});
    LstmParams p{&wx, &uh, &b};
    LstmCache cache;
    Vec x(static_cast<std::size_t>(d), 0.0), h0(static_cast<std::size_t>(d), 0.0);
    auto [h, c] = lstm_step(x, h0, p, cache);
    for (double v : h) EXPECT_DOUBLE_EQ(v, 0.0);
    for (double v : c) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(TreeLstm, TiedForgetWeightsSymmetricUnderSwap) {
    const std::int64_t d = 5;
    Rng rng(11);
    Tensor wx = Tensor::uniform({d, 4 * d}, -0.5, 0.5, rng);
    Tensor u = Tensor::uniform({d, 3 * d}, -0.5, 0.5, rng);
    Tensor uf = Tensor::uniform({d, d}, -0.5, 0.5, rng);
    Tensor b = Tensor::uniform({4 * d}, -0.5, 0.5, rng);
    // tied: both forget gates share one weight matrix
    TreeLstmParams p{&wx, &u, &uf, &uf, &b};
    Tensor xa = Tensor::uniform({d}, -1, 1, rng), ha = Tensor::uniform({d}, -1, 1, rng),
           ca = Tensor::uniform({d}, -1, 1, rng), hb = Tensor::uniform({d}, -1, 1, rng),
           cb = Tensor::uniform({d}, -1, 1, rng);
    TreeLstmCache c1, c2;
    auto [h1, s1] = tree_lstm_step(xa.data, ha.data, ca.data, hb.data, cb.data, p, c1);
    auto [h2, s2] = tree_lstm_step(xa.data, hb.data, cb.data, ha.data, ca.data, p, c2);
    for (std::size_t i = 0; i < h1.size(); ++i) {
        EXPECT_DOUBLE_EQ(h1[i], h2[i]);
        EXPECT_DOUBLE_EQ(s1[i], s2[i]);
    }
}

TEST(Attention, ZeroRelationEmbeddingsMatchPlain) {
    Rng rng(5);
    const std::int64_t n = 6, d = 8, f = 16, ntags = 3;
    const int heads = 2;
    Tensor u = Tensor::uniform({n, d}, -1, 1, rng);
    Tensor wq = Tensor::uniform({d, d}, -0.5, 0.5, rng), wk = Tensor::uniform({d, d}, -0.5, 0.5, rng),
           wv = Tensor::uniform({d, d}, -0.5, 0.5, rng);
    Tensor rel_k({ntags, d / heads}), rel_v({ntags, d / heads});  // zeros
    Tensor ln1_g = Tensor::full({d}, 1.0), ln1_b({d}), ln2_g = Tensor::full({d}, 1.0), ln2_b({d});
    Tensor w1 = Tensor::uniform({d, f}, -0.5, 0.5, rng), b1 = Tensor::uniform({f}, -0.5, 0.5, rng);
    Tensor w2 = Tensor::uniform({f, d}, -0.5, 0.5, rng), b2 = Tensor::uniform({d}, -0.5, 0.5, rng);
    std::vector<std::uint8_t> tags(static_cast<std::size_t>(n * n));
    for (auto& t : tags) t = static_cast<std::uint8_t>(rng.next_below(ntags));

    AttnParams with_rel{&wq, &wk, &wv, &rel_k, &rel_v, &ln1_g, &ln1_b, &ln2_g, &ln2_b,
                        &w1, &b1, &w2, &b2};
    AttnParams plain{&wq, &wk, &wv, nullptr, nullptr, &ln1_g, &ln1_b, &ln2_g, &ln2_b,
                     &w1, &b1, &w2, &b2};
    AttnCache c1, c2;
    Tensor y1 = attention_block(u, with_rel, heads, &tags, n, c1);
    Tensor y2 = attention_block(u, plain, heads, nullptr, 0, c2);
    for (std::size_t i = 0; i < y1.data.size(); ++i) EXPECT_NEAR(y1[i], y2[i], 1e-12);
}

TEST(Attention, SingleElementAlphaIsOne) {
    Rng rng(6);
    const std::int64_t d = 6, f = 8;
    Tensor u = Tensor::uniform({1, d}, -1, 1, rng);
    Tensor wq = Tensor::uniform({d, d}, -0.5, 0.5, rng), wk = Tensor::uniform({d, d}, -0.5, 0.5, rng),
           wv = Tensor::uniform({d, d}, -0.5, 0.5, rng);
    Tensor ln1_g = Tensor::full({d}, 1.0), ln1_b({d}), ln2_g = Tensor::full({d}, 1.0), ln2_b({d});
    Tensor w1 = Tensor::uniform({d, f}, -0.5, 0.5, rng), b1({f});
    Tensor w2 = Tensor::uniform({f, d}, -0.5, 0.5, rng), b2({d});
    AttnParams p{&wq, &wk, &wv, nullptr, nullptr, &ln1_g, &ln1_b, &ln2_g, &ln2_b,
                 &w1, &b1, &w2, &b2};
    AttnCache cache;
    attention_block(u, p, 2, nullptr, 0, cache);
    for (const auto& alpha : cache.alpha) EXPECT_DOUBLE_EQ(alpha.at(0, 0), 1.0);
}

TEST(Attention, ZeroedValuePathIsIdentity) {
    // zero wv (+ no relations) and zero final FFN layer: block output == input
    Rng rng(7);
    const std::int64_t n = 4, d = 6, f = 8;
    Tensor u = Tensor::uniform({n, d}, -1, 1, rng);
    Tensor wq = Tensor::uniform({d, d}, -0.5, 0.5, rng), wk = Tensor::uniform({d, d}, -0.5, 0.5, rng);
    Tensor wv({d, d});
    Tensor ln1_g = Tensor::full({d}, 1.0), ln1_b({d}), ln2_g = Tensor::full({d}, 1.0), ln2_b({d});
    Tensor w1 = Tensor::uniform({d, f}, -0.5, 0.5, rng), b1 = Tensor::uniform({f}, -0.5, 0.5, rng);
    Tensor w2({f, d}), b2({d});
    AttnParams p{&wq, &wk, &wv, nullptr, nullptr, &ln1_g, &ln1_b, &ln2_g, &ln2_b,
                 &w1, &b1, &w2, &b2};
    AttnCache cache;
    Tensor y = attention_block(u, p, 2, nullptr, 0, cache);
    for (std::size_t i = 0; i < y.data.size(); ++i) EXPECT_DOUBLE_EQ(y[i], u[i]);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ParamStore store;
    Tensor init({1});
    init[0] = 1.0;
    store.add("p", init);
    store.g("p")[0] = 1.0;
    store.adam_step(0.1);
    EXPECT_NEAR(store.p("p")[0], 0.9, 1e-6);
    EXPECT_EQ(store.step(), 1);
}

TEST(Adam, ZeroGradLeavesParamUnchanged) {
    ParamStore store;
    Tensor init({3});
    init[0] = 1.0;
    init[1] = -2.0;
    init[2] = 0.5;
    store.add("p", init);
    store.adam_step(0.1);
    EXPECT_DOUBLE_EQ(store.p("p")[0], 1.0);
    EXPECT_DOUBLE_EQ(store.p("p")[1], -2.0);
    EXPECT_DOUBLE_EQ(store.p("p")[2], 0.5);
}

TEST(Adam, DeterministicTrajectories) {
    auto run = [] {
        Rng rng(9);
        ParamStore store;
        store.add("w", Tensor::uniform({4, 4}, -1, 1, rng));
        for (int step = 0; step < 10; ++step) {
            store.zero_grads();
            Tensor& w = store.p("w");
            Tensor& g = store.g("w");
            for (std::size_t i = 0; i < w.data.size(); ++i) g[i] = 2.0 * w[i];
            store.adam_step(0.01);
        }
        return store.p("w").data;
    };
    auto a = run();
    auto b = run();
    EXPECT_EQ(a, b);
}

TEST(ParamStore, ZeroGradsKeepsMoments) {
    ParamStore store;
    Tensor init({1});
    init[0] = 1.0;
    store.add("p", init);
    store.g("p")[0] = 1.0;
    store.adam_step(0.1);
    double after_one = store.p("p")[0];
    store.zero_grads();
    store.adam_step(0.1);  // zero grad: moments decay but parameter still moves with m
    EXPECT_NE(store.p("p")[0], after_one);
}

TEST(Checkpoint, BitExactRoundTrip) {
    Rng rng(13);
    ParamStore store;
    store.add("a.w", Tensor::uniform({7, 5}, -3, 3, rng));
    store.add("b.v", Tensor::uniform({11}, -1e-9, 1e9, rng));
    std::string path = ::testing::TempDir() + "smbop_ckpt_test.bin";
    store.save(path, R"({"note":"meta"})");
    std::string meta;
    ParamStore loaded = ParamStore::load(path, meta);
    EXPECT_EQ(meta, R"({"note":"meta"})");
    for (const auto& [name, t] : store.params()) {
        const Tensor& l = loaded.p(name);
        ASSERT_EQ(l.shape, t.shape);
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            EXPECT_EQ(std::memcmp(&l.data[i], &t.data[i], sizeof(double)), 0);
        }
    }
}
