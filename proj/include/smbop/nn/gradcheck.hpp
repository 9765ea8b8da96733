#pragma once

#include <functional>

#include "smbop/nn/attention.hpp"
#include "smbop/nn/cells.hpp"
#include "smbop/nn/kernels.hpp"

namespace smbop::nn {

// Central-difference gradient checking (h = 1e-5, 64-bit) for every kernel
// with a hand-written backward. Each check builds seeded random inputs and
// parameters, takes loss = sum(coeffs * outputs) with fixed random coeffs,
// and compares the analytic gradient of every input/parameter element against
// finite differences.

struct GradCheckResult {
    std::string op;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool ok() const { return max_rel_err < tolerance; }
};

namespace detail {

inline constexpr double kFdStep = 1e-5;

inline double rel_err(double a, double n) {
    double denom = std::max({std::fabs(a), std::fabs(n), 1e-2});
    return std::fabs(a - n) / denom;
}

// pairs: (tensor to perturb, its analytic gradient buffer)
inline double run_check(const std::vector<std::pair<Tensor*, Tensor*>>& pairs,
                        const std::function<double()>& loss,
                        const std::function<void()>& backward) {
    for (auto& [t, g] : pairs) g->zero();
    backward();
    double worst = 0.0;
    for (auto& [t, g] : pairs) {
        for (std::size_t i = 0; i < t->data.size(); ++i) {
            double saved = (*t)[i];
            (*t)[i] = saved + kFdStep;
            double up = loss();
            (*t)[i] = saved - kFdStep;
            double down = loss();
            (*t)[i] = saved;
            double numeric = (up - down) / (2.0 * kFdStep);
            worst = std::max(worst, rel_err((*g)[i], numeric));
        }
    }
    return worst;
}

inline Tensor randu(std::vector<std::int64_t> shape, Rng& rng, double scale = 1.0) {
    return Tensor::uniform(std::move(shape), -scale, scale, rng);
}

inline double weighted_sum(const Tensor& y, const Tensor& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += y[i] * c[i];
    return s;
}

inline double check_linear(std::uint64_t seed) {
    Rng rng(seed * 7919 + 13);
    Tensor x = randu({8, 8}, rng), w = randu({8, 8}, rng), b = randu({8}, rng);
    Tensor c = randu({8, 8}, rng);
    Tensor dx({8, 8}), dw({8, 8}), db({8});
    auto loss = [&] { return weighted_sum(linear(x, w, &b), c); };
    auto backward = [&] { linear_backward(c, x, w, dx, dw, &db); };
    return run_check({{&x, &dx}, {&w, &dw}, {&b, &db}}, loss, backward);
}

inline double check_layer_norm(std::uint64_t seed) {
    Rng rng(seed * 7919 + 17);
    Tensor x = randu({4, 7}, rng), gain = randu({7}, rng), bias = randu({7}, rng);
    Tensor c = randu({4, 7}, rng);
    Tensor dx({4, 7}), dg({7}), db({7});
    LayerNormCache cache;
    auto loss = [&] {
        LayerNormCache local;
        return weighted_sum(layer_norm(x, gain, bias, local), c);
    };
    auto backward = [&] {
        layer_norm(x, gain, bias, cache);
        layer_norm_backward(c, cache, gain, dx, dg, db);
    };
    return run_check({{&x, &dx}, {&gain, &dg}, {&bias, &db}}, loss, backward);
}

inline double check_tanh(std::uint64_t seed) {
    Rng rng(seed * 7919 + 19);
    Tensor x = randu({5, 6}, rng), c = randu({5, 6}, rng);
    Tensor dx({5, 6});
    auto loss = [&] { return weighted_sum(tanh_fw(x), c); };
    auto backward = [&] { tanh_backward(c, tanh_fw(x), dx); };
    return run_check({{&x, &dx}}, loss, backward);
}

inline double check_softmax(std::uint64_t seed) {
    Rng rng(seed * 7919 + 23);
    Tensor x = randu({3, 6}, rng, 2.0), c = randu({3, 6}, rng);
    std::vector<std::uint8_t> mask(18, 1);
    mask[2] = 0;
    mask[7] = 0;
    mask[8] = 0;
    Tensor dx({3, 6});
    auto loss = [&] { return weighted_sum(softmax(x, &mask), c); };
    auto backward = [&] {
        Tensor y = softmax(x, &mask);
        softmax_backward(c, y, dx);
    };
    return run_check({{&x, &dx}}, loss, backward);
}

inline double check_attention(std::uint64_t seed) {
    Rng rng(seed * 7919 + 29);
    const std::int64_t n = 5, d = 8, f = 12, tags_n = 4;
    const int heads = 2;
    Tensor u = randu({n, d}, rng);
    Tensor wq = randu({d, d}, rng, 0.5), wk = randu({d, d}, rng, 0.5), wv = randu({d, d}, rng, 0.5);
    Tensor rel_k = randu({tags_n, d / heads}, rng, 0.5), rel_v = randu({tags_n, d / heads}, rng, 0.5);
    Tensor ln1_g = randu({d}, rng), ln1_b = randu({d}, rng);
    Tensor ln2_g = randu({d}, rng), ln2_b = randu({d}, rng);
    Tensor w1 = randu({d, f}, rng, 0.5), b1 = randu({f}, rng);
    Tensor w2 = randu({f, d}, rng, 0.5), b2 = randu({d}, rng);
    Tensor c = randu({n, d}, rng);
    std::vector<std::uint8_t> tags(static_cast<std::size_t>(n * n));
    for (auto& t : tags) t = static_cast<std::uint8_t>(rng.next_below(tags_n));

    AttnParams p{&wq, &wk, &wv, &rel_k, &rel_v, &ln1_g, &ln1_b, &ln2_g, &ln2_b, &w1, &b1, &w2, &b2};
    Tensor dwq({d, d}), dwk({d, d}), dwv({d, d}), drel_k({tags_n, d / heads}),
        drel_v({tags_n, d / heads});
    Tensor dln1_g({d}), dln1_b({d}), dln2_g({d}), dln2_b({d});
    Tensor dw1({d, f}), db1({f}), dw2({f, d}), db2({d});
    Tensor du({n, d});
    AttnGrads g{&dwq, &dwk, &dwv, &drel_k, &drel_v, &dln1_g, &dln1_b,
                &dln2_g, &dln2_b, &dw1, &db1, &dw2, &db2};

    auto loss = [&] {
        AttnCache cache;
        return weighted_sum(attention_block(u, p, heads, &tags, n, cache), c);
    };
    auto backward = [&] {
        AttnCache cache;
        attention_block(u, p, heads, &tags, n, cache);
        attention_block_backward(c, p, g, heads, &tags, n, cache, du);
    };
    return run_check({{&u, &du},
                      {&wq, &dwq},
                      {&wk, &dwk},
                      {&wv, &dwv},
                      {&rel_k, &drel_k},
                      {&rel_v, &drel_v},
                      {&ln1_g, &dln1_g},
                      {&ln1_b, &dln1_b},
                      {&ln2_g, &dln2_g},
                      {&ln2_b, &dln2_b},
                      {&w1, &dw1},
                      {&b1, &db1},
                      {&w2, &dw2},
                      {&b2, &db2}},
                     loss, backward);
}

inline double check_lstm(std::uint64_t seed) {
    Rng rng(seed * 7919 + 31);
    const std::int64_t d = 6;
    Tensor wx = randu({d, 4 * d}, rng, 0.5), uh = randu({d, 4 * d}, rng, 0.5), b = randu({4 * d}, rng);
    Tensor xv = randu({d}, rng), h0v = randu({d}, rng);
    Tensor ch = randu({d}, rng), cc = randu({d}, rng);
    Tensor dwx({d, 4 * d}), duh({d, 4 * d}), db({4 * d}), dx({d}), dh0({d});
    LstmParams p{&wx, &uh, &b};
    LstmGrads g{&dwx, &duh, &db};
    auto loss = [&] {
        LstmCache cache;
        auto [h, cst] = lstm_step(xv.data, h0v.data, p, cache);
        double s = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * ch[i] + cst[i] * cc[i];
        return s;
    };
    auto backward = [&] {
        LstmCache cache;
        lstm_step(xv.data, h0v.data, p, cache);
        Vec dxv(static_cast<std::size_t>(d)), dh0v(static_cast<std::size_t>(d));
        lstm_backward(ch.data, cc.data, p, g, cache, dxv, dh0v);
        for (std::int64_t i = 0; i < d; ++i) {
            dx[static_cast<std::size_t>(i)] += dxv[static_cast<std::size_t>(i)];
            dh0[static_cast<std::size_t>(i)] += dh0v[static_cast<std::size_t>(i)];
        }
    };
    return run_check({{&xv, &dx}, {&h0v, &dh0}, {&wx, &dwx}, {&uh, &duh}, {&b, &db}}, loss,
                     backward);
}

inline double check_tree_lstm(std::uint64_t seed) {
    Rng rng(seed * 7919 + 37);
    const std::int64_t d = 5;
    Tensor wx = randu({d, 4 * d}, rng, 0.5), u = randu({d, 3 * d}, rng, 0.5);
    Tensor ufl = randu({d, d}, rng, 0.5), ufr = randu({d, d}, rng, 0.5), b = randu({4 * d}, rng);
    Tensor xv = randu({d}, rng), hl = randu({d}, rng), cl = randu({d}, rng), hr = randu({d}, rng),
           cr = randu({d}, rng);
    Tensor ch = randu({d}, rng), cc = randu({d}, rng);
    Tensor dwx({d, 4 * d}), du({d, 3 * d}), dufl({d, d}), dufr({d, d}), db({4 * d});
    Tensor dx({d}), dhl({d}), dcl({d}), dhr({d}), dcr({d});
    TreeLstmParams p{&wx, &u, &ufl, &ufr, &b};
    TreeLstmGrads g{&dwx, &du, &dufl, &dufr, &db};
    auto loss = [&] {
        TreeLstmCache cache;
        auto [h, cst] = tree_lstm_step(xv.data, hl.data, cl.data, hr.data, cr.data, p, cache);
        double s = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * ch[i] + cst[i] * cc[i];
        return s;
    };
    auto backward = [&] {
        TreeLstmCache cache;
        tree_lstm_step(xv.data, hl.data, cl.data, hr.data, cr.data, p, cache);
        Vec dxv(static_cast<std::size_t>(d)), dhlv(static_cast<std::size_t>(d)),
            dclv(static_cast<std::size_t>(d)), dhrv(static_cast<std::size_t>(d)),
            dcrv(static_cast<std::size_t>(d));
        tree_lstm_backward(ch.data, cc.data, p, g, cache, dxv, dhlv, dclv, dhrv, dcrv);
        for (std::int64_t i = 0; i < d; ++i) {
            std::size_t s = static_cast<std::size_t>(i);
            dx[s] += dxv[s];
            dhl[s] += dhlv[s];
            dcl[s] += dclv[s];
            dhr[s] += dhrv[s];
            dcr[s] += dcrv[s];
        }
    };
    return run_check({{&xv, &dx},
                      {&hl, &dhl},
                      {&cl, &dcl},
                      {&hr, &dhr},
                      {&cr, &dcr},
                      {&wx, &dwx},
                      {&u, &du},
                      {&ufl, &dufl},
                      {&ufr, &dufr},
                      {&b, &db}},
                     loss, backward);
}

inline double check_bilinear(std::uint64_t seed) {
    Rng rng(seed * 7919 + 41);
    const std::int64_t n = 4, d = 6;
    Tensor z = randu({n, d}, rng), w = randu({d, d}, rng, 0.5);
    Tensor c = randu({n, n}, rng);
    Tensor dz({n, d}), dw({d, d});
    auto loss = [&] { return weighted_sum(bilinear_scores(z, w, z), c); };
    auto backward = [&] { bilinear_backward(c, z, w, z, dz, dw, dz); };
    return run_check({{&z, &dz}, {&w, &dw}}, loss, backward);
}

inline double check_ffn_score(std::uint64_t seed) {
    Rng rng(seed * 7919 + 43);
    const std::int64_t n = 3, d = 6;
    Tensor z = randu({n, d}, rng), w = randu({d, d}, rng, 0.5), v = randu({d}, rng);
    Vec c;
    for (std::int64_t i = 0; i < n; ++i) c.push_back(rng.uniform(-1, 1));
    Tensor dz({n, d}), dw({d, d}), dv({d});
    auto loss = [&] {
        FfnScoreCache cache;
        Vec s = ffn_score(z, w, v, cache);
        double out = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) out += s[i] * c[i];
        return out;
    };
    auto backward = [&] {
        FfnScoreCache cache;
        ffn_score(z, w, v, cache);
        ffn_score_backward(c, z, w, v, cache, dz, dw, dv);
    };
    return run_check({{&z, &dz}, {&w, &dw}, {&v, &dv}}, loss, backward);
}

}  // namespace detail

inline const std::vector<std::pair<std::string, double>>& grad_check_ops() {
    static const std::vector<std::pair<std::string, double>> ops = {
        {"linear", 1e-6},   {"layer_norm", 1e-6}, {"tanh", 1e-6},
        {"softmax", 1e-6},  {"attention", 1e-4},  {"lstm", 1e-4},
        {"tree_lstm", 1e-4}, {"bilinear", 1e-4},  {"ffn_score", 1e-4},
    };
    return ops;
}

/// Max relative error of the analytic gradient of `opname` against central
/// finite differences on seeded random inputs.
inline GradCheckResult grad_check(const std::string& opname, std::uint64_t seed) {
    double err;
    if (opname == "linear") err = detail::check_linear(seed);
    else if (opname == "layer_norm") err = detail::check_layer_norm(seed);
    else if (opname == "tanh") err = detail::check_tanh(seed);
    else if (opname == "softmax") err = detail::check_softmax(seed);
    else if (opname == "attention") err = detail::check_attention(seed);
    else if (opname == "lstm") err = detail::check_lstm(seed);
    else if (opname == "tree_lstm") err = detail::check_tree_lstm(seed);
    else if (opname == "bilinear") err = detail::check_bilinear(seed);
    else if (opname == "ffn_score") err = detail::check_ffn_score(seed);
    else throw UnknownOp(opname);
    for (const auto& [name, tol] : grad_check_ops())
        if (name == opname) return {opname, err, tol};
    throw UnknownOp(opname);
}

}  // namespace smbop::nn
