#pragma once

#include "smbop/nn/kernels.hpp"

namespace smbop::nn {

/// Parameters of one attention block. Relation embedding tables rel_k / rel_v
/// have one row per relation tag and head_dim columns, shared across heads;
/// when null the block is plain multi-head self-attention.
struct AttnParams {
    const Tensor* wq = nullptr;  // [d, d]
    const Tensor* wk = nullptr;
    const Tensor* wv = nullptr;
    const Tensor* rel_k = nullptr;  // [tags, d/H] or null
    const Tensor* rel_v = nullptr;
    const Tensor* ln1_g = nullptr;  // [d]
    const Tensor* ln1_b = nullptr;
    const Tensor* ln2_g = nullptr;
    const Tensor* ln2_b = nullptr;
    const Tensor* w1 = nullptr;  // [d, f]
    const Tensor* b1 = nullptr;  // [f]
    const Tensor* w2 = nullptr;  // [f, d]
    const Tensor* b2 = nullptr;  // [d]
};

struct AttnGrads {
    Tensor* wq = nullptr;
    Tensor* wk = nullptr;
    Tensor* wv = nullptr;
    Tensor* rel_k = nullptr;
    Tensor* rel_v = nullptr;
    Tensor* ln1_g = nullptr;
    Tensor* ln1_b = nullptr;
    Tensor* ln2_g = nullptr;
    Tensor* ln2_b = nullptr;
    Tensor* w1 = nullptr;
    Tensor* b1 = nullptr;
    Tensor* w2 = nullptr;
    Tensor* b2 = nullptr;
};

struct AttnCache {
    Tensor u;      // block input
    Tensor a;      // LN1(u)
    Tensor q, k, v;
    std::vector<Tensor> alpha;  // per head, [n, n]
    Tensor y1;     // u + attention
    Tensor b;      // LN2(y1)
    Tensor h_pre;  // b w1 + b1
    Tensor h;      // relu(h_pre)
    LayerNormCache ln1, ln2;
};

/// One pre-norm Transformer block with relation-aware attention:
///   y1 = u + MHA(LN1(u)),  y = y1 + FFN(LN2(y1)).
/// Per head, e_ij = q_i . (k_j + rel_k[tag_ij]) / sqrt(d/H) and values are
/// shifted by rel_v[tag_ij]. Zero relation tables reduce it to a vanilla
/// block, and zeroing wv/rel_v/w2/b2 makes the whole block the identity.
inline Tensor attention_block(const Tensor& u, const AttnParams& p, int heads,
                              const std::vector<std::uint8_t>* tags, std::int64_t tag_stride,
                              AttnCache& cache) {
    std::int64_t n = u.rows(), d = u.cols();
    if (d % heads != 0) throw ShapeMismatch("model dim not divisible by heads");
    std::int64_t dh = d / heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    cache.u = u;
    cache.a = layer_norm(u, *p.ln1_g, *p.ln1_b, cache.ln1);
    cache.q = linear(cache.a, *p.wq, nullptr);
    cache.k = linear(cache.a, *p.wk, nullptr);
    cache.v = linear(cache.a, *p.wv, nullptr);
    cache.alpha.assign(static_cast<std::size_t>(heads), Tensor({n, n}));

    auto tag_at = [&](std::int64_t i, std::int64_t j) -> std::int64_t {
        return tags ? static_cast<std::int64_t>((*tags)[static_cast<std::size_t>(i * tag_stride + j)])
                    : 0;
    };

    Tensor z({n, d});
    for (int h = 0; h < heads; ++h) {
        std::int64_t off = h * dh;
        Tensor e({n, n});
        for (std::int64_t i = 0; i < n; ++i) {
            const double* qi = cache.q.row(i) + off;
            for (std::int64_t j = 0; j < n; ++j) {
                const double* kj = cache.k.row(j) + off;
                double s = 0.0;
                if (p.rel_k) {
                    const double* r = p.rel_k->row(tag_at(i, j));
                    for (std::int64_t x = 0; x < dh; ++x) s += qi[x] * (kj[x] + r[x]);
                } else {
                    s = dot(qi, kj, static_cast<std::size_t>(dh));
                }
                e.at(i, j) = s * scale;
            }
        }
        Tensor& alpha = cache.alpha[static_cast<std::size_t>(h)];
        alpha = softmax(e);
        for (std::int64_t i = 0; i < n; ++i) {
            double* zi = z.row(i) + off;
            for (std::int64_t j = 0; j < n; ++j) {
                double a = alpha.at(i, j);
                const double* vj = cache.v.row(j) + off;
                if (p.rel_v) {
                    const double* r = p.rel_v->row(tag_at(i, j));
                    for (std::int64_t x = 0; x < dh; ++x) zi[x] += a * (vj[x] + r[x]);
                } else {
                    for (std::int64_t x = 0; x < dh; ++x) zi[x] += a * vj[x];
                }
            }
        }
    }

    cache.y1 = u;
    for (std::size_t i = 0; i < cache.y1.data.size(); ++i) cache.y1[i] += z[i];
    cache.b = layer_norm(cache.y1, *p.ln2_g, *p.ln2_b, cache.ln2);
    cache.h_pre = linear(cache.b, *p.w1, p.b1);
    cache.h = relu_fw(cache.h_pre);
    Tensor f = linear(cache.h, *p.w2, p.b2);
    for (std::size_t i = 0; i < f.data.size(); ++i) f[i] += cache.y1[i];
    return f;
}

inline void attention_block_backward(const Tensor& dy, const AttnParams& p, const AttnGrads& g,
                                     int heads, const std::vector<std::uint8_t>* tags,
                                     std::int64_t tag_stride, const AttnCache& cache, Tensor& du) {
    std::int64_t n = cache.u.rows(), d = cache.u.cols();
    std::int64_t dh = d / heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    auto tag_at = [&](std::int64_t i, std::int64_t j) -> std::int64_t {
        return tags ? static_cast<std::int64_t>((*tags)[static_cast<std::size_t>(i * tag_stride + j)])
                    : 0;
    };

    // y = y1 + f(ln2(y1))
    Tensor dy1 = dy;
    Tensor dh_relu({n, p.w1->cols()});
    Tensor db({n, d});
    {
        Tensor dhid({n, p.w1->cols()});
        linear_backward(dy, cache.h, *p.w2, dh_relu, *g.w2, g.b2);
        relu_backward(dh_relu, cache.h_pre, dhid);
        linear_backward(dhid, cache.b, *p.w1, db, *g.w1, g.b1);
        layer_norm_backward(db, cache.ln2, *p.ln2_g, dy1, *g.ln2_g, *g.ln2_b);
    }

    // y1 = u + z; du accumulates into the caller's buffer
    Tensor dz = dy1;
    if (!du.same_shape(cache.u)) throw ShapeMismatch("attention backward du");
    for (std::size_t i = 0; i < du.data.size(); ++i) du[i] += dy1[i];

    Tensor dq({n, d}), dk({n, d}), dv({n, d});
    for (int h = 0; h < heads; ++h) {
        std::int64_t off = h * dh;
        const Tensor& alpha = cache.alpha[static_cast<std::size_t>(h)];
        Tensor dalpha({n, n});
        for (std::int64_t i = 0; i < n; ++i) {
            const double* dzi = dz.row(i) + off;
            for (std::int64_t j = 0; j < n; ++j) {
                const double* vj = cache.v.row(j) + off;
                double a = alpha.at(i, j);
                double da = 0.0;
                if (p.rel_v) {
                    const double* r = p.rel_v->row(tag_at(i, j));
                    double* drv = g.rel_v->row(tag_at(i, j));
                    for (std::int64_t x = 0; x < dh; ++x) {
                        da += dzi[x] * (vj[x] + r[x]);
                        drv[x] += a * dzi[x];
                    }
                } else {
                    da = dot(dzi, vj, static_cast<std::size_t>(dh));
                }
                dalpha.at(i, j) = da;
                double* dvj = dv.row(j) + off;
                for (std::int64_t x = 0; x < dh; ++x) dvj[x] += a * dzi[x];
            }
        }
        Tensor de({n, n});
        softmax_backward(dalpha, alpha, de);
        for (std::int64_t i = 0; i < n; ++i) {
            const double* qi = cache.q.row(i) + off;
            double* dqi = dq.row(i) + off;
            for (std::int64_t j = 0; j < n; ++j) {
                double ge = de.at(i, j) * scale;
                if (ge == 0.0) continue;
                const double* kj = cache.k.row(j) + off;
                double* dkj = dk.row(j) + off;
                if (p.rel_k) {
                    const double* r = p.rel_k->row(tag_at(i, j));
                    double* drk = g.rel_k->row(tag_at(i, j));
                    for (std::int64_t x = 0; x < dh; ++x) {
                        dqi[x] += ge * (kj[x] + r[x]);
                        dkj[x] += ge * qi[x];
                        drk[x] += ge * qi[x];
                    }
                } else {
                    for (std::int64_t x = 0; x < dh; ++x) {
                        dqi[x] += ge * kj[x];
                        dkj[x] += ge * qi[x];
                    }
                }
            }
        }
    }

    Tensor da({n, d});
    linear_backward(dq, cache.a, *p.wq, da, *g.wq, nullptr);
    linear_backward(dk, cache.a, *p.wk, da, *g.wk, nullptr);
    linear_backward(dv, cache.a, *p.wv, da, *g.wv, nullptr);
    layer_norm_backward(da, cache.ln1, *p.ln1_g, du, *g.ln1_g, *g.ln1_b);
}

}  // namespace smbop::nn
