#pragma once

#include "smbop/nn/kernels.hpp"

namespace smbop::nn {

// Recurrent cells used to represent new trees: a standard LSTM step for unary
// operations and a binary child-sum TreeLSTM with per-child forget weights for
// binary operations. Vectors are plain Vec of model dim; gradient arguments
// accumulate.

struct LstmParams {
    const Tensor* wx = nullptr;  // [d, 4d] input weights, gate order i,f,o,g
    const Tensor* uh = nullptr;  // [d, 4d] hidden weights
    const Tensor* b = nullptr;   // [4d]
};

struct LstmGrads {
    Tensor* wx = nullptr;
    Tensor* uh = nullptr;
    Tensor* b = nullptr;
};

struct LstmCache {
    Vec x, h0;
    Vec i, f, o, g;  // gate activations
    Vec c, tanh_c;
};

/// One LSTM step with input x (an operation embedding), hidden state
/// initialized from the child representation, and zero initial cell.
/// Returns (h, c).
inline std::pair<Vec, Vec> lstm_step(const Vec& x, const Vec& h0, const LstmParams& p,
                                     LstmCache& cache) {
    std::int64_t d = static_cast<std::int64_t>(x.size());
    if (p.wx->rows() != d || p.uh->rows() != d || p.b->numel() != 4 * d)
        throw ShapeMismatch("lstm_step");
    cache.x = x;
    cache.h0 = h0;
    Vec pre(static_cast<std::size_t>(4 * d));
    for (std::int64_t k = 0; k < 4 * d; ++k) pre[static_cast<std::size_t>(k)] = (*p.b)[static_cast<std::size_t>(k)];
    for (std::int64_t r = 0; r < d; ++r) {
        axpy_raw(x[static_cast<std::size_t>(r)], p.wx->row(r), pre.data(), 4 * d);
        axpy_raw(h0[static_cast<std::size_t>(r)], p.uh->row(r), pre.data(), 4 * d);
    }
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    cache.i.resize(static_cast<std::size_t>(d));
    cache.f.resize(static_cast<std::size_t>(d));
    cache.o.resize(static_cast<std::size_t>(d));
    cache.g.resize(static_cast<std::size_t>(d));
    cache.c.resize(static_cast<std::size_t>(d));
    cache.tanh_c.resize(static_cast<std::size_t>(d));
    Vec h(static_cast<std::size_t>(d));
    for (std::int64_t k = 0; k < d; ++k) {
        std::size_t s = static_cast<std::size_t>(k);
        cache.i[s] = sig(pre[s]);
        cache.f[s] = sig(pre[static_cast<std::size_t>(d + k)]);  // multiplies a zero cell
        cache.o[s] = sig(pre[static_cast<std::size_t>(2 * d + k)]);
        cache.g[s] = std::tanh(pre[static_cast<std::size_t>(3 * d + k)]);
        cache.c[s] = cache.i[s] * cache.g[s];
        cache.tanh_c[s] = std::tanh(cache.c[s]);
        h[s] = cache.o[s] * cache.tanh_c[s];
    }
    return {std::move(h), cache.c};
}

inline void lstm_backward(const Vec& dh, const Vec& dc_up, const LstmParams& p,
                          const LstmGrads& g, const LstmCache& cache, Vec& dx, Vec& dh0) {
    std::int64_t d = static_cast<std::int64_t>(cache.x.size());
    Vec dpre(static_cast<std::size_t>(4 * d));
    for (std::int64_t k = 0; k < d; ++k) {
        std::size_t s = static_cast<std::size_t>(k);
        double do_ = dh[s] * cache.tanh_c[s];
        double dc = dh[s] * cache.o[s] * (1.0 - cache.tanh_c[s] * cache.tanh_c[s]) + dc_up[s];
        double di = dc * cache.g[s];
        double dg = dc * cache.i[s];
        // forget gate saw a zero cell, so its pre-activation gradient is zero
        dpre[s] = di * cache.i[s] * (1.0 - cache.i[s]);
        dpre[static_cast<std::size_t>(d + k)] = 0.0;
        dpre[static_cast<std::size_t>(2 * d + k)] = do_ * cache.o[s] * (1.0 - cache.o[s]);
        dpre[static_cast<std::size_t>(3 * d + k)] = dg * (1.0 - cache.g[s] * cache.g[s]);
    }
    for (std::int64_t r = 0; r < d; ++r) {
        std::size_t s = static_cast<std::size_t>(r);
        dx[s] += dot(p.wx->row(r), dpre.data(), static_cast<std::size_t>(4 * d));
        dh0[s] += dot(p.uh->row(r), dpre.data(), static_cast<std::size_t>(4 * d));
        axpy_raw(cache.x[s], dpre.data(), g.wx->row(r), 4 * d);
        axpy_raw(cache.h0[s], dpre.data(), g.uh->row(r), 4 * d);
    }
    for (std::int64_t k = 0; k < 4 * d; ++k)
        (*g.b)[static_cast<std::size_t>(k)] += dpre[static_cast<std::size_t>(k)];
}

struct TreeLstmParams {
    const Tensor* wx = nullptr;   // [d, 4d] input weights, gate order i,f,o,g
    const Tensor* u = nullptr;    // [d, 3d] child-sum weights for i,o,g
    const Tensor* ufl = nullptr;  // [d, d] left-child forget weights
    const Tensor* ufr = nullptr;  // [d, d] right-child forget weights
    const Tensor* b = nullptr;    // [4d] gate order i,f,o,g (f shared by both children)
};

struct TreeLstmGrads {
    Tensor* wx = nullptr;
    Tensor* u = nullptr;
    Tensor* ufl = nullptr;
    Tensor* ufr = nullptr;
    Tensor* b = nullptr;
};

struct TreeLstmCache {
    Vec x, hl, hr, cl, cr;
    Vec i, fl, fr, o, g;
    Vec c, tanh_c;
};

/// Binary child-sum TreeLSTM step: i, o, g gates read the summed child
/// hiddens, and each child gets its own forget gate (separate weights per
/// side; tie ufl == ufr for a swap-symmetric cell). Returns (h, c).
inline std::pair<Vec, Vec> tree_lstm_step(const Vec& x, const Vec& hl, const Vec& cl,
                                          const Vec& hr, const Vec& cr, const TreeLstmParams& p,
                                          TreeLstmCache& cache) {
    std::int64_t d = static_cast<std::int64_t>(x.size());
    if (p.wx->rows() != d || p.u->rows() != d || p.ufl->rows() != d || p.ufr->rows() != d ||
        p.b->numel() != 4 * d)
        throw ShapeMismatch("tree_lstm_step");
    cache.x = x;
    cache.hl = hl;
    cache.hr = hr;
    cache.cl = cl;
    cache.cr = cr;

    Vec pre_iog(static_cast<std::size_t>(3 * d));  // i, o, g over hl + hr
    Vec pre_fl(static_cast<std::size_t>(d)), pre_fr(static_cast<std::size_t>(d));
    for (std::int64_t k = 0; k < d; ++k) {
        std::size_t s = static_cast<std::size_t>(k);
        pre_iog[s] = (*p.b)[s];
        pre_iog[static_cast<std::size_t>(d + k)] = (*p.b)[static_cast<std::size_t>(2 * d + k)];
        pre_iog[static_cast<std::size_t>(2 * d + k)] = (*p.b)[static_cast<std::size_t>(3 * d + k)];
        pre_fl[s] = (*p.b)[static_cast<std::size_t>(d + k)];
        pre_fr[s] = (*p.b)[static_cast<std::size_t>(d + k)];
    }
    for (std::int64_t r = 0; r < d; ++r) {
        std::size_t s = static_cast<std::size_t>(r);
        const double* wxr = p.wx->row(r);
        for (std::int64_t k = 0; k < d; ++k) {
            pre_iog[static_cast<std::size_t>(k)] += x[s] * wxr[k];
            pre_fl[static_cast<std::size_t>(k)] += x[s] * wxr[d + k];
            pre_fr[static_cast<std::size_t>(k)] += x[s] * wxr[d + k];
            pre_iog[static_cast<std::size_t>(d + k)] += x[s] * wxr[2 * d + k];
            pre_iog[static_cast<std::size_t>(2 * d + k)] += x[s] * wxr[3 * d + k];
        }
        double hsum = hl[s] + hr[s];
        axpy_raw(hsum, p.u->row(r), pre_iog.data(), 3 * d);
        axpy_raw(hl[s], p.ufl->row(r), pre_fl.data(), d);
        axpy_raw(hr[s], p.ufr->row(r), pre_fr.data(), d);
    }
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    cache.i.resize(static_cast<std::size_t>(d));
    cache.fl.resize(static_cast<std::size_t>(d));
    cache.fr.resize(static_cast<std::size_t>(d));
    cache.o.resize(static_cast<std::size_t>(d));
    cache.g.resize(static_cast<std::size_t>(d));
    cache.c.resize(static_cast<std::size_t>(d));
    cache.tanh_c.resize(static_cast<std::size_t>(d));
    Vec h(static_cast<std::size_t>(d));
    for (std::int64_t k = 0; k < d; ++k) {
        std::size_t s = static_cast<std::size_t>(k);
        cache.i[s] = sig(pre_iog[s]);
        cache.o[s] = sig(pre_iog[static_cast<std::size_t>(d + k)]);
        cache.g[s] = std::tanh(pre_iog[static_cast<std::size_t>(2 * d + k)]);
        cache.fl[s] = sig(pre_fl[s]);
        cache.fr[s] = sig(pre_fr[s]);
        cache.c[s] = cache.i[s] * cache.g[s] + cache.fl[s] * cl[s] + cache.fr[s] * cr[s];
        cache.tanh_c[s] = std::tanh(cache.c[s]);
        h[s] = cache.o[s] * cache.tanh_c[s];
    }
    return {std::move(h), cache.c};
}

inline void tree_lstm_backward(const Vec& dh, const Vec& dc_up, const TreeLstmParams& p,
                               const TreeLstmGrads& g, const TreeLstmCache& cache, Vec& dx,
                               Vec& dhl, Vec& dcl, Vec& dhr, Vec& dcr) {
    std::int64_t d = static_cast<std::int64_t>(cache.x.size());
    Vec dpre_iog(static_cast<std::size_t>(3 * d));
    Vec dpre_fl(static_cast<std::size_t>(d)), dpre_fr(static_cast<std::size_t>(d));
    for (std::int64_t k = 0; k < d; ++k) {
        std::size_t s = static_cast<std::size_t>(k);
        double do_ = dh[s] * cache.tanh_c[s];
        double dc = dh[s] * cache.o[s] * (1.0 - cache.tanh_c[s] * cache.tanh_c[s]) + dc_up[s];
        double di = dc * cache.g[s];
        double dg = dc * cache.i[s];
        double dfl = dc * cache.cl[s];
        double dfr = dc * cache.cr[s];
        dcl[s] += dc * cache.fl[s];
        dcr[s] += dc * cache.fr[s];
        dpre_iog[s] = di * cache.i[s] * (1.0 - cache.i[s]);
        dpre_iog[static_cast<std::size_t>(d + k)] = do_ * cache.o[s] * (1.0 - cache.o[s]);
        dpre_iog[static_cast<std::size_t>(2 * d + k)] = dg * (1.0 - cache.g[s] * cache.g[s]);
        dpre_fl[s] = dfl * cache.fl[s] * (1.0 - cache.fl[s]);
        dpre_fr[s] = dfr * cache.fr[s] * (1.0 - cache.fr[s]);
    }
    for (std::int64_t r = 0; r < d; ++r) {
        std::size_t s = static_cast<std::size_t>(r);
        const double* wxr = p.wx->row(r);
        double acc_x = 0.0;
        for (std::int64_t k = 0; k < d; ++k) {
            acc_x += dpre_iog[static_cast<std::size_t>(k)] * wxr[k];
            acc_x += (dpre_fl[static_cast<std::size_t>(k)] + dpre_fr[static_cast<std::size_t>(k)]) *
                     wxr[d + k];
            acc_x += dpre_iog[static_cast<std::size_t>(d + k)] * wxr[2 * d + k];
            acc_x += dpre_iog[static_cast<std::size_t>(2 * d + k)] * wxr[3 * d + k];
        }
        dx[s] += acc_x;
        double dsum = dot(p.u->row(r), dpre_iog.data(), static_cast<std::size_t>(3 * d));
        dhl[s] += dsum + dot(p.ufl->row(r), dpre_fl.data(), static_cast<std::size_t>(d));
        dhr[s] += dsum + dot(p.ufr->row(r), dpre_fr.data(), static_cast<std::size_t>(d));

        double* gwx = g.wx->row(r);
        for (std::int64_t k = 0; k < d; ++k) {
            gwx[k] += cache.x[s] * dpre_iog[static_cast<std::size_t>(k)];
            gwx[d + k] += cache.x[s] *
                          (dpre_fl[static_cast<std::size_t>(k)] + dpre_fr[static_cast<std::size_t>(k)]);
            gwx[2 * d + k] += cache.x[s] * dpre_iog[static_cast<std::size_t>(d + k)];
            gwx[3 * d + k] += cache.x[s] * dpre_iog[static_cast<std::size_t>(2 * d + k)];
        }
        double hsum = cache.hl[s] + cache.hr[s];
        axpy_raw(hsum, dpre_iog.data(), g.u->row(r), 3 * d);
        axpy_raw(cache.hl[s], dpre_fl.data(), g.ufl->row(r), d);
        axpy_raw(cache.hr[s], dpre_fr.data(), g.ufr->row(r), d);
    }
    for (std::int64_t k = 0; k < d; ++k) {
        std::size_t s = static_cast<std::size_t>(k);
        (*g.b)[s] += dpre_iog[s];
        (*g.b)[static_cast<std::size_t>(d + k)] += dpre_fl[s] + dpre_fr[s];
        (*g.b)[static_cast<std::size_t>(2 * d + k)] += dpre_iog[static_cast<std::size_t>(d + k)];
        (*g.b)[static_cast<std::size_t>(3 * d + k)] += dpre_iog[static_cast<std::size_t>(2 * d + k)];
    }
}

}  // namespace smbop::nn
