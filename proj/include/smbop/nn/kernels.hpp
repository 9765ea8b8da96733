#pragma once

#include "smbop/nn/tensor.hpp"

namespace smbop::nn {

// Dense kernels with explicit forward passes and hand-written backwards.
// Convention: forward(...) -> output (plus whatever cache it needs), and
// backward(upstream, cache, ...) accumulates += into the gradient arguments,
// so one buffer can collect contributions from several call sites.

// --- linear: y = x W + b ----------------------------------------------------

inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor* b) {
    std::int64_t n = x.rows(), in = x.cols(), out = w.cols();
    if (w.rows() != in || (b && b->numel() != out)) throw ShapeMismatch("linear");
    Tensor y({n, out});
    for (std::int64_t i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        double* yi = y.row(i);
        if (b)
            for (std::int64_t j = 0; j < out; ++j) yi[j] = b->data[static_cast<std::size_t>(j)];
        for (std::int64_t k = 0; k < in; ++k) {
            double xv = xi[k];
            if (xv == 0.0) continue;
            const double* wk = w.row(k);
            for (std::int64_t j = 0; j < out; ++j) yi[j] += xv * wk[j];
        }
    }
    return y;
}

inline void linear_backward(const Tensor& dy, const Tensor& x, const Tensor& w, Tensor& dx,
                            Tensor& dw, Tensor* db) {
    std::int64_t n = x.rows(), in = x.cols(), out = w.cols();
    for (std::int64_t i = 0; i < n; ++i) {
        const double* dyi = dy.row(i);
        const double* xi = x.row(i);
        double* dxi = dx.row(i);
        for (std::int64_t k = 0; k < in; ++k) {
            const double* wk = w.row(k);
            double acc = 0.0;
            for (std::int64_t j = 0; j < out; ++j) acc += dyi[j] * wk[j];
            dxi[k] += acc;
            double xv = xi[k];
            double* dwk = dw.row(k);
            for (std::int64_t j = 0; j < out; ++j) dwk[j] += xv * dyi[j];
        }
        if (db)
            for (std::int64_t j = 0; j < out; ++j) db->data[static_cast<std::size_t>(j)] += dyi[j];
    }
}

// --- layer norm over the last axis -------------------------------------------

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
    Tensor xhat;      // normalized input
    Vec inv_std;      // per row
};

inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         LayerNormCache& cache) {
    std::int64_t n = x.rows(), d = x.cols();
    if (gain.numel() != d || bias.numel() != d) throw ShapeMismatch("layer_norm");
    Tensor y({n, d});
    cache.xhat = Tensor({n, d});
    cache.inv_std.assign(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        double mean = 0.0;
        for (std::int64_t j = 0; j < d; ++j) mean += xi[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::int64_t j = 0; j < d; ++j) var += (xi[j] - mean) * (xi[j] - mean);
        var /= static_cast<double>(d);
        double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        cache.inv_std[static_cast<std::size_t>(i)] = inv;
        double* xh = cache.xhat.row(i);
        double* yi = y.row(i);
        for (std::int64_t j = 0; j < d; ++j) {
            xh[j] = (xi[j] - mean) * inv;
            yi[j] = xh[j] * gain[static_cast<std::size_t>(j)] + bias[static_cast<std::size_t>(j)];
        }
    }
    return y;
}

inline void layer_norm_backward(const Tensor& dy, const LayerNormCache& cache, const Tensor& gain,
                                Tensor& dx, Tensor& dgain, Tensor& dbias) {
    std::int64_t n = dy.rows(), d = dy.cols();
    for (std::int64_t i = 0; i < n; ++i) {
        const double* dyi = dy.row(i);
        const double* xh = cache.xhat.row(i);
        double inv = cache.inv_std[static_cast<std::size_t>(i)];
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            double dxh = dyi[j] * gain[static_cast<std::size_t>(j)];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[j];
            dgain[static_cast<std::size_t>(j)] += dyi[j] * xh[j];
            dbias[static_cast<std::size_t>(j)] += dyi[j];
        }
        double inv_d = 1.0 / static_cast<double>(d);
        double* dxi = dx.row(i);
        for (std::int64_t j = 0; j < d; ++j) {
            double dxh = dyi[j] * gain[static_cast<std::size_t>(j)];
            dxi[j] += inv * (dxh - inv_d * sum_dxhat - xh[j] * inv_d * sum_dxhat_xhat);
        }
    }
}

// --- pointwise ----------------------------------------------------------------

inline Tensor tanh_fw(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = std::tanh(v);
    return y;
}
inline void tanh_backward(const Tensor& dy, const Tensor& y, Tensor& dx) {
    for (std::size_t i = 0; i < y.data.size(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
}

inline Tensor relu_fw(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}
inline void relu_backward(const Tensor& dy, const Tensor& x, Tensor& dx) {
    for (std::size_t i = 0; i < x.data.size(); ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
}

inline Tensor sigmoid_fw(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
    return y;
}
inline void sigmoid_backward(const Tensor& dy, const Tensor& y, Tensor& dx) {
    for (std::size_t i = 0; i < y.data.size(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
}

// --- softmax over the last axis, with an optional row mask --------------------
// Masked entries get probability exactly 0 and receive no gradient.

inline Tensor softmax(const Tensor& x, const std::vector<std::uint8_t>* mask = nullptr) {
    std::int64_t n = x.rows(), d = x.cols();
    if (mask && static_cast<std::int64_t>(mask->size()) != x.numel())
        throw ShapeMismatch("softmax mask");
    Tensor y({n, d});
    for (std::int64_t i = 0; i < n; ++i) {
        const double* xi = x.row(i);
        double* yi = y.row(i);
        auto keep = [&](std::int64_t j) {
            return !mask || (*mask)[static_cast<std::size_t>(i * d + j)] != 0;
        };
        double mx = -1e300;
        for (std::int64_t j = 0; j < d; ++j)
            if (keep(j)) mx = std::max(mx, xi[j]);
        double z = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            yi[j] = keep(j) ? std::exp(xi[j] - mx) : 0.0;
            z += yi[j];
        }
        for (std::int64_t j = 0; j < d; ++j) yi[j] /= z;
    }
    return y;
}

inline void softmax_backward(const Tensor& dy, const Tensor& y, Tensor& dx) {
    std::int64_t n = y.rows(), d = y.cols();
    for (std::int64_t i = 0; i < n; ++i) {
        const double* dyi = dy.row(i);
        const double* yi = y.row(i);
        double inner = 0.0;
        for (std::int64_t j = 0; j < d; ++j) inner += dyi[j] * yi[j];
        double* dxi = dx.row(i);
        for (std::int64_t j = 0; j < d; ++j) dxi[j] += yi[j] * (dyi[j] - inner);
    }
}

// log-softmax of one score vector, numerically safe; used for step scores and
// the search loss
inline Vec log_softmax(const Vec& scores) {
    double mx = -1e300;
    for (double s : scores) mx = std::max(mx, s);
    double z = 0.0;
    for (double s : scores) z += std::exp(s - mx);
    double lz = std::log(z) + mx;
    Vec out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - lz;
    return out;
}

inline void axpy_raw(double a, const double* x, double* y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// --- bilinear scores: S = Z W Z'^T -------------------------------------------
// Scores every ordered pair (i from Z, j from Zr); this is the frontier scorer
// for one binary operation.

inline Tensor bilinear_scores(const Tensor& z, const Tensor& w, const Tensor& zr) {
    std::int64_t n = z.rows(), d = z.cols(), m = zr.rows();
    if (w.rows() != d || w.cols() != d || zr.cols() != d) throw ShapeMismatch("bilinear");
    Tensor zw = linear(z, w, nullptr);  // [n, d]
    Tensor s({n, m});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < m; ++j)
            s.at(i, j) = dot(zw.row(i), zr.row(j), static_cast<std::size_t>(d));
    return s;
}

inline void bilinear_backward(const Tensor& ds, const Tensor& z, const Tensor& w,
                              const Tensor& zr, Tensor& dz, Tensor& dw, Tensor& dzr) {
    std::int64_t n = z.rows(), d = z.cols(), m = zr.rows();
    // dZW = dS Zr ; dZ += dZW W^T ; dW += Z^T dZW ; dZr += dS^T (Z W)
    Tensor dzw({n, d});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < m; ++j) {
            double g = ds.at(i, j);
            if (g == 0.0) continue;
            axpy_raw(g, zr.row(j), dzw.row(i), d);
        }
    Tensor zw = linear(z, w, nullptr);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < m; ++j) {
            double g = ds.at(i, j);
            if (g == 0.0) continue;
            axpy_raw(g, zw.row(i), dzr.row(j), d);
        }
    for (std::int64_t i = 0; i < n; ++i) {
        const double* dzwi = dzw.row(i);
        const double* zi = z.row(i);
        double* dzi = dz.row(i);
        for (std::int64_t k = 0; k < d; ++k) {
            const double* wk = w.row(k);
            double acc = 0.0;
            for (std::int64_t j = 0; j < d; ++j) acc += dzwi[j] * wk[j];
            dzi[k] += acc;
            double* dwk = dw.row(k);
            double zv = zi[k];
            for (std::int64_t j = 0; j < d; ++j) dwk[j] += zv * dzwi[j];
        }
    }
}

// --- two-layer scorer: f(z) = w . tanh(z W) -----------------------------------
// The constant scorer and the re-ranker scorer share this shape.

struct FfnScoreCache {
    Tensor t;  // tanh(Z W), [n, k]
};

inline Vec ffn_score(const Tensor& z, const Tensor& w, const Tensor& v, FfnScoreCache& cache) {
    cache.t = tanh_fw(linear(z, w, nullptr));
    std::int64_t n = z.rows(), k = w.cols();
    if (v.numel() != k) throw ShapeMismatch("ffn_score");
    Vec out(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = dot(cache.t.row(i), v.data.data(),
                                               static_cast<std::size_t>(k));
    return out;
}

inline void ffn_score_backward(const Vec& dscore, const Tensor& z, const Tensor& w,
                               const Tensor& v, const FfnScoreCache& cache, Tensor& dz, Tensor& dw,
                               Tensor& dv) {
    std::int64_t n = z.rows(), k = w.cols();
    Tensor dt({n, k});
    for (std::int64_t i = 0; i < n; ++i) {
        double g = dscore[static_cast<std::size_t>(i)];
        const double* ti = cache.t.row(i);
        double* dti = dt.row(i);
        for (std::int64_t j = 0; j < k; ++j) {
            dv[static_cast<std::size_t>(j)] += g * ti[j];
            dti[j] = g * v[static_cast<std::size_t>(j)] * (1.0 - ti[j] * ti[j]);
        }
    }
    linear_backward(dt, z, w, dz, dw, nullptr);
}

}  // namespace smbop::nn
