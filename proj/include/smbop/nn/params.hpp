#pragma once

#include <fstream>
#include <map>
#include <string>

#include "smbop/nn/tensor.hpp"

namespace smbop::nn {

/// Named parameters, their gradients, and Adam state. One store per model.
///
/// Canonical entry names (d = model dim, H = heads, R = relation tags,
/// i = layer index):
///   enc.tok_embed            token embedding table          [vocab, d]
///   enc.type_embed           table/column type embeddings   [2, d]
///   enc.value_embed          `value` leaf vector            [1, d]
///   enc.star_embed           `*` leaf vector                [1, d]
///   enc.l{i}.wq/wk/wv        encoder attention projections  [d, d]
///   enc.l{i}.rel_k/rel_v     relation embeddings            [R, d/H]
///   enc.l{i}.ln1_g/ln1_b/ln2_g/ln2_b  layer norms           [d]
///   enc.l{i}.w1/b1/w2/b2     feed-forward                   [d,f],[f],[f,d],[d]
///   dec.beam_tf.l{i}.*       beam Transformer (same block fields, no rel_*)
///   dec.rerank_tf.l0.*       re-ranker Transformer layer
///   dec.op_embed             operation embeddings e_l       [ops, d]
///   dec.unary.w.{op}         unary scoring vectors w_u      [1, d]
///   dec.binary.W.{op}        binary scoring matrices W_b    [d, d]
///   dec.lstm.wx/uh/b         unary-op LSTM cell
///   dec.treelstm.wx/u/ufl/ufr/b  binary-op TreeLSTM cell
///   dec.const.W / dec.const.w    DB-constant scorer f_const [d,d],[1,d]
///   dec.rerank.W / dec.rerank.w  re-ranker scorer f_rerank  [d,d],[1,d]
class ParamStore {
  public:
    Tensor& add(const std::string& name, Tensor init) {
        auto [it, fresh] = params_.emplace(name, std::move(init));
        if (!fresh) throw Error("duplicate parameter " + name);
        grads_[name] = Tensor::zeros(it->second.shape);
        m_[name] = Tensor::zeros(it->second.shape);
        v_[name] = Tensor::zeros(it->second.shape);
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    Tensor& p(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw Error("unknown parameter " + name);
        return it->second;
    }
    const Tensor& p(const std::string& name) const {
        return const_cast<ParamStore*>(this)->p(name);
    }

    Tensor& g(const std::string& name) {
        auto it = grads_.find(name);
        if (it == grads_.end()) throw Error("unknown parameter " + name);
        return it->second;
    }

    void zero_grads() {
        for (auto& [name, t] : grads_) t.zero();
    }

    /// grads += scale * buffer; used for the deterministic batch reduction
    void add_scaled_grads(const std::map<std::string, Tensor>& buffer, double scale) {
        for (auto& [name, t] : grads_) {
            const Tensor& o = buffer.at(name);
            for (std::size_t i = 0; i < t.data.size(); ++i) t[i] += scale * o[i];
        }
    }

    std::int64_t step() const { return step_; }

    /// Standard Adam with bias correction; iterates parameters in name order
    /// so updates are reproducible.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        ++step_;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        for (auto& [name, param] : params_) {
            Tensor& grad = grads_[name];
            Tensor& m = m_[name];
            Tensor& v = v_[name];
            for (std::size_t i = 0; i < param.data.size(); ++i) {
                double gi = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                double mhat = m[i] / bc1;
                double vhat = v[i] / bc2;
                param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    const std::map<std::string, Tensor>& params() const { return params_; }

    bool grads_finite() const {
        for (const auto& [name, t] : grads_)
            if (!t.all_finite()) return false;
        return true;
    }

    // --- checkpoint: flat binary map name -> shape + raw f64 values ----------
    // Round-trips bit-exactly. `meta` carries the model config and vocab as a
    // JSON string owned by the caller.

    void save(const std::string& path, const std::string& meta) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path);
        auto put_u64 = [&](std::uint64_t v) {
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        };
        out.write("SMBP", 4);
        put_u64(1);  // version
        put_u64(meta.size());
        out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
        put_u64(params_.size());
        for (const auto& [name, t] : params_) {
            put_u64(name.size());
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            put_u64(t.shape.size());
            for (auto d : t.shape) put_u64(static_cast<std::uint64_t>(d));
            out.write(reinterpret_cast<const char*>(t.data.data()),
                      static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        }
        if (!out) throw Error("write failed: " + path);
    }

    /// Loads parameters saved by save(); meta is returned through `meta_out`.
    /// The store gets fresh optimizer state.
    static ParamStore load(const std::string& path, std::string& meta_out) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open " + path);
        char magic[4];
        in.read(magic, 4);
        if (!in || std::string(magic, 4) != "SMBP") throw ParseError("bad checkpoint magic");
        auto get_u64 = [&]() {
            std::uint64_t v = 0;
            in.read(reinterpret_cast<char*>(&v), sizeof(v));
            return v;
        };
        if (get_u64() != 1) throw ParseError("unsupported checkpoint version");
        meta_out.resize(get_u64());
        in.read(meta_out.data(), static_cast<std::streamsize>(meta_out.size()));
        ParamStore store;
        std::uint64_t count = get_u64();
        for (std::uint64_t k = 0; k < count; ++k) {
            std::string name(get_u64(), '\0');
            in.read(name.data(), static_cast<std::streamsize>(name.size()));
            std::vector<std::int64_t> shape(get_u64());
            for (auto& d : shape) d = static_cast<std::int64_t>(get_u64());
            Tensor t(shape);
            in.read(reinterpret_cast<char*>(t.data.data()),
                    static_cast<std::streamsize>(t.data.size() * sizeof(double)));
            store.add(name, std::move(t));
        }
        if (!in) throw ParseError("truncated checkpoint");
        return store;
    }

  private:
    std::map<std::string, Tensor> params_, grads_, m_, v_;
    std::int64_t step_ = 0;
};

/// Stand-alone gradient buffer mirroring a ParamStore's shapes. Each training
/// example backpropagates into its own buffer; the batch reduction then adds
/// buffers in a fixed example order, which keeps training independent of the
/// thread count.
struct GradStore {
    std::map<std::string, Tensor> grads;

    static GradStore like(const ParamStore& ps) {
        GradStore g;
        for (const auto& [name, t] : ps.params()) g.grads.emplace(name, Tensor::zeros(t.shape));
        return g;
    }

    Tensor& operator[](const std::string& name) {
        auto it = grads.find(name);
        if (it == grads.end()) throw Error("unknown gradient " + name);
        return it->second;
    }

    void zero() {
        for (auto& [name, t] : grads) t.zero();
    }

    bool finite() const {
        for (const auto& [name, t] : grads)
            if (!t.all_finite()) return false;
        return true;
    }
};

}  // namespace smbop::nn
