#pragma once

// Masked MLP backbone. Encoder layers run linear -> activation -> gate; the
// projection head is an ungated linear map whose output is unit-normalized.
// Per-task gates follow HAT semantics: trained as sigmoid(scale * logit),
// binarized when the task ends, accumulated by elementwise max, and used to
// zero gradients of parameters claimed by earlier tasks. Forward passes never
// mask away prior-task neurons; protection is purely gradient-side.

#include <cmath>
#include <string>
#include <vector>

#include "dcnet/errors.hpp"
#include "dcnet/io.hpp"
#include "dcnet/numerics.hpp"

namespace dcnet {

enum class Activation { tanh_fn, relu_fn };

inline Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::tanh_fn;
    if (name == "relu") return Activation::relu_fn;
    throw configuration_error("unknown activation: " + name);
}

inline std::string activation_name(Activation a) {
    return a == Activation::tanh_fn ? "tanh" : "relu";
}

struct NetworkSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_widths;
    std::size_t feature_dim = 512;
    std::size_t embed_dim = 256;
    Activation activation = Activation::tanh_fn;

    // Encoder layer widths, last one producing the feature vector. All of
    // these are gated; the projection head is not.
    std::vector<std::size_t> encoder_widths() const {
        std::vector<std::size_t> w = hidden_widths;
        w.push_back(feature_dim);
        return w;
    }

    void validate() const {
        if (input_dim < 1 || feature_dim < 1 || embed_dim < 1)
            throw configuration_error("network spec: all dims must be >= 1");
        for (std::size_t h : hidden_widths)
            if (h < 1) throw configuration_error("network spec: hidden width must be >= 1");
    }

    bool operator==(const NetworkSpec& o) const {
        return input_dim == o.input_dim && hidden_widths == o.hidden_widths &&
               feature_dim == o.feature_dim && embed_dim == o.embed_dim &&
               activation == o.activation;
    }
};

struct ParamTensor {
    int layer_id = 0;
    Mat weights;  // out x in
    Vec bias;
};

struct MaskState {
    std::vector<Vec> gate_logits;  // e_l for the task in progress
    std::vector<Vec> accumulated;  // alpha^{<t}_l, entries in {0,1}
    double scale = 1.0;            // current anneal scale s
};

// Annealing schedule for the gate sigmoid scale: rises linearly from
// 1/s_max at progress 0 to s_max at progress 1.
inline double anneal_scale(double epoch_progress, double s_max) {
    if (!(s_max >= 1.0)) throw configuration_error("anneal_scale: s_max must be >= 1");
    const double p = std::min(1.0, std::max(0.0, epoch_progress));
    return 1.0 / s_max + (s_max - 1.0 / s_max) * p;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Gate values sigma(scale * logit) for every encoder layer.
inline std::vector<Vec> soft_gates(const MaskState& mask) {
    std::vector<Vec> g(mask.gate_logits.size());
    for (std::size_t l = 0; l < g.size(); ++l) {
        g[l].resize(mask.gate_logits[l].size());
        for (std::size_t i = 0; i < g[l].size(); ++i)
            g[l][i] = sigmoid(mask.scale * mask.gate_logits[l][i]);
    }
    return g;
}

// Threshold at 0.5, i.e. logit >= 0.
inline std::vector<Vec> binarize_gates(const std::vector<Vec>& gate_logits) {
    std::vector<Vec> b(gate_logits.size());
    for (std::size_t l = 0; l < b.size(); ++l) {
        b[l].resize(gate_logits[l].size());
        for (std::size_t i = 0; i < b[l].size(); ++i)
            b[l][i] = gate_logits[l][i] >= 0.0 ? 1.0 : 0.0;
    }
    return b;
}

// alpha^{<t} = max(alpha^{<t-1}, alpha^{t-1}), elementwise.
inline MaskState accumulate(const MaskState& prev, const std::vector<Vec>& binarized) {
    if (prev.accumulated.size() != binarized.size())
        throw configuration_error("accumulate: layer count mismatch");
    MaskState out = prev;
    for (std::size_t l = 0; l < binarized.size(); ++l) {
        if (out.accumulated[l].size() != binarized[l].size())
            throw configuration_error("accumulate: layer width mismatch");
        for (std::size_t i = 0; i < binarized[l].size(); ++i)
            out.accumulated[l][i] = std::max(out.accumulated[l][i], binarized[l][i]);
    }
    return out;
}

inline double saturation_fraction(const std::vector<Vec>& accumulated) {
    double ones = 0.0, total = 0.0;
    for (const auto& layer : accumulated) {
        for (double v : layer) ones += v;
        total += static_cast<double>(layer.size());
    }
    return total > 0.0 ? ones / total : 0.0;
}

struct ForwardTrace {
    Vec input;
    std::vector<Vec> pre_act;   // a_l
    std::vector<Vec> post_act;  // h_l, before gating
    std::vector<Vec> gated;     // h'_l = g_l .* h_l
    Vec features;               // gated output of the last encoder layer
    Vec embed_raw;              // pre-normalization projection output
    double embed_norm = 0.0;
    Vec embedding;              // unit norm
};

struct ParamGrads {
    std::vector<Mat> enc_w;
    std::vector<Vec> enc_b;
    Mat proj_w;
    Vec proj_b;
    std::vector<Vec> gate;  // dL / d(gate value), per encoder layer

    void scale_all(double s) {
        for (auto& m : enc_w)
            for (double& x : m.data) x *= s;
        for (auto& v : enc_b)
            for (double& x : v) x *= s;
        for (double& x : proj_w.data) x *= s;
        for (double& x : proj_b) x *= s;
        for (auto& v : gate)
            for (double& x : v) x *= s;
    }

    void add(const ParamGrads& o) {
        for (std::size_t l = 0; l < enc_w.size(); ++l) {
            for (std::size_t k = 0; k < enc_w[l].data.size(); ++k)
                enc_w[l].data[k] += o.enc_w[l].data[k];
            for (std::size_t k = 0; k < enc_b[l].size(); ++k) enc_b[l][k] += o.enc_b[l][k];
            for (std::size_t k = 0; k < gate[l].size(); ++k) gate[l][k] += o.gate[l][k];
        }
        for (std::size_t k = 0; k < proj_w.data.size(); ++k)
            proj_w.data[k] += o.proj_w.data[k];
        for (std::size_t k = 0; k < proj_b.size(); ++k) proj_b[k] += o.proj_b[k];
    }
};

class MaskedNetwork {
public:
    MaskedNetwork() = default;

    MaskedNetwork(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
        spec_.validate();
        const auto widths = spec_.encoder_widths();
        std::size_t in = spec_.input_dim;
        for (std::size_t l = 0; l < widths.size(); ++l) {
            enc_.push_back(init_layer(static_cast<int>(l), widths[l], in, seed));
            in = widths[l];
        }
        proj_ = init_layer(-1, spec_.embed_dim, spec_.feature_dim, seed);
    }

    const NetworkSpec& spec() const { return spec_; }
    std::size_t encoder_layers() const { return enc_.size(); }
    std::vector<ParamTensor>& encoder() { return enc_; }
    const std::vector<ParamTensor>& encoder() const { return enc_; }
    ParamTensor& projection() { return proj_; }
    const ParamTensor& projection() const { return proj_; }

    // Fresh per-task mask state: seeded gate logits, empty accumulation.
    MaskState fresh_mask(std::uint64_t seed, int task_id, double s_max) const {
        MaskState m;
        m.scale = s_max;
        const auto widths = spec_.encoder_widths();
        for (std::size_t l = 0; l < widths.size(); ++l) {
            RngStream rng(seed, stream_id(0x6A7E5u, static_cast<std::uint64_t>(task_id), l));
            Vec e(widths[l]);
            for (double& x : e) x = rng.uniform(-1.0, 1.0);
            m.gate_logits.push_back(std::move(e));
            m.accumulated.push_back(Vec(widths[l], 0.0));
        }
        return m;
    }

    ForwardTrace forward(const Vec& x, const std::vector<Vec>& gates) const {
        if (x.size() != spec_.input_dim)
            throw configuration_error("forward: input dimension mismatch");
        if (gates.size() != enc_.size())
            throw configuration_error("forward: gate layer count mismatch");
        ForwardTrace tr;
        tr.input = x;
        const Vec* cur = &tr.input;
        for (std::size_t l = 0; l < enc_.size(); ++l) {
            if (gates[l].size() != enc_[l].bias.size())
                throw configuration_error("forward: gate width mismatch at layer " +
                                          std::to_string(l));
            Vec a = matvec(enc_[l].weights, *cur);
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += enc_[l].bias[i];
            Vec h(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) h[i] = activate(a[i]);
            Vec hg(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) hg[i] = gates[l][i] * h[i];
            tr.pre_act.push_back(std::move(a));
            tr.post_act.push_back(std::move(h));
            tr.gated.push_back(std::move(hg));
            cur = &tr.gated.back();
        }
        tr.features = tr.gated.back();
        tr.embed_raw = matvec(proj_.weights, tr.features);
        for (std::size_t i = 0; i < tr.embed_raw.size(); ++i) tr.embed_raw[i] += proj_.bias[i];
        tr.embed_norm = norm2(tr.embed_raw);
        if (!(tr.embed_norm > 0.0))
            throw degenerate_input_error("forward: zero-norm projection output");
        tr.embedding.resize(tr.embed_raw.size());
        for (std::size_t i = 0; i < tr.embed_raw.size(); ++i)
            tr.embedding[i] = tr.embed_raw[i] / tr.embed_norm;
        return tr;
    }

    ParamGrads zero_grads() const {
        ParamGrads g;
        for (const auto& p : enc_) {
            g.enc_w.emplace_back(p.weights.rows, p.weights.cols);
            g.enc_b.emplace_back(p.bias.size(), 0.0);
            g.gate.emplace_back(p.bias.size(), 0.0);
        }
        g.proj_w = Mat(proj_.weights.rows, proj_.weights.cols);
        g.proj_b = Vec(proj_.bias.size(), 0.0);
        return g;
    }

    // Backpropagates a gradient with respect to the unit embedding through
    // the normalization, the projection, and every gated encoder layer.
    // Output gate entries are dL/d(gate value); the sigmoid/scale chain to
    // logits is applied by the caller.
    ParamGrads backward(const ForwardTrace& tr, const std::vector<Vec>& gates,
                        const Vec& dL_dz) const {
        ParamGrads g = zero_grads();
        accumulate_backward(tr, gates, dL_dz, g);
        return g;
    }

    // Adds one sample's contribution into running grads (batch averaging is
    // the caller's responsibility).
    void accumulate_backward(const ForwardTrace& tr, const std::vector<Vec>& gates,
                             const Vec& dL_dz, ParamGrads& g) const {
        const std::size_t ed = spec_.embed_dim;
        if (dL_dz.size() != ed) throw configuration_error("backward: embedding grad mismatch");
        // Through z = z_raw / |z_raw|.
        const double zdg = dot(tr.embedding, dL_dz);
        Vec d_raw(ed);
        for (std::size_t i = 0; i < ed; ++i)
            d_raw[i] = (dL_dz[i] - tr.embedding[i] * zdg) / tr.embed_norm;
        // Projection layer.
        const Vec& f = tr.features;
        for (std::size_t i = 0; i < ed; ++i) {
            g.proj_b[i] += d_raw[i];
            double* row = g.proj_w.data.data() + i * f.size();
            for (std::size_t j = 0; j < f.size(); ++j) row[j] += d_raw[i] * f[j];
        }
        Vec d_gated(f.size(), 0.0);
        for (std::size_t j = 0; j < f.size(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < ed; ++i) s += proj_.weights(i, j) * d_raw[i];
            d_gated[j] = s;
        }
        // Encoder layers, last to first.
        for (std::size_t li = enc_.size(); li-- > 0;) {
            const Vec& h = tr.post_act[li];
            const Vec& a = tr.pre_act[li];
            const std::size_t width = h.size();
            Vec d_act(width);
            for (std::size_t i = 0; i < width; ++i) {
                g.gate[li][i] += h[i] * d_gated[i];
                d_act[i] = gates[li][i] * d_gated[i] * activate_deriv(a[i], h[i]);
            }
            const Vec& layer_in = (li == 0) ? tr.input : tr.gated[li - 1];
            for (std::size_t i = 0; i < width; ++i) {
                g.enc_b[li][i] += d_act[i];
                double* row = g.enc_w[li].data.data() + i * layer_in.size();
                for (std::size_t j = 0; j < layer_in.size(); ++j)
                    row[j] += d_act[i] * layer_in[j];
            }
            if (li > 0) {
                Vec next(layer_in.size(), 0.0);
                for (std::size_t j = 0; j < layer_in.size(); ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < width; ++i)
                        s += enc_[li].weights(i, j) * d_act[i];
                    next[j] = s;
                }
                d_gated = std::move(next);
            }
        }
    }

    // Flat parameter views for finite-difference testing.
    Vec flatten_params() const {
        Vec v;
        for (const auto& p : enc_) {
            v.insert(v.end(), p.weights.data.begin(), p.weights.data.end());
            v.insert(v.end(), p.bias.begin(), p.bias.end());
        }
        v.insert(v.end(), proj_.weights.data.begin(), proj_.weights.data.end());
        v.insert(v.end(), proj_.bias.begin(), proj_.bias.end());
        return v;
    }

    void set_params(const Vec& v) {
        std::size_t k = 0;
        auto take = [&v, &k](double& dst) {
            if (k >= v.size()) throw configuration_error("set_params: vector too short");
            dst = v[k++];
        };
        for (auto& p : enc_) {
            for (double& x : p.weights.data) take(x);
            for (double& x : p.bias) take(x);
        }
        for (double& x : proj_.weights.data) take(x);
        for (double& x : proj_.bias) take(x);
        if (k != v.size()) throw configuration_error("set_params: vector too long");
    }

    Vec flatten_grads(const ParamGrads& g) const {
        Vec v;
        for (std::size_t l = 0; l < enc_.size(); ++l) {
            v.insert(v.end(), g.enc_w[l].data.begin(), g.enc_w[l].data.end());
            v.insert(v.end(), g.enc_b[l].begin(), g.enc_b[l].end());
        }
        v.insert(v.end(), g.proj_w.data.begin(), g.proj_w.data.end());
        v.insert(v.end(), g.proj_b.begin(), g.proj_b.end());
        return v;
    }

    void save(BinWriter& w) const {
        w.u64(spec_.input_dim);
        w.u64(spec_.hidden_widths.size());
        for (std::size_t h : spec_.hidden_widths) w.u64(h);
        w.u64(spec_.feature_dim);
        w.u64(spec_.embed_dim);
        w.str(activation_name(spec_.activation));
        for (const auto& p : enc_) {
            w.vec(p.weights.data);
            w.vec(p.bias);
        }
        w.vec(proj_.weights.data);
        w.vec(proj_.bias);
    }

    static MaskedNetwork load(BinReader& r) {
        NetworkSpec spec;
        spec.input_dim = r.u64();
        const std::uint64_t nh = r.u64();
        for (std::uint64_t i = 0; i < nh; ++i) spec.hidden_widths.push_back(r.u64());
        spec.feature_dim = r.u64();
        spec.embed_dim = r.u64();
        spec.activation = activation_from_name(r.str());
        MaskedNetwork net(spec, 0);
        for (auto& p : net.enc_) {
            p.weights.data = r.vec();
            p.bias = r.vec();
            if (p.weights.data.size() != p.weights.rows * p.weights.cols)
                throw checkpoint_error("network load: weight shape mismatch");
        }
        net.proj_.weights.data = r.vec();
        net.proj_.bias = r.vec();
        if (net.proj_.weights.data.size() != net.proj_.weights.rows * net.proj_.weights.cols)
            throw checkpoint_error("network load: projection shape mismatch");
        return net;
    }

private:
    ParamTensor init_layer(int layer_id, std::size_t out, std::size_t in,
                           std::uint64_t seed) const {
        ParamTensor p;
        p.layer_id = layer_id;
        p.weights = Mat(out, in);
        p.bias = Vec(out, 0.0);
        RngStream rng(seed, stream_id(0x1417u, static_cast<std::uint64_t>(layer_id + 1)));
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& x : p.weights.data) x = rng.uniform(-bound, bound);
        return p;
    }

    double activate(double a) const {
        return spec_.activation == Activation::tanh_fn ? std::tanh(a) : (a > 0.0 ? a : 0.0);
    }
    // tanh' expressed through the cached output; relu' through the input.
    double activate_deriv(double a, double h) const {
        return spec_.activation == Activation::tanh_fn ? 1.0 - h * h : (a > 0.0 ? 1.0 : 0.0);
    }

    NetworkSpec spec_;
    std::vector<ParamTensor> enc_;
    ParamTensor proj_;
};

// HAT gradient gating: the gradient of w_{ij,l} is zeroed iff the adjacent
// accumulated mask entries are both 1; the input layer uses the convention
// alpha^{<t}_{j,0} = 1, and biases follow their neuron's mask. Projection
// and gate gradients pass through untouched.
inline void gate_gradients(ParamGrads& g, const std::vector<Vec>& accumulated) {
    if (g.enc_w.size() != accumulated.size())
        throw configuration_error("gate_gradients: layer count mismatch");
    for (std::size_t l = 0; l < g.enc_w.size(); ++l) {
        const Vec& out_mask = accumulated[l];
        for (std::size_t i = 0; i < g.enc_w[l].rows; ++i) {
            for (std::size_t j = 0; j < g.enc_w[l].cols; ++j) {
                const double in_mask = (l == 0) ? 1.0 : accumulated[l - 1][j];
                g.enc_w[l](i, j) *= 1.0 - std::min(out_mask[i], in_mask);
            }
            g.enc_b[l][i] *= 1.0 - out_mask[i];
        }
    }
}

// dL/d(logit) from dL/d(gate value) through gate = sigmoid(scale * logit).
inline std::vector<Vec> gate_value_to_logit_grads(const std::vector<Vec>& gate_values,
                                                  double scale,
                                                  const std::vector<Vec>& d_gate) {
    std::vector<Vec> out(d_gate.size());
    for (std::size_t l = 0; l < d_gate.size(); ++l) {
        out[l].resize(d_gate[l].size());
        for (std::size_t i = 0; i < d_gate[l].size(); ++i) {
            const double gv = gate_values[l][i];
            out[l][i] = scale * gv * (1.0 - gv) * d_gate[l][i];
        }
    }
    return out;
}

// Plain SGD with momentum. Velocities start at zero, so a parameter whose
// gradient is identically zero is never touched (bit-exact freezing).
class SgdOptimizer {
public:
    SgdOptimizer(const MaskedNetwork& net, const MaskState& mask, double momentum)
        : momentum_(momentum), vel_(net.zero_grads()) {
        gate_vel_.resize(mask.gate_logits.size());
        for (std::size_t l = 0; l < gate_vel_.size(); ++l)
            gate_vel_[l].assign(mask.gate_logits[l].size(), 0.0);
    }

    void step(MaskedNetwork& net, const ParamGrads& g, double lr) {
        auto& enc = net.encoder();
        for (std::size_t l = 0; l < enc.size(); ++l) {
            update(enc[l].weights.data, vel_.enc_w[l].data, g.enc_w[l].data, lr);
            update(enc[l].bias, vel_.enc_b[l], g.enc_b[l], lr);
        }
        update(net.projection().weights.data, vel_.proj_w.data, g.proj_w.data, lr);
        update(net.projection().bias, vel_.proj_b, g.proj_b, lr);
    }

    void step_gates(MaskState& mask, const std::vector<Vec>& logit_grads, double lr) {
        for (std::size_t l = 0; l < mask.gate_logits.size(); ++l)
            update(mask.gate_logits[l], gate_vel_[l], logit_grads[l], lr);
    }

private:
    void update(std::vector<double>& p, std::vector<double>& v,
                const std::vector<double>& g, double lr) {
        for (std::size_t k = 0; k < p.size(); ++k) {
            v[k] = momentum_ * v[k] + g[k];
            p[k] -= lr * v[k];
        }
    }

    double momentum_;
    ParamGrads vel_;
    std::vector<Vec> gate_vel_;
};

// Cosine decay from lr0 to 0 across one task's phase.
inline double cosine_lr(double lr0, std::size_t epoch, std::size_t total_epochs) {
    if (total_epochs == 0) return lr0;
    const double p = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return lr0 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * std::min(1.0, p)));
}

}  // namespace dcnet
