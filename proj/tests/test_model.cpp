#include <cmath>
#include <cstdio>

#include <gtest/gtest.h>

#include "dcnet/model.hpp"

using namespace dcnet;

namespace {

NetworkSpec small_spec() {
    NetworkSpec s;
    s.input_dim = 3;
    s.hidden_widths = {5};
    s.feature_dim = 4;
    s.embed_dim = 3;
    s.activation = Activation::tanh_fn;
    return s;
}

std::vector<Vec> ones_gates(const NetworkSpec& s) {
    std::vector<Vec> g;
    for (std::size_t w : s.encoder_widths()) g.emplace_back(w, 1.0);
    return g;
}

// A 2-in 2-out network with identity weights everywhere, so the forward
// pass is checkable by hand.
MaskedNetwork identity_net() {
    NetworkSpec s;
    s.input_dim = 2;
    s.hidden_widths = {};
    s.feature_dim = 2;
    s.embed_dim = 2;
    MaskedNetwork net(s, 1);
    auto& enc = net.encoder()[0];
    enc.weights(0, 0) = 1.0; enc.weights(0, 1) = 0.0;
    enc.weights(1, 0) = 0.0; enc.weights(1, 1) = 1.0;
    enc.bias = {0.0, 0.0};
    auto& proj = net.projection();
    proj.weights(0, 0) = 1.0; proj.weights(0, 1) = 0.0;
    proj.weights(1, 0) = 0.0; proj.weights(1, 1) = 1.0;
    proj.bias = {0.0, 0.0};
    return net;
}

}  // namespace

TEST(AnnealScale, LinearRampWithClamping) {
    const double s_max = 400.0;
    EXPECT_DOUBLE_EQ(anneal_scale(0.0, s_max), 1.0 / s_max);
    EXPECT_DOUBLE_EQ(anneal_scale(1.0, s_max), s_max);
    EXPECT_DOUBLE_EQ(anneal_scale(0.5, s_max),
                     1.0 / s_max + (s_max - 1.0 / s_max) * 0.5);
    EXPECT_DOUBLE_EQ(anneal_scale(-3.0, s_max), 1.0 / s_max);
    EXPECT_DOUBLE_EQ(anneal_scale(7.0, s_max), s_max);
    EXPECT_THROW(anneal_scale(0.5, 0.5), configuration_error);
}

TEST(Gates, SoftBinarizeAccumulateSaturation) {
    MaskState m;
    m.gate_logits = {{0.0, 2.0, -2.0}};
    m.accumulated = {{0.0, 0.0, 0.0}};
    m.scale = 3.0;
    const auto g = soft_gates(m);
    EXPECT_DOUBLE_EQ(g[0][0], 0.5);
    EXPECT_DOUBLE_EQ(g[0][1], 1.0 / (1.0 + std::exp(-6.0)));
    EXPECT_DOUBLE_EQ(g[0][2], 1.0 / (1.0 + std::exp(6.0)));

    // Threshold is logit >= 0, so an exactly-zero logit claims its unit.
    const auto b = binarize_gates({{-0.1, 0.0, 0.1}});
    EXPECT_EQ(b[0][0], 0.0);
    EXPECT_EQ(b[0][1], 1.0);
    EXPECT_EQ(b[0][2], 1.0);

    MaskState prev;
    prev.accumulated = {{0.0, 1.0, 0.0}};
    prev.gate_logits = {{0.0, 0.0, 0.0}};
    const MaskState acc = accumulate(prev, {{1.0, 0.0, 0.0}});
    EXPECT_EQ(acc.accumulated[0][0], 1.0);
    EXPECT_EQ(acc.accumulated[0][1], 1.0);
    EXPECT_EQ(acc.accumulated[0][2], 0.0);
    EXPECT_THROW(accumulate(prev, {{1.0, 0.0}}), configuration_error);
    EXPECT_THROW(accumulate(prev, {{1.0}, {0.0}}), configuration_error);

    EXPECT_DOUBLE_EQ(saturation_fraction({{1.0, 0.0}, {1.0, 1.0}}), 0.75);
    EXPECT_DOUBLE_EQ(saturation_fraction({}), 0.0);
}

TEST(Forward, HandComputedTinyNet) {
    const MaskedNetwork net = identity_net();
    const Vec x{0.3, -0.4};
    const auto tr = net.forward(x, {{1.0, 1.0}});
    const double h0 = std::tanh(0.3), h1 = std::tanh(-0.4);
    EXPECT_DOUBLE_EQ(tr.pre_act[0][0], 0.3);
    EXPECT_DOUBLE_EQ(tr.post_act[0][1], h1);
    EXPECT_DOUBLE_EQ(tr.features[0], h0);
    const double n = std::sqrt(h0 * h0 + h1 * h1);
    EXPECT_DOUBLE_EQ(tr.embed_norm, n);
    EXPECT_DOUBLE_EQ(tr.embedding[0], h0 / n);
    EXPECT_DOUBLE_EQ(tr.embedding[1], h1 / n);

    // A half-open gate scales its unit's feature before the projection.
    const auto tg = net.forward(x, {{0.5, 1.0}});
    EXPECT_DOUBLE_EQ(tg.gated[0][0], 0.5 * h0);
    EXPECT_DOUBLE_EQ(tg.post_act[0][0], h0);
    const double ng = std::sqrt(0.25 * h0 * h0 + h1 * h1);
    EXPECT_DOUBLE_EQ(tg.embedding[1], h1 / ng);
}

TEST(Forward, EmbeddingIsUnitNorm) {
    const NetworkSpec s = small_spec();
    const MaskedNetwork net(s, 42);
    const MaskState m = net.fresh_mask(42, 0, 25.0);
    const auto tr = net.forward({0.2, -1.1, 0.7}, soft_gates(m));
    EXPECT_NEAR(norm2(tr.embedding), 1.0, 1e-12);
    EXPECT_EQ(tr.embedding.size(), s.embed_dim);
    EXPECT_EQ(tr.features.size(), s.feature_dim);
}

TEST(Forward, ValidatesShapesAndDegeneracy) {
    const NetworkSpec s = small_spec();
    MaskedNetwork net(s, 42);
    const auto g = ones_gates(s);
    EXPECT_THROW(net.forward({1.0, 2.0}, g), configuration_error);
    EXPECT_THROW(net.forward({1.0, 2.0, 3.0}, {g[0]}), configuration_error);
    auto bad = g;
    bad[1].pop_back();
    EXPECT_THROW(net.forward({1.0, 2.0, 3.0}, bad), configuration_error);

    for (double& w : net.projection().weights.data) w = 0.0;
    EXPECT_THROW(net.forward({1.0, 2.0, 3.0}, g), degenerate_input_error);
}

TEST(Backward, MatchesFiniteDifferencesOnParams) {
    const NetworkSpec s = small_spec();
    MaskedNetwork net(s, 7);
    RngStream rng(7, stream_id(0x7E57u, 1));
    const Vec x = rng.normal_vec(s.input_dim);
    Vec c = rng.normal_vec(s.embed_dim);
    std::vector<Vec> gates;
    for (std::size_t w : s.encoder_widths()) {
        Vec g(w);
        for (double& v : g) v = rng.uniform(0.05, 0.95);
        gates.push_back(std::move(g));
    }
    const auto tr = net.forward(x, gates);
    const Vec analytic = net.flatten_grads(net.backward(tr, gates, c));
    auto f = [&](const Vec& p) {
        MaskedNetwork probe = net;
        probe.set_params(p);
        return dot(c, probe.forward(x, gates).embedding);
    };
    const auto rep = grad_check(f, net.flatten_params(), analytic);
    EXPECT_LT(rep.max_relative_error, 1e-6)
        << "worst coordinate " << rep.worst_coordinate << ": analytic "
        << rep.analytic << " vs numeric " << rep.numeric;
}

TEST(Backward, MatchesFiniteDifferencesOnGateValues) {
    const NetworkSpec s = small_spec();
    const MaskedNetwork net(s, 9);
    RngStream rng(9, stream_id(0x7E57u, 2));
    const Vec x = rng.normal_vec(s.input_dim);
    const Vec c = rng.normal_vec(s.embed_dim);
    std::vector<Vec> gates;
    Vec flat;
    for (std::size_t w : s.encoder_widths()) {
        Vec g(w);
        for (double& v : g) {
            v = rng.uniform(0.1, 0.9);
            flat.push_back(v);
        }
        gates.push_back(std::move(g));
    }
    const auto tr = net.forward(x, gates);
    const ParamGrads pg = net.backward(tr, gates, c);
    Vec analytic;
    for (const auto& layer : pg.gate)
        analytic.insert(analytic.end(), layer.begin(), layer.end());
    auto unflatten = [&](const Vec& v) {
        std::vector<Vec> g;
        std::size_t k = 0;
        for (std::size_t w : s.encoder_widths()) {
            Vec layer(w);
            for (double& e : layer) e = v[k++];
            g.push_back(std::move(layer));
        }
        return g;
    };
    auto f = [&](const Vec& v) { return dot(c, net.forward(x, unflatten(v)).embedding); };
    const auto rep = grad_check(f, flat, analytic);
    EXPECT_LT(rep.max_relative_error, 1e-6);
}

TEST(Backward, ReluFiniteDifferences) {
    NetworkSpec s = small_spec();
    s.activation = Activation::relu_fn;
    MaskedNetwork net(s, 21);
    // Bias every unit away from the relu kink so the finite-difference
    // probe never crosses it.
    for (auto& layer : net.encoder())
        for (double& b : layer.bias) b = 0.6;
    RngStream rng(21, stream_id(0x7E57u, 3));
    const Vec x = rng.normal_vec(s.input_dim);
    const Vec c = rng.normal_vec(s.embed_dim);
    const auto gates = ones_gates(s);
    const auto tr = net.forward(x, gates);
    for (const auto& a : tr.pre_act)
        for (double v : a) ASSERT_GT(std::abs(v), 1e-3);
    const Vec analytic = net.flatten_grads(net.backward(tr, gates, c));
    auto f = [&](const Vec& p) {
        MaskedNetwork probe = net;
        probe.set_params(p);
        return dot(c, probe.forward(x, gates).embedding);
    };
    const auto rep = grad_check(f, net.flatten_params(), analytic);
    EXPECT_LT(rep.max_relative_error, 1e-6);
}

TEST(GateGradients, HandMaskPattern) {
    // Two 2-wide layers; masks out = {1,0} then {0,1}, in-mask of layer 0
    // is the all-ones input convention, layer 1 sees layer 0's mask {1,0}.
    NetworkSpec s;
    s.input_dim = 2;
    s.hidden_widths = {2};
    s.feature_dim = 2;
    s.embed_dim = 2;
    const MaskedNetwork net(s, 3);
    ParamGrads g = net.zero_grads();
    for (auto& m : g.enc_w)
        for (double& v : m.data) v = 1.0;
    for (auto& b : g.enc_b)
        for (double& v : b) v = 1.0;
    for (double& v : g.proj_w.data) v = 1.0;
    for (auto& layer : g.gate)
        for (double& v : layer) v = 1.0;
    gate_gradients(g, {{1.0, 0.0}, {0.0, 1.0}});
    EXPECT_EQ(g.enc_w[0](0, 0), 0.0);
    EXPECT_EQ(g.enc_w[0](0, 1), 0.0);
    EXPECT_EQ(g.enc_w[0](1, 0), 1.0);
    EXPECT_EQ(g.enc_b[0][0], 0.0);
    EXPECT_EQ(g.enc_b[0][1], 1.0);
    EXPECT_EQ(g.enc_w[1](0, 0), 1.0);  // out free
    EXPECT_EQ(g.enc_w[1](1, 0), 0.0);  // out claimed, in claimed
    EXPECT_EQ(g.enc_w[1](1, 1), 1.0);  // out claimed, in free
    EXPECT_EQ(g.enc_b[1][0], 1.0);
    EXPECT_EQ(g.enc_b[1][1], 0.0);
    // Projection and gate-value grads pass through untouched.
    for (double v : g.proj_w.data) EXPECT_EQ(v, 1.0);
    for (const auto& layer : g.gate)
        for (double v : layer) EXPECT_EQ(v, 1.0);
    EXPECT_THROW(gate_gradients(g, {{1.0, 0.0}}), configuration_error);
}

TEST(GateGradients, LogitChainRule) {
    const auto out = gate_value_to_logit_grads({{0.5}}, 3.0, {{2.0}});
    EXPECT_DOUBLE_EQ(out[0][0], 3.0 * 0.25 * 2.0);
}

TEST(Optimizer, MomentumSequenceAndBitExactFreeze) {
    NetworkSpec s;
    s.input_dim = 1;
    s.hidden_widths = {};
    s.feature_dim = 1;
    s.embed_dim = 1;
    MaskedNetwork net(s, 5);
    const MaskState m = net.fresh_mask(5, 0, 10.0);
    SgdOptimizer opt(net, m, 0.9);
    const double w0 = net.encoder()[0].weights(0, 0);
    const double pw0 = net.projection().weights(0, 0);
    ParamGrads g = net.zero_grads();
    g.enc_w[0](0, 0) = 1.0;  // projection grad stays zero
    opt.step(net, g, 1.0);
    EXPECT_DOUBLE_EQ(net.encoder()[0].weights(0, 0), w0 - 1.0);
    opt.step(net, g, 1.0);
    EXPECT_DOUBLE_EQ(net.encoder()[0].weights(0, 0), w0 - 1.0 - 1.9);
    opt.step(net, g, 1.0);
    EXPECT_DOUBLE_EQ(net.encoder()[0].weights(0, 0), w0 - 1.0 - 1.9 - 2.71);
    // Zero gradient with zero velocity never touches the parameter.
    EXPECT_EQ(net.projection().weights(0, 0), pw0);
}

TEST(Optimizer, StepGatesUpdatesLogits) {
    NetworkSpec s;
    s.input_dim = 1;
    s.hidden_widths = {};
    s.feature_dim = 2;
    s.embed_dim = 1;
    const MaskedNetwork net(s, 5);
    MaskState m = net.fresh_mask(5, 0, 10.0);
    SgdOptimizer opt(net, m, 0.0);
    const Vec before = m.gate_logits[0];
    opt.step_gates(m, {{0.5, 0.0}}, 0.1);
    EXPECT_DOUBLE_EQ(m.gate_logits[0][0], before[0] - 0.05);
    EXPECT_EQ(m.gate_logits[0][1], before[1]);
}

TEST(FreshMask, DeterministicPerSeedAndTask) {
    const NetworkSpec s = small_spec();
    const MaskedNetwork net(s, 11);
    const MaskState a = net.fresh_mask(11, 2, 25.0);
    const MaskState b = net.fresh_mask(11, 2, 25.0);
    const MaskState c = net.fresh_mask(11, 3, 25.0);
    ASSERT_EQ(a.gate_logits.size(), 2u);
    EXPECT_EQ(a.gate_logits[0].size(), 5u);
    EXPECT_EQ(a.gate_logits[1].size(), 4u);
    EXPECT_DOUBLE_EQ(a.scale, 25.0);
    for (std::size_t l = 0; l < a.gate_logits.size(); ++l) {
        for (std::size_t i = 0; i < a.gate_logits[l].size(); ++i) {
            EXPECT_EQ(a.gate_logits[l][i], b.gate_logits[l][i]);
            EXPECT_EQ(a.accumulated[l][i], 0.0);
        }
    }
    bool differs = false;
    for (std::size_t i = 0; i < a.gate_logits[0].size() && !differs; ++i)
        differs = a.gate_logits[0][i] != c.gate_logits[0][i];
    EXPECT_TRUE(differs);
}

TEST(Serialization, RoundTripsBitIdentically) {
    const NetworkSpec s = small_spec();
    const MaskedNetwork net(s, 13);
    const std::string path = ::testing::TempDir() + "dcnet_model_rt.bin";
    {
        BinWriter w;
        net.save(w);
        w.save(path, "DCNETNW1");
    }
    BinReader r = BinReader::load(path, "DCNETNW1");
    const MaskedNetwork back = MaskedNetwork::load(r);
    EXPECT_TRUE(r.done());
    EXPECT_TRUE(back.spec() == net.spec());
    const Vec pa = net.flatten_params();
    const Vec pb = back.flatten_params();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i], pb[i]);
    std::remove(path.c_str());
}

TEST(CosineLr, EndpointsAndMidpoint) {
    EXPECT_DOUBLE_EQ(cosine_lr(0.1, 0, 10), 0.1);
    EXPECT_NEAR(cosine_lr(0.1, 5, 10), 0.05, 1e-15);
    EXPECT_NEAR(cosine_lr(0.1, 10, 10), 0.0, 1e-15);
    EXPECT_NEAR(cosine_lr(0.1, 25, 10), 0.0, 1e-15);  // past the end clamps
    EXPECT_DOUBLE_EQ(cosine_lr(0.1, 3, 0), 0.1);
}

TEST(SpecHelpers, ValidationAndActivationNames) {
    EXPECT_EQ(activation_name(activation_from_name("tanh")), "tanh");
    EXPECT_EQ(activation_name(activation_from_name("relu")), "relu");
    EXPECT_THROW(activation_from_name("gelu"), configuration_error);
    NetworkSpec s = small_spec();
    s.input_dim = 0;
    EXPECT_THROW(s.validate(), configuration_error);
    s = small_spec();
    s.hidden_widths = {4, 0};
    EXPECT_THROW(s.validate(), configuration_error);
    EXPECT_EQ(small_spec().encoder_widths(), (std::vector<std::size_t>{5, 4}));
}
