#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "qsr/error.hpp"
#include "qsr/model/checkpoint.hpp"
#include "qsr/model/network.hpp"
#include "qsr/model/ops.hpp"
#include "qsr/rng.hpp"

using namespace qsr;
using namespace qsr::model;
using qsim::Axis;

namespace {

Tensor random_map(int h, int w, int c, SplitMix64& gen, double lo = -1.0, double hi = 1.0) {
    Tensor x({h, w, c});
    for (double& v : x.v) v = gen.uniform(lo, hi);
    return x;
}

// Naive sextuple-loop convolution oracle, written independently of the
// production indexing.
Tensor conv_oracle(const Tensor& x, const Conv2d& c) {
    const int h = x.shape[0], w = x.shape[1];
    Tensor out({h, w, c.out_ch});
    for (int o = 0; o < c.out_ch; ++o)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                double acc = c.b[size_t(o)];
                for (int i = 0; i < c.in_ch; ++i)
                    for (int ky = -1; ky <= 1; ++ky)
                        for (int kx = -1; kx <= 1; ++kx) {
                            const int sy = y + ky, sx = xx + kx;
                            if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                            acc += c.w[((size_t(o) * c.in_ch + i) * 3 + (ky + 1)) * 3 + (kx + 1)] *
                                   x.at(sy, sx, i);
                        }
                out.at(y, xx, o) = acc;
            }
    return out;
}

// Rewire every circuit in a model to X-basis embeddings so the whole network
// carries input- and theta-dependent signal (the default depth-1 RZ circuits
// are constant on |0..0>, which would make gradient tests vacuous).
void liven_circuits(ModelParams& p, SplitMix64& gen) {
    auto rewire = [&](qnn::QuantumLayerParams& q) {
        q.structure.bases = {Axis::X};
        q.structure.observable_kinds = {Axis::Z};
        q.theta.resize(q.structure.theta_count());
        for (double& t : q.theta) t = gen.uniform(0.0, 2 * 3.14159265358979);
    };
    for (BlockParams& blk : p.blocks)
        for (LayerParams& lay : blk.layers) {
            rewire(lay.attn.theta_q);
            rewire(lay.attn.theta_k);
            rewire(lay.attn.theta_v);
            rewire(lay.attn.theta_o);
            rewire(lay.attn.bias_mlp.qlayer);
            rewire(lay.mlp.qlayer);
            // X-basis qlayer emits one Z per qubit; post affine must match
            lay.mlp.post.in = lay.mlp.hidden;
            lay.mlp.post.w.resize(size_t(lay.mlp.post.out) * lay.mlp.hidden);
            for (double& v : lay.mlp.post.w) v = gen.truncated_normal(0.02);
            lay.attn.bias_mlp.post.in = lay.attn.bias_mlp.hidden;
            lay.attn.bias_mlp.post.w.resize(size_t(lay.attn.bias_mlp.post.out) *
                                            lay.attn.bias_mlp.hidden);
            for (double& v : lay.attn.bias_mlp.post.w) v = gen.truncated_normal(0.02);
        }
}

} // namespace

TEST_CASE("conv2d_3x3: identity kernel passes input through") {
    SplitMix64 gen(1);
    Conv2d c = make_conv(3, 3, gen);
    std::fill(c.w.begin(), c.w.end(), 0.0);
    std::fill(c.b.begin(), c.b.end(), 0.0);
    for (int ch = 0; ch < 3; ++ch) c.w[((size_t(ch) * 3 + ch) * 3 + 1) * 3 + 1] = 1.0;
    const Tensor x = random_map(5, 7, 3, gen);
    const Tensor y = conv2d_3x3(x, c);
    for (size_t i = 0; i < x.v.size(); ++i) CHECK(y.v[i] == x.v[i]);
}

TEST_CASE("conv2d_3x3: all-ones kernel sums the 3x3 neighborhood") {
    SplitMix64 gen(2);
    Conv2d c = make_conv(1, 1, gen);
    std::fill(c.w.begin(), c.w.end(), 1.0);
    c.b[0] = 0.0;
    Tensor x({4, 4, 1});
    std::fill(x.v.begin(), x.v.end(), 0.5);
    const Tensor y = conv2d_3x3(x, c);
    CHECK(y.at(1, 1, 0) == doctest::Approx(9 * 0.5)); // interior: full neighborhood
    CHECK(y.at(0, 0, 0) == doctest::Approx(4 * 0.5)); // corner: zero padding
}

TEST_CASE("conv2d_3x3 matches the sextuple-loop oracle") {
    SplitMix64 gen(3);
    const Conv2d c = make_conv(3, 5, gen);
    const Tensor x = random_map(6, 4, 3, gen);
    const Tensor got = conv2d_3x3(x, c);
    const Tensor want = conv_oracle(x, c);
    REQUIRE(got.shape == want.shape);
    for (size_t i = 0; i < got.v.size(); ++i)
        CHECK(got.v[i] == doctest::Approx(want.v[i]).epsilon(1e-12));

    Tensor bad = random_map(4, 4, 2, gen);
    CHECK_THROWS_AS(conv2d_3x3(bad, c), ValidationError);
}

TEST_CASE("conv2d_3x3 backward agrees with finite differences") {
    SplitMix64 gen(4);
    Conv2d c = make_conv(2, 3, gen);
    Tensor x = random_map(4, 5, 2, gen);
    Tensor cot({4, 5, 3});
    for (double& v : cot.v) v = gen.uniform(-1.0, 1.0);
    const ConvGrad g = conv2d_3x3_backward(x, c, cot);

    auto scalar = [&] {
        const Tensor y = conv2d_3x3(x, c);
        double acc = 0;
        for (size_t i = 0; i < y.v.size(); ++i) acc += cot.v[i] * y.v[i];
        return acc;
    };
    const double h = 1e-6;
    auto fd = [&](double* slot) {
        const double keep = *slot;
        *slot = keep + h;
        const double fp = scalar();
        *slot = keep - h;
        const double fm = scalar();
        *slot = keep;
        return (fp - fm) / (2 * h);
    };
    for (size_t i = 0; i < c.w.size(); i += 3)
        CHECK(g.d_w[i] == doctest::Approx(fd(&c.w[i])).epsilon(1e-6));
    for (size_t i = 0; i < c.b.size(); ++i)
        CHECK(g.d_b[i] == doctest::Approx(fd(&c.b[i])).epsilon(1e-6));
    for (size_t i = 0; i < x.v.size(); i += 4)
        CHECK(g.d_x.v[i] == doctest::Approx(fd(&x.v[i])).epsilon(1e-6));
}

TEST_CASE("layer_norm basics") {
    const std::vector<double> one(4, 1.0), zero(4, 0.0);

    Tensor flat({1, 4});
    std::fill(flat.v.begin(), flat.v.end(), 3.7); // constant token -> zeros pre-affine
    const Tensor y = layer_norm(flat, one, {0.1, 0.2, 0.3, 0.4});
    CHECK(y.at(0, 0) == doctest::Approx(0.1));
    CHECK(y.at(0, 3) == doctest::Approx(0.4));

    Tensor pm({1, 2});
    pm.v = {1.0, -1.0};
    const Tensor z = layer_norm(pm, {1.0, 1.0}, {0.0, 0.0});
    const double want = 1.0 / std::sqrt(1.0 + kLayerNormEps);
    CHECK(z.at(0, 0) == doctest::Approx(want).epsilon(1e-12));
    CHECK(z.at(0, 1) == doctest::Approx(-want).epsilon(1e-12));

    // normalized moments on random tokens
    SplitMix64 gen(5);
    Tensor x({10, 4});
    for (double& v : x.v) v = gen.uniform(-3.0, 3.0);
    const Tensor n = layer_norm(x, one, zero);
    for (int t = 0; t < 10; ++t) {
        double mu = 0, var = 0;
        for (int i = 0; i < 4; ++i) mu += n.at(t, i);
        mu /= 4;
        for (int i = 0; i < 4; ++i) var += (n.at(t, i) - mu) * (n.at(t, i) - mu);
        var /= 4;
        CHECK(std::abs(mu) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-4); // eps shifts variance slightly below 1
    }
}

TEST_CASE("layer_norm backward agrees with finite differences") {
    SplitMix64 gen(6);
    Tensor x({3, 4});
    for (double& v : x.v) v = gen.uniform(-2.0, 2.0);
    std::vector<double> scale(4), bias(4);
    for (auto* v : {&scale, &bias})
        for (double& e : *v) e = gen.uniform(-1.0, 1.0);
    Tensor cot({3, 4});
    for (double& v : cot.v) v = gen.uniform(-1.0, 1.0);

    const LayerNormGrad g = layer_norm_backward(x, scale, cot);
    auto scalar = [&] {
        const Tensor y = layer_norm(x, scale, bias);
        double acc = 0;
        for (size_t i = 0; i < y.v.size(); ++i) acc += cot.v[i] * y.v[i];
        return acc;
    };
    const double h = 1e-6;
    auto fd = [&](double* slot) {
        const double keep = *slot;
        *slot = keep + h;
        const double fp = scalar();
        *slot = keep - h;
        const double fm = scalar();
        *slot = keep;
        return (fp - fm) / (2 * h);
    };
    for (size_t i = 0; i < x.v.size(); ++i)
        CHECK(g.d_x.v[i] == doctest::Approx(fd(&x.v[i])).epsilon(1e-5));
    for (size_t i = 0; i < scale.size(); ++i)
        CHECK(g.d_scale[i] == doctest::Approx(fd(&scale[i])).epsilon(1e-5));
    for (size_t i = 0; i < bias.size(); ++i)
        CHECK(g.d_bias[i] == doctest::Approx(fd(&bias[i])).epsilon(1e-5));
}

TEST_CASE("pixel_shuffle layout, inverse and validation") {
    Tensor q({1, 1, 4});
    q.v = {1.0, 2.0, 3.0, 4.0};
    const Tensor y = pixel_shuffle(q, 2);
    REQUIRE(y.shape == std::vector<int>({2, 2, 1}));
    CHECK(y.at(0, 0, 0) == 1.0);
    CHECK(y.at(0, 1, 0) == 2.0);
    CHECK(y.at(1, 0, 0) == 3.0);
    CHECK(y.at(1, 1, 0) == 4.0);

    SplitMix64 gen(7);
    const Tensor x = random_map(3, 5, 8, gen);
    const Tensor s1 = pixel_shuffle(x, 1);
    for (size_t i = 0; i < x.v.size(); ++i) CHECK(s1.v[i] == x.v[i]);
    const Tensor round = pixel_unshuffle(pixel_shuffle(x, 2), 2);
    REQUIRE(round.shape == x.shape);
    for (size_t i = 0; i < x.v.size(); ++i) CHECK(round.v[i] == x.v[i]);

    CHECK_THROWS_AS(pixel_shuffle(x, 3), ValidationError); // 8 channels, s^2 = 9
}

TEST_CASE("config validation and the shift schedule") {
    ModelConfig cfg;
    CHECK_NOTHROW(validate_config(cfg));
    CHECK(layer_shift(cfg, 0) == 0);
    CHECK(layer_shift(cfg, 1) == 1); // M/2 with M=2
    CHECK(layer_shift(cfg, 2) == 0);
    CHECK(layer_shift(cfg, 5) == 1);

    ModelConfig bad = cfg;
    bad.heads = 3;
    CHECK_THROWS_AS(validate_config(bad), ValidationError);
    bad = cfg;
    bad.layers_per_block = 4; // does not divide 6
    CHECK_THROWS_AS(validate_config(bad), ValidationError);
    bad = cfg;
    bad.drop_path = 1.5;
    CHECK_THROWS_AS(validate_config(bad), ValidationError);
    bad = cfg;
    bad.upscale = 0;
    CHECK_THROWS_AS(validate_config(bad), ValidationError);
}

TEST_CASE("flat view: roundtrip, determinism and index naming") {
    ModelConfig cfg;
    cfg.num_layers = 2;
    const ModelParams p = make_model(cfg, 42);
    const ModelParams p2 = make_model(cfg, 42);
    const std::vector<double> flat = flatten(p), flat2 = flatten(p2);
    REQUIRE(flat.size() == flat2.size());
    for (size_t i = 0; i < flat.size(); ++i) CHECK(flat[i] == flat2[i]); // seeded init

    const FlatLayout layout = flat_layout(p);
    CHECK(layout.total == flat.size());
    CHECK(layout.name_of(0) == "conv_in.w[0]");

    // perturb, unflatten, flatten again: exact inverse
    std::vector<double> tweaked = flat;
    for (size_t i = 0; i < tweaked.size(); ++i) tweaked[i] += 1e-3 * double(i % 7);
    ModelParams q = p;
    unflatten(q, tweaked);
    const std::vector<double> back = flatten(q);
    REQUIRE(back.size() == tweaked.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == tweaked[i]);

    const ModelParams z = zero_like(p);
    for (double v : flatten(z)) CHECK(v == 0.0);

    CHECK_THROWS_AS(unflatten(q, std::span<const double>(flat.data(), flat.size() - 1)),
                    ValidationError);
}

TEST_CASE("forward maps 14x14x1 to 28x28x1 under the default config") {
    ModelConfig cfg;
    const ModelParams p = make_model(cfg, 3);
    SplitMix64 gen(8);
    Tensor x({14, 14, 1});
    for (double& v : x.v) v = gen.next_double();
    const Tensor y = model_forward(x, p, cfg, 2);
    CHECK(y.shape == std::vector<int>({28, 28, 1}));
    for (double v : y.v) CHECK(std::isfinite(v));

    Tensor odd({13, 14, 1});
    CHECK_THROWS_AS(model_forward(odd, p, cfg, 1), ValidationError);
}

TEST_CASE("zeroed head convs give a constant-bias output") {
    ModelConfig cfg;
    cfg.num_layers = 2;
    ModelParams p = make_model(cfg, 4);
    std::fill(p.conv_up.w.begin(), p.conv_up.w.end(), 0.0);
    std::fill(p.conv_up.b.begin(), p.conv_up.b.end(), 0.0);
    std::fill(p.conv_out.w.begin(), p.conv_out.w.end(), 0.0);
    p.conv_out.b = {0.625};
    SplitMix64 gen(9);
    Tensor x({4, 4, 1});
    for (double& v : x.v) v = gen.next_double();
    const Tensor y = model_forward(x, p, cfg, 1);
    for (double v : y.v) CHECK(v == doctest::Approx(0.625));
}

TEST_CASE("zeroed block convs reduce forward to the conv/residual skeleton") {
    ModelConfig cfg;
    cfg.num_layers = 4;
    ModelParams p = make_model(cfg, 5);
    for (BlockParams& blk : p.blocks) {
        std::fill(blk.conv.w.begin(), blk.conv.w.end(), 0.0);
        std::fill(blk.conv.b.begin(), blk.conv.b.end(), 0.0);
    }
    SplitMix64 gen(10);
    Tensor x({4, 4, 1});
    for (double& v : x.v) v = gen.next_double();
    const Tensor got = model_forward(x, p, cfg, 1);

    // conv_out(shuffle(conv_up(conv_mid(F0) + F0))) with F0 = conv_in(x)
    const Tensor f0 = conv2d_3x3(x, p.conv_in);
    Tensor fused = conv2d_3x3(f0, p.conv_mid);
    for (size_t i = 0; i < fused.v.size(); ++i) fused.v[i] += f0.v[i];
    const Tensor want =
        conv2d_3x3(pixel_shuffle(conv2d_3x3(fused, p.conv_up), cfg.upscale), p.conv_out);
    REQUIRE(got.shape == want.shape);
    for (size_t i = 0; i < got.v.size(); ++i) CHECK(got.v[i] == want.v[i]);
}

TEST_CASE("dropped branches make a transformer layer the identity") {
    ModelConfig cfg;
    cfg.num_layers = 2;
    const ModelParams p = make_model(cfg, 6);
    SplitMix64 gen(11);
    const Tensor x = random_map(4, 4, cfg.embed_dim, gen);
    const Tensor y = transformer_layer_forward(x, p.blocks[0].layers[0], 1, 1, 0.0, 0.0);
    for (size_t i = 0; i < x.v.size(); ++i) CHECK(y.v[i] == x.v[i]);

    // drop_path = 1 always drops; rate 0 always keeps at scale 1
    ModelConfig droppy = cfg;
    droppy.drop_path = 1.0;
    SplitMix64 g2(12);
    for (double s : draw_drop_scales(droppy, g2)) CHECK(s == 0.0);
    for (double s : draw_drop_scales(cfg, g2)) CHECK(s == 1.0);
}

TEST_CASE("non-finite activations raise a numerical failure naming the stage") {
    ModelConfig cfg;
    cfg.num_layers = 2;
    ModelParams p = make_model(cfg, 7);
    p.conv_in.b[0] = std::numeric_limits<double>::infinity();
    Tensor x({4, 4, 1});
    try {
        model_forward(x, p, cfg, 1);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("conv_in") != std::string::npos);
    }
}

TEST_CASE("forward is deterministic and worker-invariant") {
    ModelConfig cfg;
    cfg.num_layers = 2;
    const ModelParams p = make_model(cfg, 8);
    SplitMix64 gen(13);
    Tensor x({4, 4, 1});
    for (double& v : x.v) v = gen.next_double();
    const Tensor a = model_forward(x, p, cfg, 1);
    const Tensor b = model_forward(x, p, cfg, 8);
    for (size_t i = 0; i < a.v.size(); ++i) CHECK(a.v[i] == b.v[i]);
}

TEST_CASE("transformer layer gradients match finite differences") {
    ModelConfig cfg;
    cfg.num_layers = 2;
    ModelParams p = make_model(cfg, 9);
    SplitMix64 gen(14);
    liven_circuits(p, gen);
    LayerParams lay = p.blocks[0].layers[0];

    Tensor x = random_map(4, 4, cfg.embed_dim, gen);
    Tensor cot({4, 4, cfg.embed_dim});
    for (double& v : cot.v) v = gen.uniform(-1.0, 1.0);
    const int shift = 1;

    auto scalar = [&] {
        const Tensor y = transformer_layer_forward(x, lay, shift, 1);
        double acc = 0;
        for (size_t i = 0; i < y.v.size(); ++i) acc += cot.v[i] * y.v[i];
        return acc;
    };
    const TransformerLayerGrad g = transformer_layer_backward(x, lay, shift, cot, 2);

    // flatten both the analytic grads and the wiggle targets the same way
    LayerParams probe = lay;   // mutated by fd
    LayerParams grads = g.by_param;
    std::vector<std::pair<double*, double>> checks;
    auto collect = [&](std::vector<double>& pv, std::vector<double>& gv, size_t stride) {
        REQUIRE(pv.size() == gv.size());
        for (size_t i = 0; i < pv.size(); i += stride) checks.push_back({&pv[i], gv[i]});
    };
    collect(probe.ln1_scale, grads.ln1_scale, 1);
    collect(probe.ln1_bias, grads.ln1_bias, 1);
    collect(probe.attn.theta_q.theta, grads.attn.theta_q.theta, 1);
    collect(probe.attn.theta_k.theta, grads.attn.theta_k.theta, 1);
    collect(probe.attn.theta_v.theta, grads.attn.theta_v.theta, 1);
    collect(probe.attn.theta_o.theta, grads.attn.theta_o.theta, 1);
    collect(probe.attn.kappa_raw, grads.attn.kappa_raw, 1);
    collect(probe.attn.bias_mlp.pre.w, grads.attn.bias_mlp.pre.w, 2);
    collect(probe.attn.bias_mlp.qlayer.theta, grads.attn.bias_mlp.qlayer.theta, 1);
    collect(probe.attn.bias_mlp.post.w, grads.attn.bias_mlp.post.w, 3);
    checks.push_back({&probe.attn.gamma_x_raw, grads.attn.gamma_x_raw});
    checks.push_back({&probe.attn.gamma_y_raw, grads.attn.gamma_y_raw});
    collect(probe.ln2_scale, grads.ln2_scale, 1);
    collect(probe.ln2_bias, grads.ln2_bias, 1);
    collect(probe.mlp.pre.w, grads.mlp.pre.w, 3);
    collect(probe.mlp.qlayer.theta, grads.mlp.qlayer.theta, 1);
    collect(probe.mlp.post.w, grads.mlp.post.w, 5);
    collect(probe.mlp.post.b, grads.mlp.post.b, 1);

    lay = probe; // scalar() reads lay; wiggle through probe's pointers
    const double h = 1e-5;
    for (auto [slot, analytic] : checks) {
        const double keep = *slot;
        *slot = keep + h;
        lay = probe;
        const double fp = scalar();
        *slot = keep - h;
        lay = probe;
        const double fm = scalar();
        *slot = keep;
        lay = probe;
        const double fd = (fp - fm) / (2 * h);
        CHECK(std::abs(analytic - fd) <= std::max(1e-4 * std::abs(fd), 1e-7));
    }

    // input gradient
    for (size_t i = 0; i < x.v.size(); i += 6) {
        const double keep = x.v[i];
        x.v[i] = keep + h;
        const double fp = scalar();
        x.v[i] = keep - h;
        const double fm = scalar();
        x.v[i] = keep;
        const double fd = (fp - fm) / (2 * h);
        CHECK(std::abs(g.d_x.v[i] - fd) <= std::max(1e-4 * std::abs(fd), 1e-7));
    }
}

TEST_CASE("full-model gradients match finite differences on a micro config") {
    ModelConfig cfg;
    cfg.num_layers = 2;
    ModelParams p = make_model(cfg, 10);
    SplitMix64 gen(15);
    liven_circuits(p, gen);

    Tensor x({4, 4, 1});
    for (double& v : x.v) v = gen.next_double();
    Tensor cot({8, 8, 1});
    for (double& v : cot.v) v = gen.uniform(-1.0, 1.0);

    const ModelGrad g = model_backward(x, p, cfg, cot, 2);
    const std::vector<double> flat_g = flatten(g.by_param);
    std::vector<double> flat_p = flatten(p);
    REQUIRE(flat_g.size() == flat_p.size());

    auto scalar = [&] {
        ModelParams q = p;
        unflatten(q, flat_p);
        const Tensor y = model_forward(x, q, cfg, 1);
        double acc = 0;
        for (size_t i = 0; i < y.v.size(); ++i) acc += cot.v[i] * y.v[i];
        return acc;
    };
    const FlatLayout layout = flat_layout(p);
    const double h = 1e-5;
    int checked = 0;
    for (size_t i = 0; i < flat_p.size(); i += 3) {
        const double keep = flat_p[i];
        flat_p[i] = keep + h;
        const double fp = scalar();
        flat_p[i] = keep - h;
        const double fm = scalar();
        flat_p[i] = keep;
        const double fd = (fp - fm) / (2 * h);
        INFO("param ", layout.name_of(i));
        CHECK(std::abs(flat_g[i] - fd) <= std::max(1e-4 * std::abs(fd), 1e-7));
        ++checked;
    }
    CHECK(checked >= 200);

    // input gradient spot checks
    auto scalar_x = [&] {
        const Tensor y = model_forward(x, p, cfg, 1);
        double acc = 0;
        for (size_t i = 0; i < y.v.size(); ++i) acc += cot.v[i] * y.v[i];
        return acc;
    };
    for (size_t i = 0; i < x.v.size(); i += 3) {
        const double keep = x.v[i];
        x.v[i] = keep + h;
        const double fp = scalar_x();
        x.v[i] = keep - h;
        const double fm = scalar_x();
        x.v[i] = keep;
        const double fd = (fp - fm) / (2 * h);
        CHECK(std::abs(g.d_x.v[i] - fd) <= std::max(1e-4 * std::abs(fd), 1e-7));
    }
}

TEST_CASE("resource report: small circuits, honest counts") {
    ModelConfig cfg;
    const ResourceReport r = resource_report(cfg);
    CHECK(r.qubits_per_circuit == 8); // QMLP hidden = 4 * 2
    CHECK(r.qubits_per_circuit < 10);
    CHECK(r.formula_qubits == 2); // ceil(log2 4), no ancillas
    // 6 layers, 196 tokens: 5 circuits per token plus 9 bias displacements
    CHECK(r.circuits_per_forward == 6 * (5 * 196 + 9));
    CHECK(r.param_count == flatten(make_model(cfg, 0)).size());
}

TEST_CASE("checkpoint roundtrip is byte-exact and forward-identical") {
    ModelConfig cfg;
    cfg.num_layers = 2;
    const ModelParams p = make_model(cfg, 11);
    const std::string path = "ckpt_test.qsr";
    save_checkpoint(path, p, cfg, 0xabcdef1234567890ull, 7);

    const Checkpoint ck = load_checkpoint(path);
    CHECK(ck.seed == 0xabcdef1234567890ull);
    CHECK(ck.epoch == 7);
    CHECK(ck.config.num_layers == 2);

    SplitMix64 gen(16);
    Tensor x({4, 4, 1});
    for (double& v : x.v) v = gen.next_double();
    const Tensor a = model_forward(x, p, cfg, 1);
    const Tensor b = model_forward(x, ck.params, ck.config, 1);
    for (size_t i = 0; i < a.v.size(); ++i) CHECK(a.v[i] == b.v[i]);

    // save -> load -> save produces identical bytes
    const std::string path2 = "ckpt_test2.qsr";
    save_checkpoint(path2, ck.params, ck.config, ck.seed, ck.epoch);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(b1.substr(0, 4) == "QSR1");

    // corruption is rejected
    std::ofstream bad("ckpt_bad.qsr", std::ios::binary);
    bad << "NOPE" << b1.substr(4);
    bad.close();
    CHECK_THROWS_AS(load_checkpoint("ckpt_bad.qsr"), FormatError);
    std::ofstream trunc("ckpt_trunc.qsr", std::ios::binary);
    trunc << b1.substr(0, b1.size() - 9);
    trunc.close();
    CHECK_THROWS_AS(load_checkpoint("ckpt_trunc.qsr"), FormatError);

    std::remove(path.c_str());
    std::remove(path2.c_str());
    std::remove("ckpt_bad.qsr");
    std::remove("ckpt_trunc.qsr");
}
