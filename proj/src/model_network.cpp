#include "qsr/model/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "qsr/error.hpp"

namespace qsr::model {

void validate_config(const ModelConfig& cfg) {
    if (cfg.embed_dim < 1 || cfg.window < 1 || cfg.num_layers < 1 || cfg.heads < 1 ||
        cfg.qmlp_ratio < 1 || cfg.channels < 1)
        throw ValidationError("model config has a non-positive dimension");
    if (cfg.upscale < 1) throw ValidationError("upscale must be >= 1");
    if (cfg.embed_dim % cfg.heads != 0)
        throw ValidationError("heads must divide embed_dim, got " + std::to_string(cfg.heads) +
                              " vs " + std::to_string(cfg.embed_dim));
    if (cfg.layers_per_block < 1 || cfg.num_layers % cfg.layers_per_block != 0)
        throw ValidationError("layers_per_block must divide num_layers");
    if (!(cfg.drop_path >= 0.0 && cfg.drop_path <= 1.0))
        throw ValidationError("drop_path rate must lie in [0,1]");
    if (cfg.qlayer_depth < 1) throw ValidationError("qlayer_depth must be >= 1");
}

int layer_shift(const ModelConfig& cfg, int global_layer_index) {
    return global_layer_index % 2 == 0 ? 0 : cfg.window / 2;
}

ModelParams make_model(const ModelConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    SplitMix64 gen(seed);
    ModelParams p;
    p.conv_in = make_conv(cfg.channels, cfg.embed_dim, gen);
    const int nblocks = cfg.num_layers / cfg.layers_per_block;
    p.blocks.resize(size_t(nblocks));
    for (BlockParams& blk : p.blocks) {
        blk.layers.resize(size_t(cfg.layers_per_block));
        for (LayerParams& lay : blk.layers) {
            lay.ln1_scale.assign(size_t(cfg.embed_dim), 1.0);
            lay.ln1_bias.assign(size_t(cfg.embed_dim), 0.0);
            lay.attn = attn::make_sqwin(cfg.embed_dim, cfg.window, cfg.heads, cfg.qmlp_ratio, 1,
                                        gen);
            lay.ln2_scale.assign(size_t(cfg.embed_dim), 1.0);
            lay.ln2_bias.assign(size_t(cfg.embed_dim), 0.0);
            lay.mlp = qnn::make_qmlp(cfg.embed_dim, cfg.qmlp_ratio, cfg.embed_dim,
                                     cfg.qlayer_depth, gen);
        }
        blk.conv = make_conv(cfg.embed_dim, cfg.embed_dim, gen);
    }
    p.conv_mid = make_conv(cfg.embed_dim, cfg.embed_dim, gen);
    p.conv_up = make_conv(cfg.embed_dim, cfg.channels * cfg.upscale * cfg.upscale, gen);
    p.conv_out = make_conv(cfg.channels, cfg.channels, gen);
    return p;
}

void validate_model(const ModelParams& p, const ModelConfig& cfg) {
    validate_config(cfg);
    const int d = cfg.embed_dim;
    auto conv_is = [](const Conv2d& c, int in, int out, const char* what) {
        validate_conv(c);
        if (c.in_ch != in || c.out_ch != out)
            throw StructureError(std::string(what) + " has wrong channel counts");
    };
    conv_is(p.conv_in, cfg.channels, d, "conv_in");
    if (int(p.blocks.size()) != cfg.num_layers / cfg.layers_per_block)
        throw StructureError("block count does not match num_layers / layers_per_block");
    for (const BlockParams& blk : p.blocks) {
        if (int(blk.layers.size()) != cfg.layers_per_block)
            throw StructureError("block has wrong layer count");
        for (const LayerParams& lay : blk.layers) {
            if (lay.ln1_scale.size() != size_t(d) || lay.ln1_bias.size() != size_t(d) ||
                lay.ln2_scale.size() != size_t(d) || lay.ln2_bias.size() != size_t(d))
                throw StructureError("layer-norm parameter length does not match embed_dim");
            attn::validate_sqwin(lay.attn);
            if (lay.attn.dim != d || lay.attn.window != cfg.window ||
                lay.attn.num_heads != cfg.heads)
                throw StructureError("attention params disagree with the model config");
            qnn::validate_qmlp(lay.mlp);
            if (lay.mlp.in_dim != d || lay.mlp.out_dim != d)
                throw StructureError("token MLP must map embed_dim -> embed_dim");
        }
        conv_is(blk.conv, d, d, "block conv");
    }
    conv_is(p.conv_mid, d, d, "conv_mid");
    conv_is(p.conv_up, d, cfg.channels * cfg.upscale * cfg.upscale, "conv_up");
    conv_is(p.conv_out, cfg.channels, cfg.channels, "conv_out");
}

// --- flat view ---

void visit_params(ModelParams& p,
                  const std::function<void(const std::string&, std::span<double>)>& fn) {
    auto vec = [&](const std::string& name, std::vector<double>& v) {
        fn(name, std::span<double>(v));
    };
    auto one = [&](const std::string& name, double& v) { fn(name, std::span<double>(&v, 1)); };
    auto conv = [&](const std::string& name, Conv2d& c) {
        vec(name + ".w", c.w);
        vec(name + ".b", c.b);
    };
    auto mlp = [&](const std::string& name, qnn::QmlpParams& m) {
        vec(name + ".pre_w", m.pre.w);
        vec(name + ".pre_b", m.pre.b);
        vec(name + ".theta", m.qlayer.theta);
        vec(name + ".post_w", m.post.w);
        vec(name + ".post_b", m.post.b);
    };
    conv("conv_in", p.conv_in);
    for (std::size_t b = 0; b < p.blocks.size(); ++b) {
        const std::string bb = "blocks[" + std::to_string(b) + "]";
        for (std::size_t l = 0; l < p.blocks[b].layers.size(); ++l) {
            LayerParams& lay = p.blocks[b].layers[l];
            const std::string ll = bb + ".layers[" + std::to_string(l) + "]";
            vec(ll + ".ln1_scale", lay.ln1_scale);
            vec(ll + ".ln1_bias", lay.ln1_bias);
            vec(ll + ".attn.theta_q", lay.attn.theta_q.theta);
            vec(ll + ".attn.theta_k", lay.attn.theta_k.theta);
            vec(ll + ".attn.theta_v", lay.attn.theta_v.theta);
            vec(ll + ".attn.theta_o", lay.attn.theta_o.theta);
            vec(ll + ".attn.kappa_raw", lay.attn.kappa_raw);
            mlp(ll + ".attn.bias", lay.attn.bias_mlp);
            one(ll + ".attn.gamma_x_raw", lay.attn.gamma_x_raw);
            one(ll + ".attn.gamma_y_raw", lay.attn.gamma_y_raw);
            vec(ll + ".ln2_scale", lay.ln2_scale);
            vec(ll + ".ln2_bias", lay.ln2_bias);
            mlp(ll + ".mlp", lay.mlp);
        }
        conv(bb + ".conv", p.blocks[b].conv);
    }
    conv("conv_mid", p.conv_mid);
    conv("conv_up", p.conv_up);
    conv("conv_out", p.conv_out);
}

std::string FlatLayout::name_of(std::size_t i) const {
    for (const FlatSlice& s : slices)
        if (i >= s.offset && i < s.offset + s.count)
            return s.name + "[" + std::to_string(i - s.offset) + "]";
    throw ValidationError("flat index " + std::to_string(i) + " out of range");
}

FlatLayout flat_layout(const ModelParams& p) {
    ModelParams tmp = p;
    FlatLayout layout;
    visit_params(tmp, [&](const std::string& name, std::span<double> leaf) {
        layout.slices.push_back({name, layout.total, leaf.size()});
        layout.total += leaf.size();
    });
    return layout;
}

std::vector<double> flatten(const ModelParams& p) {
    ModelParams tmp = p;
    std::vector<double> flat;
    visit_params(tmp, [&](const std::string&, std::span<double> leaf) {
        flat.insert(flat.end(), leaf.begin(), leaf.end());
    });
    return flat;
}

void unflatten(ModelParams& p, std::span<const double> flat) {
    std::size_t pos = 0;
    visit_params(p, [&](const std::string& name, std::span<double> leaf) {
        if (pos + leaf.size() > flat.size())
            throw ValidationError("flat vector too short at " + name);
        for (double& v : leaf) v = flat[pos++];
    });
    if (pos != flat.size())
        throw ValidationError("flat vector has " + std::to_string(flat.size()) +
                              " entries, model needs " + std::to_string(pos));
}

ModelParams zero_like(const ModelParams& p) {
    ModelParams z = p;
    visit_params(z, [](const std::string&, std::span<double> leaf) {
        for (double& v : leaf) v = 0.0;
    });
    return z;
}

// --- forward / backward ---

namespace {

Tensor with_shape(const Tensor& x, std::vector<int> shape) {
    Tensor t(std::move(shape));
    if (t.v.size() != x.v.size()) throw ValidationError("reshape changes element count");
    t.v = x.v;
    return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
    a.require_shape(b, "residual add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (double& v : out.v) v *= s;
    return out;
}

void check_finite(const Tensor& t, const std::string& stage) {
    for (double v : t.v)
        if (!std::isfinite(v))
            throw NumericalError("non-finite activation after " + stage);
}

struct DropPair {
    double attn = 1.0;
    double mlp = 1.0;
};

DropPair drop_pair(std::span<const double> scales, int layer_index, int num_layers) {
    if (scales.empty()) return {};
    if (int(scales.size()) != 2 * num_layers)
        throw ValidationError("drop scale vector must hold 2 entries per layer");
    return {scales[size_t(2 * layer_index)], scales[size_t(2 * layer_index + 1)]};
}

Tensor layer_forward(const Tensor& x, const LayerParams& lp, int shift, DropPair dp,
                     int workers) {
    const Tensor t1 = layer_norm(x, lp.ln1_scale, lp.ln1_bias);
    const Tensor a = attn::sqwin_forward(t1, lp.attn, shift, workers);
    const Tensor x1 = add(x, scale(a, dp.attn));
    const Tensor t2 = layer_norm(x1, lp.ln2_scale, lp.ln2_bias);
    const int tokens = x.shape[0] * x.shape[1], d = x.shape[2];
    const Tensor m = qnn::qmlp_forward_batch(with_shape(t2, {tokens, d}), lp.mlp, workers);
    return add(x1, scale(with_shape(m, x.shape), dp.mlp));
}

TransformerLayerGrad layer_backward(const Tensor& x, const LayerParams& lp, int shift,
                                    const Tensor& cotangent, DropPair dp, int workers) {
    const int tokens = x.shape[0] * x.shape[1], d = x.shape[2];
    // recompute the forward intermediates
    const Tensor t1 = layer_norm(x, lp.ln1_scale, lp.ln1_bias);
    const Tensor a = attn::sqwin_forward(t1, lp.attn, shift, workers);
    const Tensor x1 = add(x, scale(a, dp.attn));
    const Tensor t2 = layer_norm(x1, lp.ln2_scale, lp.ln2_bias);

    TransformerLayerGrad g;
    g.by_param = lp; // shapes; leaves overwritten below

    // MLP branch: x2 = x1 + dp.mlp * mlp(t2)
    const qnn::QmlpGrad mg = qnn::qmlp_backward_batch(
        with_shape(t2, {tokens, d}), lp.mlp, with_shape(scale(cotangent, dp.mlp), {tokens, d}),
        workers);
    g.by_param.mlp.pre.w = mg.d_pre_w;
    g.by_param.mlp.pre.b = mg.d_pre_b;
    g.by_param.mlp.qlayer.theta = mg.d_theta;
    g.by_param.mlp.post.w = mg.d_post_w;
    g.by_param.mlp.post.b = mg.d_post_b;
    const LayerNormGrad ln2g = layer_norm_backward(x1, lp.ln2_scale, with_shape(mg.d_x, x.shape));
    g.by_param.ln2_scale = ln2g.d_scale;
    g.by_param.ln2_bias = ln2g.d_bias;
    const Tensor d_x1 = add(cotangent, ln2g.d_x);

    // attention branch: x1 = x + dp.attn * attn(t1)
    const attn::SqwinGrad sg =
        attn::sqwin_backward(t1, lp.attn, shift, scale(d_x1, dp.attn), workers);
    g.by_param.attn.theta_q.theta = sg.d_theta_q;
    g.by_param.attn.theta_k.theta = sg.d_theta_k;
    g.by_param.attn.theta_v.theta = sg.d_theta_v;
    g.by_param.attn.theta_o.theta = sg.d_theta_o;
    g.by_param.attn.kappa_raw = sg.d_kappa_raw;
    g.by_param.attn.bias_mlp.pre.w = sg.d_bias.d_pre_w;
    g.by_param.attn.bias_mlp.pre.b = sg.d_bias.d_pre_b;
    g.by_param.attn.bias_mlp.qlayer.theta = sg.d_bias.d_theta;
    g.by_param.attn.bias_mlp.post.w = sg.d_bias.d_post_w;
    g.by_param.attn.bias_mlp.post.b = sg.d_bias.d_post_b;
    g.by_param.attn.gamma_x_raw = sg.d_gamma_x_raw;
    g.by_param.attn.gamma_y_raw = sg.d_gamma_y_raw;
    const LayerNormGrad ln1g = layer_norm_backward(x, lp.ln1_scale, sg.d_x);
    g.by_param.ln1_scale = ln1g.d_scale;
    g.by_param.ln1_bias = ln1g.d_bias;
    g.d_x = add(d_x1, ln1g.d_x);
    return g;
}

void check_input(const Tensor& x, const ModelConfig& cfg) {
    if (x.shape.size() != 3 || x.shape[2] != cfg.channels)
        throw ValidationError("model input must be an [H,W,channels] map");
    if (x.shape[0] % cfg.window != 0 || x.shape[1] % cfg.window != 0)
        throw ValidationError("input spatial dims must be divisible by the window size");
}

} // namespace

Tensor transformer_layer_forward(const Tensor& x, const LayerParams& lp, int shift, int workers,
                                 double drop_attn, double drop_mlp) {
    return layer_forward(x, lp, shift, DropPair{drop_attn, drop_mlp}, workers);
}

TransformerLayerGrad transformer_layer_backward(const Tensor& x, const LayerParams& lp, int shift,
                                                const Tensor& cotangent, int workers,
                                                double drop_attn, double drop_mlp) {
    return layer_backward(x, lp, shift, cotangent, DropPair{drop_attn, drop_mlp}, workers);
}

std::vector<double> draw_drop_scales(const ModelConfig& cfg, SplitMix64& gen) {
    std::vector<double> scales(size_t(2 * cfg.num_layers), 1.0);
    if (cfg.drop_path <= 0.0) return scales;
    for (double& s : scales) {
        const bool keep = gen.next_double() >= cfg.drop_path;
        s = keep ? 1.0 / (1.0 - cfg.drop_path) : 0.0;
    }
    return scales;
}

namespace {

// Runs the trunk up to the global-residual fusion: shallow features, the
// transformer blocks, conv_mid, and the F_0 skip. This is the deepest map
// before upsampling, which is also what feature analysis probes.
Tensor forward_to_fused(const Tensor& x, const ModelParams& p, const ModelConfig& cfg, int workers,
                        std::span<const double> drop_scales) {
    validate_model(p, cfg);
    check_input(x, cfg);
    const Tensor f0 = conv2d_3x3(x, p.conv_in);
    check_finite(f0, "conv_in");
    Tensor cur = f0;
    int gl = 0;
    for (const BlockParams& blk : p.blocks) {
        const Tensor bin = cur;
        for (const LayerParams& lay : blk.layers) {
            cur = layer_forward(cur, lay, layer_shift(cfg, gl),
                                drop_pair(drop_scales, gl, cfg.num_layers), workers);
            check_finite(cur, "transformer layer " + std::to_string(gl));
            ++gl;
        }
        cur = add(bin, conv2d_3x3(cur, blk.conv));
        check_finite(cur, "block conv");
    }
    const Tensor fused = add(f0, conv2d_3x3(cur, p.conv_mid));
    check_finite(fused, "conv_mid");
    return fused;
}

} // namespace

Tensor model_forward(const Tensor& x, const ModelParams& p, const ModelConfig& cfg, int workers,
                     std::span<const double> drop_scales) {
    const Tensor fused = forward_to_fused(x, p, cfg, workers, drop_scales);
    const Tensor up = conv2d_3x3(fused, p.conv_up);
    const Tensor shuffled = pixel_shuffle(up, cfg.upscale);
    const Tensor out = conv2d_3x3(shuffled, p.conv_out);
    check_finite(out, "conv_out");
    return out;
}

Tensor model_features(const Tensor& x, const ModelParams& p, const ModelConfig& cfg, int workers) {
    return forward_to_fused(x, p, cfg, workers, {});
}

ModelGrad model_backward(const Tensor& x, const ModelParams& p, const ModelConfig& cfg,
                         const Tensor& cotangent, int workers,
                         std::span<const double> drop_scales) {
    validate_model(p, cfg);
    check_input(x, cfg);

    // forward, keeping what the reverse sweep needs
    const Tensor f0 = conv2d_3x3(x, p.conv_in);
    std::vector<Tensor> block_in, layer_in, layer_out_last;
    Tensor cur = f0;
    int gl = 0;
    for (const BlockParams& blk : p.blocks) {
        block_in.push_back(cur);
        for (const LayerParams& lay : blk.layers) {
            layer_in.push_back(cur);
            cur = layer_forward(cur, lay, layer_shift(cfg, gl),
                                drop_pair(drop_scales, gl, cfg.num_layers), workers);
            ++gl;
        }
        layer_out_last.push_back(cur);
        cur = add(block_in.back(), conv2d_3x3(cur, blk.conv));
    }
    const Tensor fl = cur;
    const Tensor fused = add(f0, conv2d_3x3(fl, p.conv_mid));
    const Tensor up = conv2d_3x3(fused, p.conv_up);
    const Tensor shuffled = pixel_shuffle(up, cfg.upscale);
    cotangent.require_shape({shuffled.shape[0], shuffled.shape[1], cfg.channels});

    ModelGrad g;
    g.by_param = zero_like(p);

    const ConvGrad og = conv2d_3x3_backward(shuffled, p.conv_out, cotangent);
    g.by_param.conv_out.w = og.d_w;
    g.by_param.conv_out.b = og.d_b;
    const Tensor d_up = pixel_unshuffle(og.d_x, cfg.upscale);
    const ConvGrad ug = conv2d_3x3_backward(fused, p.conv_up, d_up);
    g.by_param.conv_up.w = ug.d_w;
    g.by_param.conv_up.b = ug.d_b;
    Tensor d_f0 = ug.d_x; // global residual branch
    const ConvGrad mg = conv2d_3x3_backward(fl, p.conv_mid, ug.d_x);
    g.by_param.conv_mid.w = mg.d_w;
    g.by_param.conv_mid.b = mg.d_b;

    Tensor d_cur = mg.d_x;
    gl = cfg.num_layers;
    for (int b = int(p.blocks.size()) - 1; b >= 0; --b) {
        const BlockParams& blk = p.blocks[size_t(b)];
        const ConvGrad bg = conv2d_3x3_backward(layer_out_last[size_t(b)], blk.conv, d_cur);
        g.by_param.blocks[size_t(b)].conv.w = bg.d_w;
        g.by_param.blocks[size_t(b)].conv.b = bg.d_b;
        Tensor d_layer = bg.d_x;
        for (int l = int(blk.layers.size()) - 1; l >= 0; --l) {
            --gl;
            TransformerLayerGrad lg = layer_backward(layer_in[size_t(gl)], blk.layers[size_t(l)],
                                                     layer_shift(cfg, gl), d_layer,
                                                     drop_pair(drop_scales, gl, cfg.num_layers),
                                                     workers);
            g.by_param.blocks[size_t(b)].layers[size_t(l)] = std::move(lg.by_param);
            d_layer = std::move(lg.d_x);
        }
        d_cur = add(d_cur, d_layer); // block residual: out = in + conv(layers(in))
    }
    d_f0 = add(d_f0, d_cur);
    const ConvGrad ig = conv2d_3x3_backward(x, p.conv_in, d_f0);
    g.by_param.conv_in.w = ig.d_w;
    g.by_param.conv_in.b = ig.d_b;
    g.d_x = ig.d_x;
    return g;
}

ResourceReport resource_report(const ModelConfig& cfg, int h, int w) {
    validate_config(cfg);
    ResourceReport r;
    r.qubits_per_circuit =
        std::max(cfg.embed_dim, std::max(cfg.embed_dim * cfg.qmlp_ratio, 2 * cfg.qmlp_ratio));
    const long tokens = long(h) * w;
    const long bias_slots = long(2 * cfg.window - 1) * (2 * cfg.window - 1);
    // per layer: q/k/v/o projections and the token MLP run once per token,
    // the relative-position bias once per distinct displacement
    r.circuits_per_forward = cfg.num_layers * (5 * tokens + bias_slots);
    r.param_count = flat_layout(make_model(cfg, 0)).total;
    r.formula_qubits = int(std::ceil(std::log2(double(cfg.embed_dim))));
    return r;
}

} // namespace qsr::model
