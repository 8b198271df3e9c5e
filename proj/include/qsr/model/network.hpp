#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qsr/attn/sqwin.hpp"
#include "qsr/model/ops.hpp"
#include "qsr/qnn/qmlp.hpp"
#include "qsr/rng.hpp"
#include "qsr/tensor.hpp"

namespace qsr::model {

struct ModelConfig {
    int embed_dim = 4;       // D, token channels inside the block stack
    int window = 2;          // M
    int num_layers = 6;      // transformer layers across all blocks
    int heads = 2;           // must divide embed_dim
    int qmlp_ratio = 2;      // hidden qubits = embed_dim * qmlp_ratio
    int upscale = 2;         // s
    int layers_per_block = 2;// alternating-shift pairs; must divide num_layers
    int channels = 1;        // C, image channels
    double drop_path = 0.0;  // stochastic-depth rate, training mode only
    int qlayer_depth = 1;    // entangler depth of the token-MLP circuits
};

void validate_config(const ModelConfig& cfg);

// One transformer layer: x + DropPath(attn(LN(x), shift)), then
// + DropPath(mlp(LN(.))) tokenwise. Layer l (global index) uses shift
// 0 when even, M/2 when odd.
struct LayerParams {
    std::vector<double> ln1_scale, ln1_bias;
    attn::SqwinParams attn;
    std::vector<double> ln2_scale, ln2_bias;
    qnn::QmlpParams mlp; // D -> D, hidden D*ratio
};

// Residual block: X + conv(layer_k(...layer_1(X))). Zeroing the trailing
// conv turns the whole block into the identity.
struct BlockParams {
    std::vector<LayerParams> layers;
    Conv2d conv; // D -> D
};

struct ModelParams {
    Conv2d conv_in;  // C -> D
    std::vector<BlockParams> blocks;
    Conv2d conv_mid; // D -> D, output joins the global residual
    Conv2d conv_up;  // D -> C*s^2
    Conv2d conv_out; // C -> C
};

ModelParams make_model(const ModelConfig& cfg, std::uint64_t seed);
void validate_model(const ModelParams& p, const ModelConfig& cfg);

int layer_shift(const ModelConfig& cfg, int global_layer_index);

// --- flat parameter view ---
// Deterministic traversal order shared by flatten, unflatten, the optimizer
// and the checkpoint format. Every trainable leaf appears exactly once.

struct FlatSlice {
    std::string name;
    std::size_t offset = 0;
    std::size_t count = 0;
};

struct FlatLayout {
    std::vector<FlatSlice> slices;
    std::size_t total = 0;
    // Name of the slice containing flat index i, with its inner offset.
    std::string name_of(std::size_t i) const;
};

// Visits each leaf as (name, span over its doubles), in flat-view order.
void visit_params(ModelParams& p,
                  const std::function<void(const std::string&, std::span<double>)>& fn);

FlatLayout flat_layout(const ModelParams& p);
std::vector<double> flatten(const ModelParams& p);
void unflatten(ModelParams& p, std::span<const double> flat); // inverse of flatten
ModelParams zero_like(const ModelParams& p);

// --- forward / backward ---

// Per-layer branch keep/scale factors for stochastic depth: 2 per transformer
// layer (attention branch, MLP branch). Empty means eval mode (all 1).
std::vector<double> draw_drop_scales(const ModelConfig& cfg, SplitMix64& gen);

// One transformer layer; drop scales of 0 remove a branch entirely, 1 keeps
// it unscaled.
Tensor transformer_layer_forward(const Tensor& x, const LayerParams& lp, int shift, int workers,
                                 double drop_attn = 1.0, double drop_mlp = 1.0);

struct TransformerLayerGrad {
    Tensor d_x;
    LayerParams by_param; // gradients in a layer-shaped container
};

TransformerLayerGrad transformer_layer_backward(const Tensor& x, const LayerParams& lp, int shift,
                                                const Tensor& cotangent, int workers,
                                                double drop_attn = 1.0, double drop_mlp = 1.0);

Tensor model_forward(const Tensor& x, const ModelParams& p, const ModelConfig& cfg, int workers,
                     std::span<const double> drop_scales = {});

// Deepest pre-upsample activation map [H, W, D]: trunk output after the
// global residual, before conv_up / pixel shuffle.
Tensor model_features(const Tensor& x, const ModelParams& p, const ModelConfig& cfg, int workers);

struct ModelGrad {
    Tensor d_x;
    ModelParams by_param; // gradients stored in a params-shaped container
};

ModelGrad model_backward(const Tensor& x, const ModelParams& p, const ModelConfig& cfg,
                         const Tensor& cotangent, int workers,
                         std::span<const double> drop_scales = {});

// --- resource accounting ---

struct ResourceReport {
    int qubits_per_circuit = 0;       // max over every circuit in the network
    long circuits_per_forward = 0;    // circuit invocations for one H x W input
    std::size_t param_count = 0;      // trainable scalars (flat-view length)
    int formula_qubits = 0;           // ceil(log2 D) + ancilla count (0)
};

ResourceReport resource_report(const ModelConfig& cfg, int h = 14, int w = 14);

} // namespace qsr::model
