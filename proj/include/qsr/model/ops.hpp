#pragma once

#include <vector>

#include "qsr/rng.hpp"
#include "qsr/tensor.hpp"

namespace qsr::model {

// 3x3 convolution, stride 1, zero padding 1. Weights row-major
// [out_ch][in_ch][3][3].
struct Conv2d {
    int in_ch = 0;
    int out_ch = 0;
    std::vector<double> w;
    std::vector<double> b;
};

// Weights truncated normal (std 0.02, cut at 2 sigma), biases zero.
Conv2d make_conv(int in_ch, int out_ch, SplitMix64& gen);
void validate_conv(const Conv2d& c);

Tensor conv2d_3x3(const Tensor& x, const Conv2d& c); // [H,W,in] -> [H,W,out]

struct ConvGrad {
    Tensor d_x;
    std::vector<double> d_w;
    std::vector<double> d_b;
};

ConvGrad conv2d_3x3_backward(const Tensor& x, const Conv2d& c, const Tensor& cotangent);

// Per-token normalization over the trailing dim (biased variance, eps 1e-5),
// then elementwise affine. Works on any shape whose last axis is D.
inline constexpr double kLayerNormEps = 1e-5;

Tensor layer_norm(const Tensor& x, const std::vector<double>& scale,
                  const std::vector<double>& bias);

struct LayerNormGrad {
    Tensor d_x;
    std::vector<double> d_scale;
    std::vector<double> d_bias;
};

LayerNormGrad layer_norm_backward(const Tensor& x, const std::vector<double>& scale,
                                  const Tensor& cotangent);

// Channel block c*s^2 at (h,w) scatters to the s x s output block, row-major
// within the block: out[s*h+dy, s*w+dx, c] = x[h, w, c*s^2 + dy*s + dx].
Tensor pixel_shuffle(const Tensor& x, int s);   // [H,W,C*s^2] -> [sH,sW,C]
Tensor pixel_unshuffle(const Tensor& x, int s); // exact inverse

} // namespace qsr::model
