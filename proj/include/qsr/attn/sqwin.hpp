#pragma once

#include <vector>

#include "qsr/attn/window.hpp"
#include "qsr/qnn/qmlp.hpp"
#include "qsr/rng.hpp"
#include "qsr/tensor.hpp"

namespace qsr::attn {

inline constexpr double kKappaMax = 100.0; // logit scale clamp: kappa = exp(min(raw, ln 100))

double softplus(double x);
double kappa_of(double raw);

// Shifted window attention with variational-circuit projections. Q, K, V and
// the output transform are depth-1 quantum layers over the channel dim, so
// each emits exactly `dim` values per token. Logits are scaled cosine
// similarity plus a continuous relative position bias (a 2 -> num_heads
// quantum MLP over log-spaced displacements) plus the shift mask; a
// dot-product/sqrt(dh) variant is kept as a fallback for ablation.
struct SqwinParams {
    int dim = 0;       // token channels D
    int window = 0;    // M
    int num_heads = 0; // must divide dim
    bool cosine = true;

    qnn::QuantumLayerParams theta_q, theta_k, theta_v, theta_o;
    std::vector<double> kappa_raw; // per head
    qnn::QmlpParams bias_mlp;      // 2 -> num_heads
    double gamma_x_raw = 0.0;      // softplus-reparameterized, init gamma = 8
    double gamma_y_raw = 0.0;
};

// kappa_raw starts at ln 10; bias_mlp hidden = 2 * bias_ratio qubits.
SqwinParams make_sqwin(int dim, int window, int num_heads, int bias_ratio, int bias_depth,
                       SplitMix64& gen);
void validate_sqwin(const SqwinParams& p);

// Per-head bias table [num_heads, M*M, M*M]: token displacements mapped to
// sign(d) * log2(1 + |d|/gamma) features, then through the bias MLP.
Tensor log_relative_bias(int m, double gamma_x, double gamma_y, const qnn::QmlpParams& bias_mlp,
                         int workers);

Tensor sqwin_forward(const Tensor& x, const SqwinParams& p, int shift, int workers);

// Post-softmax weights [num_windows, num_heads, M*M, M*M], for analysis and
// tests; rows sum to 1 and masked pairs carry (numerically) zero weight.
Tensor sqwin_attention(const Tensor& x, const SqwinParams& p, int shift, int workers);

struct SqwinGrad {
    Tensor d_x;
    std::vector<double> d_theta_q, d_theta_k, d_theta_v, d_theta_o;
    std::vector<double> d_kappa_raw;
    qnn::QmlpGrad d_bias; // d_x member unused (bias inputs are not trainable)
    double d_gamma_x_raw = 0.0;
    double d_gamma_y_raw = 0.0;
};

SqwinGrad sqwin_backward(const Tensor& x, const SqwinParams& p, int shift,
                         const Tensor& cotangent, int workers);

} // namespace qsr::attn
