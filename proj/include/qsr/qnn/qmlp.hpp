#pragma once

#include <span>
#include <vector>

#include "qsr/qnn/layer.hpp"
#include "qsr/rng.hpp"
#include "qsr/tensor.hpp"

namespace qsr::qnn {

// Dense affine map, w row-major [out][in].
struct Affine {
    int in = 0;
    int out = 0;
    std::vector<double> w;
    std::vector<double> b;
};

// Weights truncated normal (std 0.02, cut at 2 sigma), biases zero.
Affine make_affine(int in, int out, SplitMix64& gen);

Tensor affine_forward_batch(const Affine& a, const Tensor& x); // [T,in] -> [T,out]

struct AffineGrad {
    Tensor d_x;
    std::vector<double> d_w;
    std::vector<double> d_b;
};

AffineGrad affine_backward_batch(const Affine& a, const Tensor& x, const Tensor& cotangent);

// Affine expand, quantum layer, affine contract — the quantum circuit is the
// only nonlinearity. hidden = in_dim * ratio is the circuit's qubit count and
// is capped at 10.
struct QmlpParams {
    int in_dim = 0;
    int hidden = 0;
    int out_dim = 0;
    Affine pre;                // in_dim -> hidden
    QuantumLayerParams qlayer; // n_qubits = hidden
    Affine post;               // qlayer output width -> out_dim
};

QmlpParams make_qmlp(int in_dim, int ratio, int out_dim, int qlayer_depth, SplitMix64& gen);
void validate_qmlp(const QmlpParams& p);

std::vector<double> qmlp_forward(std::span<const double> x, const QmlpParams& p);
Tensor qmlp_forward_batch(const Tensor& x, const QmlpParams& p, int workers); // [T,in]->[T,out]

struct QmlpGrad {
    Tensor d_x;
    std::vector<double> d_pre_w, d_pre_b;
    std::vector<double> d_theta;
    std::vector<double> d_post_w, d_post_b;
};

QmlpGrad qmlp_backward_batch(const Tensor& x, const QmlpParams& p, const Tensor& cotangent,
                             int workers);

} // namespace qsr::qnn
