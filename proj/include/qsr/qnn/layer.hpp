#pragma once

#include <span>
#include <vector>

#include "qsr/qsim/circuit.hpp"
#include "qsr/rng.hpp"
#include "qsr/tensor.hpp"

namespace qsr::qnn {

using qsim::QuantumLayerParams;

// Depth rule for basis and observable selection: a depth-1 layer embeds and
// rotates about Z and measures Z only (output width n); deeper layers use all
// three axes and measure X, Y, Z (width 3n).
qsim::CircuitStructure layer_structure(int n_qubits, int depth);

// Structure per the depth rule, theta drawn uniform [0, 2pi).
QuantumLayerParams make_quantum_layer(int n_qubits, int depth, SplitMix64& gen);

std::vector<double> quantum_layer_forward(std::span<const double> x, const QuantumLayerParams& p);

struct LayerGrad {
    std::vector<double> d_x;
    std::vector<double> d_theta;
};

LayerGrad quantum_layer_backward(std::span<const double> x, const QuantumLayerParams& p,
                                 std::span<const double> cotangent);

// Token-batched variants: x is [tokens, n_qubits], outputs [tokens, width].
// The backward accumulates d_theta over tokens. Both funnel every circuit
// execution (all tokens, all parameter shifts) into one qsim batch.
Tensor quantum_layer_forward_batch(const Tensor& x, const QuantumLayerParams& p, int workers);

struct LayerBatchGrad {
    Tensor d_x;                 // [tokens, n_qubits]
    std::vector<double> d_theta; // summed over tokens
};

LayerBatchGrad quantum_layer_backward_batch(const Tensor& x, const QuantumLayerParams& p,
                                            const Tensor& cotangent, int workers);

} // namespace qsr::qnn
