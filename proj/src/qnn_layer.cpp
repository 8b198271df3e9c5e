#include "qsr/qnn/layer.hpp"

#include <cmath>
#include <numbers>

#include "qsr/error.hpp"

namespace qsr::qnn {

using qsim::AngleSet;
using qsim::Axis;
using qsim::CircuitStructure;

CircuitStructure layer_structure(int n_qubits, int depth) {
    CircuitStructure s;
    s.n_qubits = n_qubits;
    s.depth = depth;
    if (depth == 1) {
        s.bases = {Axis::Z};
        s.observable_kinds = {Axis::Z};
    } else {
        s.bases = {Axis::X, Axis::Y, Axis::Z};
        s.observable_kinds = {Axis::X, Axis::Y, Axis::Z};
    }
    return s;
}

QuantumLayerParams make_quantum_layer(int n_qubits, int depth, SplitMix64& gen) {
    QuantumLayerParams p;
    p.structure = layer_structure(n_qubits, depth);
    qsim::validate_structure(p.structure);
    p.theta.resize(size_t(p.structure.theta_count()));
    for (double& t : p.theta) t = gen.uniform(0.0, 2.0 * std::numbers::pi);
    qsim::validate_params(p);
    return p;
}

std::vector<double> quantum_layer_forward(std::span<const double> x, const QuantumLayerParams& p) {
    return qsim::run_circuit(x, p);
}

LayerGrad quantum_layer_backward(std::span<const double> x, const QuantumLayerParams& p,
                                 std::span<const double> cotangent) {
    qsim::CircuitGrad g = qsim::parameter_shift_grad(x, p, cotangent);
    return {std::move(g.d_inputs), std::move(g.d_theta)};
}

Tensor quantum_layer_forward_batch(const Tensor& x, const QuantumLayerParams& p, int workers) {
    qsim::validate_params(p);
    const CircuitStructure& s = p.structure;
    if (x.rank() != 2 || x.shape[1] != s.n_qubits)
        throw ValidationError("layer batch expects [tokens, n_qubits] input");
    const int tokens = x.shape[0];
    const int width = s.output_width();

    std::vector<AngleSet> sets;
    sets.reserve(size_t(tokens));
    for (int t = 0; t < tokens; ++t)
        sets.push_back(qsim::make_angle_set({x.data() + size_t(t) * size_t(s.n_qubits),
                                             size_t(s.n_qubits)},
                                            p));
    Tensor out({tokens, width});
    qsim::run_angle_batch(s, sets, out.data(), workers);
    return out;
}

LayerBatchGrad quantum_layer_backward_batch(const Tensor& x, const QuantumLayerParams& p,
                                            const Tensor& cotangent, int workers) {
    qsim::validate_params(p);
    const CircuitStructure& s = p.structure;
    const int n = s.n_qubits;
    const int width = s.output_width();
    if (x.rank() != 2 || x.shape[1] != n)
        throw ValidationError("layer batch expects [tokens, n_qubits] input");
    const int tokens = x.shape[0];
    cotangent.require_shape({tokens, width});

    // One +/-pi/2 evaluation pair per rotation occurrence per token, all in a
    // single batch: token t occupies rows [t * 2 * occ, (t+1) * 2 * occ).
    const size_t n_embed = s.bases.size() * size_t(n);
    const size_t n_train = size_t(s.theta_count());
    const size_t occ = n_embed + n_train;
    constexpr double shift = std::numbers::pi / 2;

    std::vector<AngleSet> sets;
    sets.reserve(size_t(tokens) * 2 * occ);
    for (int t = 0; t < tokens; ++t) {
        const AngleSet base =
            qsim::make_angle_set({x.data() + size_t(t) * size_t(n), size_t(n)}, p);
        for (size_t k = 0; k < occ; ++k) {
            for (double sgn : {shift, -shift}) {
                AngleSet a = base;
                if (k < n_embed)
                    a.embed[k] += sgn;
                else
                    a.train[k - n_embed] += sgn;
                sets.push_back(std::move(a));
            }
        }
    }
    std::vector<double> outs(sets.size() * size_t(width));
    qsim::run_angle_batch(s, sets, outs.data(), workers);

    LayerBatchGrad g;
    g.d_x = Tensor({tokens, n});
    g.d_theta.assign(n_train, 0.0);
    for (int t = 0; t < tokens; ++t) {
        const double* cot = cotangent.data() + size_t(t) * size_t(width);
        const double* rows = outs.data() + size_t(t) * 2 * occ * size_t(width);
        for (size_t k = 0; k < occ; ++k) {
            const double* plus = rows + (2 * k) * size_t(width);
            const double* minus = rows + (2 * k + 1) * size_t(width);
            double acc = 0.0;
            for (int j = 0; j < width; ++j) acc += cot[j] * 0.5 * (plus[j] - minus[j]);
            if (k < n_embed)
                g.d_x.at(t, int(k % size_t(n))) += acc;
            else
                g.d_theta[k - n_embed] += acc;
        }
    }
    return g;
}

} // namespace qsr::qnn
