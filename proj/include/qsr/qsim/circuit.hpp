#pragma once

#include <span>
#include <vector>

#include "qsr/qsim/state.hpp"

namespace qsr::qsim {

// Shape of a variational circuit; every instance of a batch must share it.
//
// The circuit runs one block per embedding basis, in order: angle-embed the
// inputs with rotations about that basis axis, then `depth` entangler layers
// (per-qubit rotations about the same axis followed by an open CNOT chain
// qubit i -> i+1). Measured output is one expectation per (observable kind,
// qubit), kind-major and qubit-minor.
struct CircuitStructure {
    int n_qubits = 0;
    int depth = 1; // entangler layers per basis block
    std::vector<Axis> bases;
    std::vector<Axis> observable_kinds;

    int output_width() const { return int(observable_kinds.size()) * n_qubits; }
    int theta_count() const { return int(bases.size()) * depth * n_qubits; }
    int theta_index(int basis, int layer, int qubit) const {
        return (basis * depth + layer) * n_qubits + qubit;
    }
    bool operator==(const CircuitStructure&) const = default;
};

// Structure plus the trainable entangler angles, theta[basis][layer][qubit].
struct QuantumLayerParams {
    CircuitStructure structure;
    std::vector<double> theta;

    double& theta_at(int basis, int layer, int qubit) {
        return theta[size_t(structure.theta_index(basis, layer, qubit))];
    }
    double theta_at(int basis, int layer, int qubit) const {
        return theta[size_t(structure.theta_index(basis, layer, qubit))];
    }
};

void validate_structure(const CircuitStructure& s);
void validate_params(const QuantumLayerParams& p);

// Fully unrolled angles of one circuit execution: embedding angles per
// (basis, qubit) plus entangler angles laid out like theta. Parameter-shift
// evaluations are expressed as AngleSets so shifted and unshifted circuits
// run through one batched kernel.
struct AngleSet {
    std::vector<double> embed; // [bases][n_qubits]
    std::vector<double> train; // [bases][depth][n_qubits]
};

AngleSet make_angle_set(std::span<const double> inputs, const QuantumLayerParams& p);

// Statevector execution of one AngleSet; out has structure.output_width() slots.
void run_angles(const CircuitStructure& s, const AngleSet& a, double* out);

// Independent executions of many AngleSets sharing one structure. Results are
// written to out row-major (count x output_width). Identical bit patterns for
// any worker count: each instance touches only its own row.
void run_angle_batch(const CircuitStructure& s, std::span<const AngleSet> sets, double* out,
                     int workers);

// --- spec-level operations ---

std::vector<double> run_circuit(std::span<const double> inputs, const QuantumLayerParams& p);

struct CircuitGrad {
    std::vector<double> d_inputs; // length n_qubits
    std::vector<double> d_theta;  // laid out like theta
};

// Exact gradients via the parameter-shift rule, [f(phi+pi/2)-f(phi-pi/2)]/2
// per rotation occurrence, contracted with the seed cotangent. Embedding
// angles appear once per basis block; their contributions sum into d_inputs.
CircuitGrad parameter_shift_grad(std::span<const double> inputs, const QuantumLayerParams& p,
                                 std::span<const double> seed_cotangent, int workers = 1);

struct CircuitInstance {
    std::vector<double> inputs;
    QuantumLayerParams params;
};

// Order-preserving pure map; output[i] is bitwise equal to
// run_circuit(instances[i]) for every worker count.
std::vector<std::vector<double>> batch_execute(std::span<const CircuitInstance> instances,
                                               int workers);

// Serial reference for the batched kernel, kept for equivalence tests and the
// throughput benchmark.
std::vector<std::vector<double>> batch_execute_serial(std::span<const CircuitInstance> instances);

} // namespace qsr::qsim
