#pragma once

#include <array>
#include <span>
#include <vector>

#include "qsr/qsim/circuit.hpp"
#include "qsr/qsim/state.hpp"

namespace qsr::qsim {

// Mixed n-qubit state, dense row-major 2^n x 2^n, same little-endian basis
// ordering as StateVector. Capped at 8 qubits (4^8 complex entries).
class DensityMatrix {
  public:
    explicit DensityMatrix(int n_qubits);

    int n_qubits() const { return n_; }
    size_t dim() const { return dim_; }
    cplx& at(size_t row, size_t col) { return rho_[row * dim_ + col]; }
    const cplx& at(size_t row, size_t col) const { return rho_[row * dim_ + col]; }
    std::span<cplx> entries() { return rho_; }
    std::span<const cplx> entries() const { return rho_; }

    double trace_real() const;
    double purity() const; // tr(rho^2), 1 iff pure

  private:
    int n_;
    size_t dim_;
    std::vector<cplx> rho_;
};

// rho -> U rho U^dagger for the same gate set as the pure simulator.
void apply_gate(DensityMatrix& rho, const Gate& g);

// tr(rho O) for a single-qubit Pauli, clamped like the pure expectation.
double expectation(const DensityMatrix& rho, const Observable& o);

// Single-qubit noise described by its Kraus operators; strength is the
// channel's probability-like parameter in [0, 1].
struct NoiseChannel {
    enum class Kind { Depolarizing, AmplitudeDamping, PhaseDamping, BitFlip };
    Kind kind;
    double strength = 0.0;
};

using Kraus2 = std::array<cplx, 4>; // row-major 2x2

// Kraus set for the channel. Depolarizing uses the replace-with-I/2 form
// {sqrt(1-3p/4) I, sqrt(p/4) X, sqrt(p/4) Y, sqrt(p/4) Z}, so strength 1 sends
// every state to the maximally mixed state. All sets satisfy
// sum K^dagger K = I for any strength in [0, 1].
std::vector<Kraus2> kraus_ops(const NoiseChannel& ch);

// rho -> sum_k K_k rho K_k^dagger on one qubit.
void apply_channel(DensityMatrix& rho, const NoiseChannel& ch, int qubit);

// Density-matrix run of the variational circuit with the channel applied to
// every qubit after each entangler layer, the last included. Output matches
// run_circuit's ordering and degrades toward it as strength -> 0.
std::vector<double> run_noisy_circuit(std::span<const double> inputs, const QuantumLayerParams& p,
                                      const NoiseChannel& ch);

// AngleSet variant of the above, the form the ambient override consumes.
void run_angles_noisy(const CircuitStructure& s, const AngleSet& a, const NoiseChannel& ch,
                      double* out);

// Ambient noise override: while a scope object lives, every circuit
// execution in the process routes through the density-matrix simulator with
// the channel applied after each entangler layer. Lets noise sweeps evaluate
// a trained network under hardware-style noise without rewiring any caller.
// Install at most one scope at a time, outside parallel regions.
class NoiseScope {
  public:
    explicit NoiseScope(const NoiseChannel& ch);
    ~NoiseScope();
    NoiseScope(const NoiseScope&) = delete;
    NoiseScope& operator=(const NoiseScope&) = delete;
};

const NoiseChannel* ambient_noise();

} // namespace qsr::qsim
