#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "qsr/error.hpp"

namespace qsr::qsim {

using cplx = std::complex<double>;

// Hard simulation budgets: 2^12 amplitudes pure, 4^8 entries mixed.
inline constexpr int kMaxPureQubits = 12;
inline constexpr int kMaxDensityQubits = 8;

enum class Axis { X, Y, Z };

// Single gate from the supported set. Rotations follow R(theta) = exp(-i theta sigma / 2);
// angles are radians, unreduced.
struct Gate {
    enum class Kind { RX, RY, RZ, CNOT };
    Kind kind;
    int target;
    int control = -1; // CNOT only
    double angle = 0.0;

    static Gate rx(int q, double a) { return {Kind::RX, q, -1, a}; }
    static Gate ry(int q, double a) { return {Kind::RY, q, -1, a}; }
    static Gate rz(int q, double a) { return {Kind::RZ, q, -1, a}; }
    static Gate cnot(int control, int target) { return {Kind::CNOT, target, control, 0.0}; }
    static Gate rotation(Axis ax, int q, double a) {
        switch (ax) {
            case Axis::X: return rx(q, a);
            case Axis::Y: return ry(q, a);
            default: return rz(q, a);
        }
    }
};

// Single-qubit Pauli observable.
struct Observable {
    Axis kind;
    int qubit;
};

// Pure n-qubit register, little-endian basis ordering (qubit 0 = LSB).
class StateVector {
  public:
    explicit StateVector(int n_qubits) : n_(n_qubits) {
        if (n_qubits < 1 || n_qubits > kMaxPureQubits)
            throw CapacityError("StateVector: n_qubits must be in 1.." +
                                std::to_string(kMaxPureQubits));
        amp_.assign(size_t(1) << n_qubits, cplx(0.0, 0.0));
        amp_[0] = cplx(1.0, 0.0);
    }

    int n_qubits() const { return n_; }
    size_t dim() const { return amp_.size(); }
    std::span<const cplx> amplitudes() const { return amp_; }
    std::span<cplx> amplitudes() { return amp_; }

    double norm_sq() const {
        double s = 0.0;
        for (const cplx& a : amp_) s += std::norm(a);
        return s;
    }

  private:
    int n_;
    std::vector<cplx> amp_;
};

namespace detail {

// Apply a 2x2 unitary [[u00,u01],[u10,u11]] to qubit q of a 2^n amplitude array.
inline void apply_2x2(cplx* amp, size_t dim, int q, cplx u00, cplx u01, cplx u10, cplx u11) {
    const size_t mask = size_t(1) << q;
    for (size_t i = 0; i < dim; ++i) {
        if ((i & mask) == 0) {
            const cplx a = amp[i];
            const cplx b = amp[i | mask];
            amp[i] = u00 * a + u01 * b;
            amp[i | mask] = u10 * a + u11 * b;
        }
    }
}

inline void apply_gate_raw(cplx* amp, size_t dim, const Gate& g) {
    const double c = std::cos(g.angle / 2.0);
    const double s = std::sin(g.angle / 2.0);
    switch (g.kind) {
        case Gate::Kind::RX:
            apply_2x2(amp, dim, g.target, cplx(c, 0), cplx(0, -s), cplx(0, -s), cplx(c, 0));
            break;
        case Gate::Kind::RY:
            apply_2x2(amp, dim, g.target, cplx(c, 0), cplx(-s, 0), cplx(s, 0), cplx(c, 0));
            break;
        case Gate::Kind::RZ: {
            const cplx e0(c, -s);
            const cplx e1(c, s);
            const size_t mask = size_t(1) << g.target;
            for (size_t i = 0; i < dim; ++i) amp[i] *= (i & mask) ? e1 : e0;
            break;
        }
        case Gate::Kind::CNOT: {
            const size_t cm = size_t(1) << g.control;
            const size_t tm = size_t(1) << g.target;
            for (size_t i = 0; i < dim; ++i) {
                if ((i & cm) && !(i & tm)) std::swap(amp[i], amp[i | tm]);
            }
            break;
        }
    }
}

inline double expectation_raw(const cplx* amp, size_t dim, const Observable& o) {
    const size_t mask = size_t(1) << o.qubit;
    double acc = 0.0;
    switch (o.kind) {
        case Axis::Z:
            for (size_t i = 0; i < dim; ++i) acc += (i & mask) ? -std::norm(amp[i]) : std::norm(amp[i]);
            break;
        case Axis::X:
            // <X> = sum over paired amplitudes of 2 Re(conj(a0) a1)
            for (size_t i = 0; i < dim; ++i)
                if ((i & mask) == 0) acc += 2.0 * std::real(std::conj(amp[i]) * amp[i | mask]);
            break;
        case Axis::Y:
            // <Y> = sum over paired amplitudes of 2 Im(conj(a0) a1)
            for (size_t i = 0; i < dim; ++i)
                if ((i & mask) == 0) acc += 2.0 * std::imag(std::conj(amp[i]) * amp[i | mask]);
            break;
    }
    // clamp float excursions just past the physical range
    if (acc > 1.0 && acc < 1.0 + 1e-12) acc = 1.0;
    if (acc < -1.0 && acc > -1.0 - 1e-12) acc = -1.0;
    return acc;
}

} // namespace detail

inline void validate_gate(const Gate& g, int n_qubits) {
    if (g.target < 0 || g.target >= n_qubits) throw StructureError("gate target out of range");
    if (g.kind == Gate::Kind::CNOT) {
        if (g.control < 0 || g.control >= n_qubits) throw StructureError("gate control out of range");
        if (g.control == g.target) throw StructureError("CNOT control equals target");
    } else if (!std::isfinite(g.angle)) {
        throw ValidationError("rotation angle must be finite");
    }
}

// In-place unitary update of the state.
inline void apply_gate(StateVector& state, const Gate& g) {
    validate_gate(g, state.n_qubits());
    detail::apply_gate_raw(state.amplitudes().data(), state.dim(), g);
}

// <psi|O|psi>, clamped only against 1e-12 float excursions.
inline double expectation(const StateVector& state, const Observable& o) {
    if (o.qubit < 0 || o.qubit >= state.n_qubits()) throw StructureError("observable qubit out of range");
    return detail::expectation_raw(state.amplitudes().data(), state.dim(), o);
}

} // namespace qsr::qsim
