// Independent reference implementations used only by tests. Everything here
// goes through dense matrix algebra (Kronecker embeddings composed into full
// 2^n x 2^n operators) so it shares no code path with the bit-twiddling
// production kernels.
#pragma once

#include <complex>
#include <span>
#include <vector>

#include "qsr/qsim/circuit.hpp"
#include "qsr/qsim/density.hpp"

namespace oracle {

using qsr::qsim::Axis;
using qsr::qsim::cplx;
using qsr::qsim::Gate;

using CMat = std::vector<cplx>; // row-major square matrix

inline CMat identity(size_t d) {
    CMat m(d * d, cplx(0, 0));
    for (size_t i = 0; i < d; ++i) m[i * d + i] = 1.0;
    return m;
}

inline CMat kron(const CMat& a, size_t da, const CMat& b, size_t db) {
    const size_t d = da * db;
    CMat c(d * d, cplx(0, 0));
    for (size_t ia = 0; ia < da; ++ia)
        for (size_t ja = 0; ja < da; ++ja)
            for (size_t ib = 0; ib < db; ++ib)
                for (size_t jb = 0; jb < db; ++jb)
                    c[(ia * db + ib) * d + (ja * db + jb)] = a[ia * da + ja] * b[ib * db + jb];
    return c;
}

inline CMat matmul(const CMat& a, const CMat& b, size_t d) {
    CMat c(d * d, cplx(0, 0));
    for (size_t i = 0; i < d; ++i)
        for (size_t k = 0; k < d; ++k) {
            const cplx aik = a[i * d + k];
            if (aik == cplx(0, 0)) continue;
            for (size_t j = 0; j < d; ++j) c[i * d + j] += aik * b[k * d + j];
        }
    return c;
}

inline CMat adjoint(const CMat& a, size_t d) {
    CMat c(d * d);
    for (size_t i = 0; i < d; ++i)
        for (size_t j = 0; j < d; ++j) c[j * d + i] = std::conj(a[i * d + j]);
    return c;
}

inline std::vector<cplx> matvec(const CMat& a, const std::vector<cplx>& v) {
    const size_t d = v.size();
    std::vector<cplx> r(d, cplx(0, 0));
    for (size_t i = 0; i < d; ++i)
        for (size_t j = 0; j < d; ++j) r[i] += a[i * d + j] * v[j];
    return r;
}

// 2x2 rotation from R(n, phi) = cos(phi/2) I - i sin(phi/2) (n . sigma)
inline CMat rotation2(Gate::Kind kind, double angle) {
    const double c = std::cos(angle / 2.0);
    const double s = std::sin(angle / 2.0);
    switch (kind) {
        case Gate::Kind::RX: return {cplx(c, 0), cplx(0, -s), cplx(0, -s), cplx(c, 0)};
        case Gate::Kind::RY: return {cplx(c, 0), cplx(-s, 0), cplx(s, 0), cplx(c, 0)};
        default: return {cplx(c, -s), cplx(0, 0), cplx(0, 0), cplx(c, s)};
    }
}

inline CMat pauli2(Axis a) {
    switch (a) {
        case Axis::X: return {cplx(0, 0), cplx(1, 0), cplx(1, 0), cplx(0, 0)};
        case Axis::Y: return {cplx(0, 0), cplx(0, -1), cplx(0, 1), cplx(0, 0)};
        default: return {cplx(1, 0), cplx(0, 0), cplx(0, 0), cplx(-1, 0)};
    }
}

// I_{2^(n-1-q)} (x) u (x) I_{2^q}: little-endian, qubit 0 is the LSB so it
// sits in the rightmost Kronecker factor.
inline CMat embed1(const CMat& u, int q, int n) {
    CMat lo = identity(size_t(1) << q);
    CMat mid = kron(u, 2, lo, size_t(1) << q);
    CMat hi = identity(size_t(1) << (n - 1 - q));
    return kron(hi, size_t(1) << (n - 1 - q), mid, size_t(2) << q);
}

inline CMat cnot_full(int control, int target, int n) {
    const size_t d = size_t(1) << n;
    const size_t cm = size_t(1) << control;
    const size_t tm = size_t(1) << target;
    CMat m(d * d, cplx(0, 0));
    for (size_t i = 0; i < d; ++i) {
        const size_t j = (i & cm) ? (i ^ tm) : i;
        m[j * d + i] = 1.0;
    }
    return m;
}

inline CMat gate_full(const Gate& g, int n) {
    if (g.kind == Gate::Kind::CNOT) return cnot_full(g.control, g.target, n);
    return embed1(rotation2(g.kind, g.angle), g.target, n);
}

inline std::vector<cplx> run_gates_dense(const std::vector<Gate>& gates, int n) {
    std::vector<cplx> psi(size_t(1) << n, cplx(0, 0));
    psi[0] = 1.0;
    for (const Gate& g : gates) psi = matvec(gate_full(g, n), psi);
    return psi;
}

inline double expect_dense(const std::vector<cplx>& psi, Axis a, int q, int n) {
    const std::vector<cplx> opsi = matvec(embed1(pauli2(a), q, n), psi);
    cplx acc(0, 0);
    for (size_t i = 0; i < psi.size(); ++i) acc += std::conj(psi[i]) * opsi[i];
    return std::real(acc);
}

// The circuit definition restated: per basis, angle-embed then depth layers of
// per-qubit rotations plus the open CNOT chain.
inline std::vector<Gate> circuit_gates(std::span<const double> inputs,
                                       const qsr::qsim::QuantumLayerParams& p) {
    const auto& s = p.structure;
    std::vector<Gate> gates;
    for (size_t r = 0; r < s.bases.size(); ++r) {
        for (int i = 0; i < s.n_qubits; ++i)
            gates.push_back(Gate::rotation(s.bases[r], i, inputs[size_t(i)]));
        for (int l = 0; l < s.depth; ++l) {
            for (int i = 0; i < s.n_qubits; ++i)
                gates.push_back(Gate::rotation(s.bases[r], i, p.theta_at(int(r), l, i)));
            for (int i = 0; i + 1 < s.n_qubits; ++i) gates.push_back(Gate::cnot(i, i + 1));
        }
    }
    return gates;
}

inline std::vector<double> run_circuit_dense(std::span<const double> inputs,
                                             const qsr::qsim::QuantumLayerParams& p) {
    const auto& s = p.structure;
    const std::vector<cplx> psi = run_gates_dense(circuit_gates(inputs, p), s.n_qubits);
    std::vector<double> out;
    for (Axis kind : s.observable_kinds)
        for (int i = 0; i < s.n_qubits; ++i) out.push_back(expect_dense(psi, kind, i, s.n_qubits));
    return out;
}

// --- dense mixed-state path ---

inline CMat outer_e0(int n) {
    const size_t d = size_t(1) << n;
    CMat rho(d * d, cplx(0, 0));
    rho[0] = 1.0;
    return rho;
}

inline CMat conjugate_by(const CMat& u, const CMat& rho, size_t d) {
    return matmul(matmul(u, rho, d), adjoint(u, d), d);
}

inline CMat channel_dense(const CMat& rho, const qsr::qsim::NoiseChannel& ch, int q, int n) {
    const size_t d = size_t(1) << n;
    CMat acc(d * d, cplx(0, 0));
    for (const qsr::qsim::Kraus2& k : qsr::qsim::kraus_ops(ch)) {
        const CMat kf = embed1(CMat(k.begin(), k.end()), q, n);
        const CMat term = conjugate_by(kf, rho, d);
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += term[i];
    }
    return acc;
}

inline std::vector<double> run_noisy_dense(std::span<const double> inputs,
                                           const qsr::qsim::QuantumLayerParams& p,
                                           const qsr::qsim::NoiseChannel& ch) {
    const auto& s = p.structure;
    const int n = s.n_qubits;
    const size_t d = size_t(1) << n;
    CMat rho = outer_e0(n);
    for (size_t r = 0; r < s.bases.size(); ++r) {
        for (int i = 0; i < n; ++i)
            rho = conjugate_by(gate_full(Gate::rotation(s.bases[r], i, inputs[size_t(i)]), n), rho, d);
        for (int l = 0; l < s.depth; ++l) {
            for (int i = 0; i < n; ++i)
                rho = conjugate_by(gate_full(Gate::rotation(s.bases[r], i, p.theta_at(int(r), l, i)), n),
                                   rho, d);
            for (int i = 0; i + 1 < n; ++i)
                rho = conjugate_by(gate_full(Gate::cnot(i, i + 1), n), rho, d);
            for (int i = 0; i < n; ++i) rho = channel_dense(rho, ch, i, n);
        }
    }
    std::vector<double> out;
    for (Axis kind : s.observable_kinds)
        for (int i = 0; i < n; ++i) {
            const CMat op = embed1(pauli2(kind), i, n);
            const CMat prod = matmul(rho, op, d);
            cplx tr(0, 0);
            for (size_t j = 0; j < d; ++j) tr += prod[j * d + j];
            out.push_back(std::real(tr));
        }
    return out;
}

} // namespace oracle
