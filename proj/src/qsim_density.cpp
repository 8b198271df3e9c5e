#include "qsr/qsim/density.hpp"

#include <cmath>

#include "qsr/error.hpp"

namespace qsr::qsim {

namespace {

// Left-multiply rho by a 2x2 acting on qubit q: transforms row pairs per column.
void left_2x2(cplx* rho, size_t dim, int q, const Kraus2& u) {
    const size_t mask = size_t(1) << q;
    for (size_t r = 0; r < dim; ++r) {
        if (r & mask) continue;
        cplx* row0 = rho + r * dim;
        cplx* row1 = rho + (r | mask) * dim;
        for (size_t c = 0; c < dim; ++c) {
            const cplx a = row0[c];
            const cplx b = row1[c];
            row0[c] = u[0] * a + u[1] * b;
            row1[c] = u[2] * a + u[3] * b;
        }
    }
}

// Right-multiply rho by the adjoint of a 2x2 on qubit q: column pairs per row.
void right_adjoint_2x2(cplx* rho, size_t dim, int q, const Kraus2& u) {
    const size_t mask = size_t(1) << q;
    for (size_t r = 0; r < dim; ++r) {
        cplx* row = rho + r * dim;
        for (size_t c = 0; c < dim; ++c) {
            if (c & mask) continue;
            const cplx a = row[c];
            const cplx b = row[c | mask];
            row[c] = a * std::conj(u[0]) + b * std::conj(u[1]);
            row[c | mask] = a * std::conj(u[2]) + b * std::conj(u[3]);
        }
    }
}

Kraus2 gate_matrix(const Gate& g) {
    const double c = std::cos(g.angle / 2.0);
    const double s = std::sin(g.angle / 2.0);
    switch (g.kind) {
        case Gate::Kind::RX: return {cplx(c, 0), cplx(0, -s), cplx(0, -s), cplx(c, 0)};
        case Gate::Kind::RY: return {cplx(c, 0), cplx(-s, 0), cplx(s, 0), cplx(c, 0)};
        case Gate::Kind::RZ: return {cplx(c, -s), cplx(0, 0), cplx(0, 0), cplx(c, s)};
        default: throw StructureError("CNOT has no single-qubit matrix");
    }
}

} // namespace

DensityMatrix::DensityMatrix(int n_qubits) : n_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxDensityQubits)
        throw CapacityError("DensityMatrix: n_qubits must be in 1.." +
                            std::to_string(kMaxDensityQubits));
    dim_ = size_t(1) << n_qubits;
    rho_.assign(dim_ * dim_, cplx(0.0, 0.0));
    rho_[0] = cplx(1.0, 0.0);
}

double DensityMatrix::trace_real() const {
    double t = 0.0;
    for (size_t i = 0; i < dim_; ++i) t += std::real(at(i, i));
    return t;
}

double DensityMatrix::purity() const {
    // tr(rho^2) = sum_ij rho_ij conj(rho_ij) for Hermitian rho
    double p = 0.0;
    for (const cplx& e : rho_) p += std::norm(e);
    return p;
}

void apply_gate(DensityMatrix& rho, const Gate& g) {
    validate_gate(g, rho.n_qubits());
    cplx* d = rho.entries().data();
    const size_t dim = rho.dim();
    if (g.kind == Gate::Kind::CNOT) {
        // permutation: swap row pairs, then the same column pairs
        const size_t cm = size_t(1) << g.control;
        const size_t tm = size_t(1) << g.target;
        for (size_t r = 0; r < dim; ++r)
            if ((r & cm) && !(r & tm))
                for (size_t c = 0; c < dim; ++c) std::swap(d[r * dim + c], d[(r | tm) * dim + c]);
        for (size_t c = 0; c < dim; ++c)
            if ((c & cm) && !(c & tm))
                for (size_t r = 0; r < dim; ++r) std::swap(d[r * dim + c], d[r * dim + (c | tm)]);
        return;
    }
    const Kraus2 u = gate_matrix(g);
    left_2x2(d, dim, g.target, u);
    right_adjoint_2x2(d, dim, g.target, u);
}

double expectation(const DensityMatrix& rho, const Observable& o) {
    if (o.qubit < 0 || o.qubit >= rho.n_qubits())
        throw StructureError("observable qubit out of range");
    const size_t mask = size_t(1) << o.qubit;
    const size_t dim = rho.dim();
    double acc = 0.0;
    switch (o.kind) {
        case Axis::Z:
            for (size_t i = 0; i < dim; ++i)
                acc += (i & mask) ? -std::real(rho.at(i, i)) : std::real(rho.at(i, i));
            break;
        case Axis::X:
            // tr(rho X_q) = 2 sum Re(rho[i0][i1]) over pairs (i0 clear, i1 set)
            for (size_t i = 0; i < dim; ++i)
                if ((i & mask) == 0) acc += 2.0 * std::real(rho.at(i, i | mask));
            break;
        case Axis::Y:
            // rho[i0][i1] = a_i0 conj(a_i1) on pure states, so <Y> = -2 Im(rho[i0][i1])
            for (size_t i = 0; i < dim; ++i)
                if ((i & mask) == 0) acc -= 2.0 * std::imag(rho.at(i, i | mask));
            break;
    }
    if (acc > 1.0 && acc < 1.0 + 1e-12) acc = 1.0;
    if (acc < -1.0 && acc > -1.0 - 1e-12) acc = -1.0;
    return acc;
}

std::vector<Kraus2> kraus_ops(const NoiseChannel& ch) {
    const double p = ch.strength;
    if (!(p >= 0.0 && p <= 1.0)) // catches NaN too
        throw ValidationError("noise strength must be in [0, 1]");
    const cplx z(0, 0);
    switch (ch.kind) {
        case NoiseChannel::Kind::Depolarizing: {
            const double k0 = std::sqrt(1.0 - 0.75 * p);
            const double kp = std::sqrt(0.25 * p);
            return {
                {cplx(k0, 0), z, z, cplx(k0, 0)},           // sqrt(1-3p/4) I
                {z, cplx(kp, 0), cplx(kp, 0), z},           // sqrt(p/4) X
                {z, cplx(0, -kp), cplx(0, kp), z},          // sqrt(p/4) Y
                {cplx(kp, 0), z, z, cplx(-kp, 0)},          // sqrt(p/4) Z
            };
        }
        case NoiseChannel::Kind::AmplitudeDamping:
            return {
                {cplx(1, 0), z, z, cplx(std::sqrt(1.0 - p), 0)},
                {z, cplx(std::sqrt(p), 0), z, z},
            };
        case NoiseChannel::Kind::PhaseDamping:
            return {
                {cplx(1, 0), z, z, cplx(std::sqrt(1.0 - p), 0)},
                {z, z, z, cplx(std::sqrt(p), 0)},
            };
        case NoiseChannel::Kind::BitFlip:
            return {
                {cplx(std::sqrt(1.0 - p), 0), z, z, cplx(std::sqrt(1.0 - p), 0)},
                {z, cplx(std::sqrt(p), 0), cplx(std::sqrt(p), 0), z},
            };
    }
    throw StructureError("unknown noise channel kind");
}

void apply_channel(DensityMatrix& rho, const NoiseChannel& ch, int qubit) {
    if (qubit < 0 || qubit >= rho.n_qubits()) throw StructureError("channel qubit out of range");
    const std::vector<Kraus2> ks = kraus_ops(ch);
    const size_t dim = rho.dim();
    std::vector<cplx> accum(dim * dim, cplx(0, 0));
    std::vector<cplx> term(dim * dim);
    for (const Kraus2& k : ks) {
        std::copy(rho.entries().begin(), rho.entries().end(), term.begin());
        left_2x2(term.data(), dim, qubit, k);
        right_adjoint_2x2(term.data(), dim, qubit, k);
        for (size_t i = 0; i < accum.size(); ++i) accum[i] += term[i];
    }
    std::copy(accum.begin(), accum.end(), rho.entries().begin());
}

void run_angles_noisy(const CircuitStructure& s, const AngleSet& a, const NoiseChannel& ch,
                      double* out) {
    if (s.n_qubits > kMaxDensityQubits)
        throw CapacityError("noisy simulation capped at " + std::to_string(kMaxDensityQubits) +
                            " qubits");
    const int n = s.n_qubits;
    DensityMatrix rho(n);
    for (size_t r = 0; r < s.bases.size(); ++r) {
        const Axis axis = s.bases[r];
        for (int i = 0; i < n; ++i)
            apply_gate(rho, Gate::rotation(axis, i, a.embed[r * size_t(n) + i]));
        for (int l = 0; l < s.depth; ++l) {
            for (int i = 0; i < n; ++i)
                apply_gate(rho,
                           Gate::rotation(axis, i, a.train[size_t(s.theta_index(int(r), l, i))]));
            for (int i = 0; i + 1 < n; ++i) apply_gate(rho, Gate::cnot(i, i + 1));
            for (int i = 0; i < n; ++i) apply_channel(rho, ch, i);
        }
    }
    for (size_t k = 0; k < s.observable_kinds.size(); ++k)
        for (int i = 0; i < n; ++i)
            out[k * size_t(n) + i] = expectation(rho, {s.observable_kinds[k], i});
}

std::vector<double> run_noisy_circuit(std::span<const double> inputs, const QuantumLayerParams& p,
                                      const NoiseChannel& ch) {
    validate_params(p);
    const CircuitStructure& s = p.structure;
    if (int(inputs.size()) != s.n_qubits)
        throw ValidationError("circuit expects " + std::to_string(s.n_qubits) + " inputs");
    for (double x : inputs)
        if (!std::isfinite(x)) throw ValidationError("non-finite circuit input");
    kraus_ops(ch); // validates strength up front

    std::vector<double> out(size_t(s.output_width()));
    run_angles_noisy(s, make_angle_set(inputs, p), ch, out.data());
    return out;
}

namespace {
// Ambient override storage; guarded by the one-scope-at-a-time contract.
const NoiseChannel* g_ambient = nullptr;
NoiseChannel g_ambient_storage;
} // namespace

NoiseScope::NoiseScope(const NoiseChannel& ch) {
    if (g_ambient) throw ValidationError("a noise scope is already installed");
    kraus_ops(ch); // validate before publishing
    g_ambient_storage = ch;
    g_ambient = &g_ambient_storage;
}

NoiseScope::~NoiseScope() { g_ambient = nullptr; }

const NoiseChannel* ambient_noise() { return g_ambient; }

} // namespace qsr::qsim
