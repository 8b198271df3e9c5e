#include "qsr/qsim/circuit.hpp"

#include "qsr/qsim/density.hpp"

#include <cmath>
#include <numbers>

#include "qsr/error.hpp"

namespace qsr::qsim {

void validate_structure(const CircuitStructure& s) {
    if (s.n_qubits < 1 || s.n_qubits > kMaxPureQubits)
        throw CapacityError("circuit qubit count " + std::to_string(s.n_qubits) +
                            " outside 1.." + std::to_string(kMaxPureQubits));
    if (s.depth < 1) throw StructureError("circuit depth must be >= 1");
    if (s.bases.empty()) throw StructureError("circuit needs at least one embedding basis");
    if (s.observable_kinds.empty()) throw StructureError("circuit needs at least one observable kind");
}

namespace {

void validate_inputs(std::span<const double> inputs, const CircuitStructure& s) {
    if (int(inputs.size()) != s.n_qubits)
        throw ValidationError("circuit expects " + std::to_string(s.n_qubits) + " inputs, got " +
                              std::to_string(inputs.size()));
    for (double x : inputs)
        if (!std::isfinite(x)) throw ValidationError("non-finite circuit input");
}

} // namespace

void validate_params(const QuantumLayerParams& p) {
    validate_structure(p.structure);
    if (int(p.theta.size()) != p.structure.theta_count())
        throw StructureError("theta has " + std::to_string(p.theta.size()) + " angles, structure needs " +
                             std::to_string(p.structure.theta_count()));
    for (double t : p.theta)
        if (!std::isfinite(t)) throw ValidationError("non-finite circuit parameter");
}

AngleSet make_angle_set(std::span<const double> inputs, const QuantumLayerParams& p) {
    AngleSet a;
    a.embed.reserve(p.structure.bases.size() * size_t(p.structure.n_qubits));
    for (size_t r = 0; r < p.structure.bases.size(); ++r)
        a.embed.insert(a.embed.end(), inputs.begin(), inputs.end());
    a.train = p.theta;
    return a;
}

void run_angles(const CircuitStructure& s, const AngleSet& a, double* out) {
    if (const NoiseChannel* ch = ambient_noise()) {
        run_angles_noisy(s, a, *ch, out);
        return;
    }
    const int n = s.n_qubits;
    StateVector psi(n);
    cplx* amp = psi.amplitudes().data();
    const size_t dim = psi.amplitudes().size();
    for (size_t r = 0; r < s.bases.size(); ++r) {
        const Axis axis = s.bases[r];
        for (int i = 0; i < n; ++i)
            detail::apply_gate_raw(amp, dim, Gate::rotation(axis, i, a.embed[r * size_t(n) + i]));
        for (int l = 0; l < s.depth; ++l) {
            for (int i = 0; i < n; ++i)
                detail::apply_gate_raw(amp, dim,
                                       Gate::rotation(axis, i, a.train[size_t(s.theta_index(int(r), l, i))]));
            for (int i = 0; i + 1 < n; ++i)
                detail::apply_gate_raw(amp, dim, Gate::cnot(i, i + 1));
        }
    }
    for (size_t k = 0; k < s.observable_kinds.size(); ++k)
        for (int i = 0; i < n; ++i)
            out[k * size_t(n) + i] = detail::expectation_raw(amp, dim, {s.observable_kinds[k], i});
}

void run_angle_batch(const CircuitStructure& s, std::span<const AngleSet> sets, double* out,
                     int workers) {
    const int width = s.output_width();
    const long count = long(sets.size());
    if (workers < 1) workers = 1;
#pragma omp parallel for schedule(static) num_threads(workers) if (workers > 1 && count > 1)
    for (long b = 0; b < count; ++b) run_angles(s, sets[size_t(b)], out + b * width);
}

std::vector<double> run_circuit(std::span<const double> inputs, const QuantumLayerParams& p) {
    validate_params(p);
    validate_inputs(inputs, p.structure);
    std::vector<double> out(size_t(p.structure.output_width()));
    run_angles(p.structure, make_angle_set(inputs, p), out.data());
    return out;
}

CircuitGrad parameter_shift_grad(std::span<const double> inputs, const QuantumLayerParams& p,
                                 std::span<const double> seed_cotangent, int workers) {
    validate_params(p);
    validate_inputs(inputs, p.structure);
    const CircuitStructure& s = p.structure;
    const int width = s.output_width();
    if (int(seed_cotangent.size()) != width)
        throw ValidationError("cotangent width " + std::to_string(seed_cotangent.size()) +
                              " does not match circuit output width " + std::to_string(width));

    const AngleSet base = make_angle_set(inputs, p);
    const size_t n_embed = base.embed.size();
    const size_t n_train = base.train.size();
    const size_t n_occ = n_embed + n_train;
    constexpr double shift = std::numbers::pi / 2;

    // Occurrence k gets rows 2k (+shift) and 2k+1 (-shift).
    std::vector<AngleSet> shifted(2 * n_occ, base);
    for (size_t k = 0; k < n_embed; ++k) {
        shifted[2 * k].embed[k] += shift;
        shifted[2 * k + 1].embed[k] -= shift;
    }
    for (size_t k = 0; k < n_train; ++k) {
        shifted[2 * (n_embed + k)].train[k] += shift;
        shifted[2 * (n_embed + k) + 1].train[k] -= shift;
    }
    std::vector<double> outs(shifted.size() * size_t(width));
    run_angle_batch(s, shifted, outs.data(), workers);

    CircuitGrad g;
    g.d_inputs.assign(size_t(s.n_qubits), 0.0);
    g.d_theta.assign(n_train, 0.0);
    auto contract = [&](size_t occ) {
        const double* plus = outs.data() + (2 * occ) * size_t(width);
        const double* minus = outs.data() + (2 * occ + 1) * size_t(width);
        double acc = 0.0;
        for (int j = 0; j < width; ++j) acc += seed_cotangent[j] * 0.5 * (plus[j] - minus[j]);
        return acc;
    };
    for (size_t k = 0; k < n_embed; ++k) g.d_inputs[k % size_t(s.n_qubits)] += contract(k);
    for (size_t k = 0; k < n_train; ++k) g.d_theta[k] = contract(n_embed + k);
    return g;
}

std::vector<std::vector<double>> batch_execute(std::span<const CircuitInstance> instances,
                                               int workers) {
    if (instances.empty()) return {};
    const CircuitStructure& s = instances[0].params.structure;
    std::vector<AngleSet> sets;
    sets.reserve(instances.size());
    for (const CircuitInstance& inst : instances) {
        validate_params(inst.params);
        if (!(inst.params.structure == s))
            throw ValidationError("batch_execute requires one shared circuit structure");
        validate_inputs(inst.inputs, s);
        sets.push_back(make_angle_set(inst.inputs, inst.params));
    }
    const int width = s.output_width();
    std::vector<double> flat(instances.size() * size_t(width));
    run_angle_batch(s, sets, flat.data(), workers);
    std::vector<std::vector<double>> out(instances.size());
    for (size_t b = 0; b < instances.size(); ++b)
        out[b].assign(flat.begin() + long(b) * width, flat.begin() + long(b + 1) * width);
    return out;
}

std::vector<std::vector<double>> batch_execute_serial(std::span<const CircuitInstance> instances) {
    std::vector<std::vector<double>> out;
    out.reserve(instances.size());
    if (instances.empty()) return out;
    const CircuitStructure& s = instances[0].params.structure;
    for (const CircuitInstance& inst : instances) {
        validate_params(inst.params);
        if (!(inst.params.structure == s))
            throw ValidationError("batch_execute requires one shared circuit structure");
        out.push_back(run_circuit(inst.inputs, inst.params));
    }
    return out;
}

} // namespace qsr::qsim
