#include "qsr/qnn/qmlp.hpp"

#include "qsr/error.hpp"

namespace qsr::qnn {

// "fewer than 10 qubits per circuit" budget for the MLP's hidden register
inline constexpr int kMaxQmlpHidden = 10;

Affine make_affine(int in, int out, SplitMix64& gen) {
    if (in < 1 || out < 1) throw ValidationError("affine dims must be positive");
    Affine a;
    a.in = in;
    a.out = out;
    a.w.resize(size_t(out) * size_t(in));
    for (double& v : a.w) v = gen.truncated_normal(0.02);
    a.b.assign(size_t(out), 0.0);
    return a;
}

namespace {

void validate_affine(const Affine& a) {
    if (a.in < 1 || a.out < 1 || a.w.size() != size_t(a.in) * size_t(a.out) ||
        a.b.size() != size_t(a.out))
        throw StructureError("affine shape mismatch");
}

} // namespace

Tensor affine_forward_batch(const Affine& a, const Tensor& x) {
    validate_affine(a);
    if (x.rank() != 2 || x.shape[1] != a.in)
        throw ValidationError("affine expects [tokens, " + std::to_string(a.in) + "] input");
    const int tokens = x.shape[0];
    Tensor y({tokens, a.out});
    for (int t = 0; t < tokens; ++t) {
        const double* xi = x.data() + size_t(t) * size_t(a.in);
        double* yo = y.data() + size_t(t) * size_t(a.out);
        for (int o = 0; o < a.out; ++o) {
            double acc = a.b[size_t(o)];
            const double* wr = a.w.data() + size_t(o) * size_t(a.in);
            for (int i = 0; i < a.in; ++i) acc += wr[i] * xi[i];
            yo[o] = acc;
        }
    }
    return y;
}

AffineGrad affine_backward_batch(const Affine& a, const Tensor& x, const Tensor& cotangent) {
    validate_affine(a);
    const int tokens = x.shape[0];
    cotangent.require_shape({tokens, a.out});
    AffineGrad g;
    g.d_x = Tensor({tokens, a.in});
    g.d_w.assign(a.w.size(), 0.0);
    g.d_b.assign(a.b.size(), 0.0);
    for (int t = 0; t < tokens; ++t) {
        const double* xi = x.data() + size_t(t) * size_t(a.in);
        const double* ct = cotangent.data() + size_t(t) * size_t(a.out);
        double* dx = g.d_x.data() + size_t(t) * size_t(a.in);
        for (int o = 0; o < a.out; ++o) {
            const double c = ct[o];
            const double* wr = a.w.data() + size_t(o) * size_t(a.in);
            double* dw = g.d_w.data() + size_t(o) * size_t(a.in);
            g.d_b[size_t(o)] += c;
            for (int i = 0; i < a.in; ++i) {
                dx[i] += c * wr[i];
                dw[i] += c * xi[i];
            }
        }
    }
    return g;
}

QmlpParams make_qmlp(int in_dim, int ratio, int out_dim, int qlayer_depth, SplitMix64& gen) {
    if (in_dim < 1 || ratio < 1 || out_dim < 1) throw ValidationError("qmlp dims must be positive");
    const int hidden = in_dim * ratio;
    if (hidden > kMaxQmlpHidden)
        throw CapacityError("qmlp hidden width " + std::to_string(hidden) + " exceeds the " +
                            std::to_string(kMaxQmlpHidden) + "-qubit budget");
    QmlpParams p;
    p.in_dim = in_dim;
    p.hidden = hidden;
    p.out_dim = out_dim;
    p.pre = make_affine(in_dim, hidden, gen);
    p.qlayer = make_quantum_layer(hidden, qlayer_depth, gen);
    p.post = make_affine(p.qlayer.structure.output_width(), out_dim, gen);
    return p;
}

void validate_qmlp(const QmlpParams& p) {
    validate_affine(p.pre);
    validate_affine(p.post);
    qsim::validate_params(p.qlayer);
    if (p.pre.in != p.in_dim || p.pre.out != p.hidden ||
        p.qlayer.structure.n_qubits != p.hidden ||
        p.post.in != p.qlayer.structure.output_width() || p.post.out != p.out_dim)
        throw StructureError("qmlp shapes do not chain");
    if (p.hidden > kMaxQmlpHidden) throw CapacityError("qmlp hidden width exceeds qubit budget");
}

std::vector<double> qmlp_forward(std::span<const double> x, const QmlpParams& p) {
    Tensor xt({1, int(x.size())});
    std::copy(x.begin(), x.end(), xt.data());
    Tensor y = qmlp_forward_batch(xt, p, 1);
    return {y.v.begin(), y.v.end()};
}

Tensor qmlp_forward_batch(const Tensor& x, const QmlpParams& p, int workers) {
    validate_qmlp(p);
    Tensor h = affine_forward_batch(p.pre, x);
    Tensor q = quantum_layer_forward_batch(h, p.qlayer, workers);
    return affine_forward_batch(p.post, q);
}

QmlpGrad qmlp_backward_batch(const Tensor& x, const QmlpParams& p, const Tensor& cotangent,
                             int workers) {
    validate_qmlp(p);
    // recompute the forward intermediates; the circuit gradient itself comes
    // from parameter-shift evaluations, not from stored activations
    Tensor h = affine_forward_batch(p.pre, x);
    Tensor q = quantum_layer_forward_batch(h, p.qlayer, workers);

    AffineGrad post_g = affine_backward_batch(p.post, q, cotangent);
    LayerBatchGrad layer_g = quantum_layer_backward_batch(h, p.qlayer, post_g.d_x, workers);
    AffineGrad pre_g = affine_backward_batch(p.pre, x, layer_g.d_x);

    QmlpGrad g;
    g.d_x = std::move(pre_g.d_x);
    g.d_pre_w = std::move(pre_g.d_w);
    g.d_pre_b = std::move(pre_g.d_b);
    g.d_theta = std::move(layer_g.d_theta);
    g.d_post_w = std::move(post_g.d_w);
    g.d_post_b = std::move(post_g.d_b);
    return g;
}

} // namespace qsr::qnn
