#include "qsr/attn/sqwin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qsr/error.hpp"

namespace qsr::attn {

namespace {

constexpr double kNormEps = 1e-12; // below this a projection is treated as the zero vector

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double kappa_of(double raw) { return std::exp(std::min(raw, std::log(kKappaMax))); }

SqwinParams make_sqwin(int dim, int window, int num_heads, int bias_ratio, int bias_depth,
                       SplitMix64& gen) {
    if (dim < 1 || window < 1 || num_heads < 1 || dim % num_heads != 0)
        throw ValidationError("attention heads must divide the channel dim");
    SqwinParams p;
    p.dim = dim;
    p.window = window;
    p.num_heads = num_heads;
    p.theta_q = qnn::make_quantum_layer(dim, 1, gen);
    p.theta_k = qnn::make_quantum_layer(dim, 1, gen);
    p.theta_v = qnn::make_quantum_layer(dim, 1, gen);
    p.theta_o = qnn::make_quantum_layer(dim, 1, gen);
    p.kappa_raw.assign(size_t(num_heads), std::log(10.0));
    p.bias_mlp = qnn::make_qmlp(2, bias_ratio, num_heads, bias_depth, gen);
    p.gamma_x_raw = std::log(std::expm1(8.0)); // softplus(raw) = 8
    p.gamma_y_raw = p.gamma_x_raw;
    validate_sqwin(p);
    return p;
}

void validate_sqwin(const SqwinParams& p) {
    if (p.dim < 1 || p.window < 1 || p.num_heads < 1) throw StructureError("invalid sqwin dims");
    if (p.dim % p.num_heads != 0) throw StructureError("heads must divide dim");
    for (const auto* th : {&p.theta_q, &p.theta_k, &p.theta_v, &p.theta_o}) {
        qsim::validate_params(*th);
        if (th->structure.n_qubits != p.dim || th->structure.output_width() != p.dim)
            throw StructureError("projection circuits must map dim -> dim");
    }
    if (int(p.kappa_raw.size()) != p.num_heads)
        throw StructureError("one kappa per attention head required");
    qnn::validate_qmlp(p.bias_mlp);
    if (p.bias_mlp.in_dim != 2 || p.bias_mlp.out_dim != p.num_heads)
        throw StructureError("bias MLP must map 2 displacement features to num_heads");
    if (!std::isfinite(p.gamma_x_raw) || !std::isfinite(p.gamma_y_raw))
        throw ValidationError("non-finite gamma parameter");
}

namespace {

// displacement slot table: (dy, dx) in [-(M-1), M-1]^2, row-major
int slot_of(int dy, int dx, int m) { return (dy + m - 1) * (2 * m - 1) + (dx + m - 1); }

double log_feature(int d, double gamma) {
    const double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    return s * std::log2(1.0 + std::abs(d) / gamma);
}

// d feature / d gamma for one displacement
double log_feature_dgamma(int d, double gamma) {
    if (d == 0) return 0.0;
    const double s = d > 0 ? 1.0 : -1.0;
    const double a = std::abs(double(d));
    return -s * a / (std::numbers::ln2 * gamma * (gamma + a));
}

Tensor displacement_features(int m, double gamma_x, double gamma_y) {
    const int span = 2 * m - 1;
    Tensor feats({span * span, 2});
    for (int dy = -(m - 1); dy <= m - 1; ++dy)
        for (int dx = -(m - 1); dx <= m - 1; ++dx) {
            const int s = slot_of(dy, dx, m);
            feats.at(s, 0) = log_feature(dx, gamma_x);
            feats.at(s, 1) = log_feature(dy, gamma_y);
        }
    return feats;
}

// everything the forward pass computes, kept for the backward contraction
struct Flow {
    int h = 0, w = 0, m = 0, t = 0, nw = 0, dh = 0;
    Tensor tokens;  // [nw*t, dim] post-shift window tokens
    Tensor q, k, v; // [nw*t, dim]
    Tensor nq, nk;  // [nw*t, heads] per-head slice norms
    AttentionMaskSpec mask;
    Tensor feats;    // [(2m-1)^2, 2]
    Tensor slot_out; // [(2m-1)^2, heads]
    Tensor bias;     // [heads, t, t]
    std::vector<double> kappa;
    Tensor scores; // [nw, heads, t, t] cosine (or scaled dot) pre-kappa
    Tensor attn;   // [nw, heads, t, t] softmax weights
    Tensor u;      // [nw*t, dim] head-concatenated attention output
    Tensor out;    // [h, w, dim]
};

Flow run_flow(const Tensor& x, const SqwinParams& p, int shift, int workers) {
    validate_sqwin(p);
    if (x.rank() != 3 || x.shape[2] != p.dim)
        throw ValidationError("sqwin expects a [H,W,dim] feature map");
    if (shift != 0 && 2 * shift != p.window)
        throw ValidationError("sqwin shift must be 0 or window/2");

    Flow f;
    f.h = x.shape[0];
    f.w = x.shape[1];
    f.m = p.window;
    f.t = f.m * f.m;
    f.dh = p.dim / p.num_heads;

    Tensor windows = window_partition(shift ? cyclic_shift(x, shift) : x, f.m);
    f.nw = windows.shape[0];
    f.tokens = std::move(windows);
    f.tokens.shape = {f.nw * f.t, p.dim};

    f.q = qnn::quantum_layer_forward_batch(f.tokens, p.theta_q, workers);
    f.k = qnn::quantum_layer_forward_batch(f.tokens, p.theta_k, workers);
    f.v = qnn::quantum_layer_forward_batch(f.tokens, p.theta_v, workers);

    f.nq = Tensor({f.nw * f.t, p.num_heads});
    f.nk = Tensor({f.nw * f.t, p.num_heads});
    for (int tok = 0; tok < f.nw * f.t; ++tok)
        for (int hd = 0; hd < p.num_heads; ++hd) {
            double sq = 0, sk = 0;
            for (int e = 0; e < f.dh; ++e) {
                sq += f.q.at(tok, hd * f.dh + e) * f.q.at(tok, hd * f.dh + e);
                sk += f.k.at(tok, hd * f.dh + e) * f.k.at(tok, hd * f.dh + e);
            }
            f.nq.at(tok, hd) = std::sqrt(sq);
            f.nk.at(tok, hd) = std::sqrt(sk);
        }

    f.mask = compute_attention_mask(f.h, f.w, f.m, shift);

    f.feats = displacement_features(f.m, softplus(p.gamma_x_raw), softplus(p.gamma_y_raw));
    f.slot_out = qnn::qmlp_forward_batch(f.feats, p.bias_mlp, workers);
    f.bias = Tensor({p.num_heads, f.t, f.t});
    for (int i = 0; i < f.t; ++i)
        for (int j = 0; j < f.t; ++j) {
            const int s = slot_of(i / f.m - j / f.m, i % f.m - j % f.m, f.m);
            for (int hd = 0; hd < p.num_heads; ++hd) f.bias.at(hd, i, j) = f.slot_out.at(s, hd);
        }

    f.kappa.resize(size_t(p.num_heads));
    for (int hd = 0; hd < p.num_heads; ++hd) f.kappa[size_t(hd)] = kappa_of(p.kappa_raw[size_t(hd)]);

    f.scores = Tensor({f.nw, p.num_heads, f.t, f.t});
    f.attn = Tensor({f.nw, p.num_heads, f.t, f.t});
    std::vector<double> logits(size_t(f.t));
    for (int win = 0; win < f.nw; ++win)
        for (int hd = 0; hd < p.num_heads; ++hd)
            for (int i = 0; i < f.t; ++i) {
                const int ti = win * f.t + i;
                for (int j = 0; j < f.t; ++j) {
                    const int tj = win * f.t + j;
                    double dot = 0;
                    for (int e = 0; e < f.dh; ++e)
                        dot += f.q.at(ti, hd * f.dh + e) * f.k.at(tj, hd * f.dh + e);
                    double score, logit;
                    if (p.cosine) {
                        const double nq = f.nq.at(ti, hd), nk = f.nk.at(tj, hd);
                        score = (nq < kNormEps || nk < kNormEps) ? 0.0 : dot / (nq * nk);
                        logit = f.kappa[size_t(hd)] * score;
                    } else {
                        score = dot / std::sqrt(double(f.dh));
                        logit = score;
                    }
                    f.scores.at(win, hd, i, j) = score;
                    logits[size_t(j)] = logit + f.bias.at(hd, i, j) + f.mask.mask.at(win, i, j);
                }
                // stable softmax over j
                double mx = logits[0];
                for (double l : logits) mx = std::max(mx, l);
                double denom = 0;
                for (int j = 0; j < f.t; ++j) {
                    const double e = std::exp(logits[size_t(j)] - mx);
                    f.attn.at(win, hd, i, j) = e;
                    denom += e;
                }
                for (int j = 0; j < f.t; ++j) f.attn.at(win, hd, i, j) /= denom;
            }

    f.u = Tensor({f.nw * f.t, p.dim});
    for (int win = 0; win < f.nw; ++win)
        for (int hd = 0; hd < p.num_heads; ++hd)
            for (int i = 0; i < f.t; ++i)
                for (int j = 0; j < f.t; ++j) {
                    const double a = f.attn.at(win, hd, i, j);
                    for (int e = 0; e < f.dh; ++e)
                        f.u.at(win * f.t + i, hd * f.dh + e) +=
                            a * f.v.at(win * f.t + j, hd * f.dh + e);
                }

    Tensor o = qnn::quantum_layer_forward_batch(f.u, p.theta_o, workers);
    o.shape = {f.nw, f.t, p.dim};
    Tensor merged = window_merge(o, f.h, f.w);
    f.out = shift ? inverse_shift(merged, shift) : std::move(merged);
    return f;
}

} // namespace

Tensor log_relative_bias(int m, double gamma_x, double gamma_y, const qnn::QmlpParams& bias_mlp,
                         int workers) {
    if (m < 1) throw ValidationError("window size must be positive");
    if (!(gamma_x > 0.0) || !(gamma_y > 0.0))
        throw ValidationError("bias gammas must be positive");
    qnn::validate_qmlp(bias_mlp);
    if (bias_mlp.in_dim != 2) throw StructureError("bias MLP expects 2 displacement features");

    const Tensor feats = displacement_features(m, gamma_x, gamma_y);
    const Tensor slot_out = qnn::qmlp_forward_batch(feats, bias_mlp, workers);
    const int t = m * m;
    Tensor bias({bias_mlp.out_dim, t, t});
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j) {
            const int s = slot_of(i / m - j / m, i % m - j % m, m);
            for (int hd = 0; hd < bias_mlp.out_dim; ++hd) bias.at(hd, i, j) = slot_out.at(s, hd);
        }
    return bias;
}

Tensor sqwin_forward(const Tensor& x, const SqwinParams& p, int shift, int workers) {
    return run_flow(x, p, shift, workers).out;
}

Tensor sqwin_attention(const Tensor& x, const SqwinParams& p, int shift, int workers) {
    return run_flow(x, p, shift, workers).attn;
}

SqwinGrad sqwin_backward(const Tensor& x, const SqwinParams& p, int shift, const Tensor& cotangent,
                         int workers) {
    Flow f = run_flow(x, p, shift, workers);
    cotangent.require_shape(f.out, "sqwin cotangent");
    const int heads = p.num_heads;

    // undo inverse-shift and merge: adjoints of permutations are their inverses
    Tensor d_merged = shift ? cyclic_shift(cotangent, shift) : cotangent;
    Tensor d_o = window_partition(d_merged, f.m);
    d_o.shape = {f.nw * f.t, p.dim};

    qnn::LayerBatchGrad o_g = qnn::quantum_layer_backward_batch(f.u, p.theta_o, d_o, workers);
    Tensor& d_u = o_g.d_x;

    Tensor d_q({f.nw * f.t, p.dim});
    Tensor d_k({f.nw * f.t, p.dim});
    Tensor d_v({f.nw * f.t, p.dim});
    std::vector<double> d_kappa(size_t(heads), 0.0);
    Tensor d_bias({heads, f.t, f.t});

    std::vector<double> da(size_t(f.t)), dlogit(size_t(f.t));
    for (int win = 0; win < f.nw; ++win)
        for (int hd = 0; hd < heads; ++hd)
            for (int i = 0; i < f.t; ++i) {
                const int ti = win * f.t + i;
                // d attention weights and d v from the weighted sum
                for (int j = 0; j < f.t; ++j) {
                    const int tj = win * f.t + j;
                    const double a = f.attn.at(win, hd, i, j);
                    double acc = 0;
                    for (int e = 0; e < f.dh; ++e) {
                        const double du = d_u.at(ti, hd * f.dh + e);
                        acc += du * f.v.at(tj, hd * f.dh + e);
                        d_v.at(tj, hd * f.dh + e) += a * du;
                    }
                    da[size_t(j)] = acc;
                }
                // softmax backward over row i
                double inner = 0;
                for (int j = 0; j < f.t; ++j) inner += f.attn.at(win, hd, i, j) * da[size_t(j)];
                for (int j = 0; j < f.t; ++j)
                    dlogit[size_t(j)] = f.attn.at(win, hd, i, j) * (da[size_t(j)] - inner);

                for (int j = 0; j < f.t; ++j) {
                    const int tj = win * f.t + j;
                    const double dl = dlogit[size_t(j)];
                    d_bias.at(hd, i, j) += dl;
                    if (p.cosine) {
                        const double c = f.scores.at(win, hd, i, j);
                        d_kappa[size_t(hd)] += c * dl;
                        const double nq = f.nq.at(ti, hd), nk = f.nk.at(tj, hd);
                        if (nq >= kNormEps && nk >= kNormEps) {
                            const double dc = f.kappa[size_t(hd)] * dl;
                            for (int e = 0; e < f.dh; ++e) {
                                const double qe = f.q.at(ti, hd * f.dh + e);
                                const double ke = f.k.at(tj, hd * f.dh + e);
                                d_q.at(ti, hd * f.dh + e) += dc * (ke / (nq * nk) - c * qe / (nq * nq));
                                d_k.at(tj, hd * f.dh + e) += dc * (qe / (nq * nk) - c * ke / (nk * nk));
                            }
                        }
                    } else {
                        const double scale = 1.0 / std::sqrt(double(f.dh));
                        for (int e = 0; e < f.dh; ++e) {
                            d_q.at(ti, hd * f.dh + e) += dl * scale * f.k.at(tj, hd * f.dh + e);
                            d_k.at(tj, hd * f.dh + e) += dl * scale * f.q.at(ti, hd * f.dh + e);
                        }
                    }
                }
            }

    SqwinGrad g;
    g.d_kappa_raw.assign(size_t(heads), 0.0);
    for (int hd = 0; hd < heads; ++hd)
        if (p.cosine && p.kappa_raw[size_t(hd)] <= std::log(kKappaMax))
            g.d_kappa_raw[size_t(hd)] = d_kappa[size_t(hd)] * f.kappa[size_t(hd)];

    // bias table: scatter pair gradients to displacement slots, then through
    // the bias MLP and the log feature map down to the gammas
    const int span = 2 * f.m - 1;
    Tensor d_slot({span * span, heads});
    for (int i = 0; i < f.t; ++i)
        for (int j = 0; j < f.t; ++j) {
            const int s = slot_of(i / f.m - j / f.m, i % f.m - j % f.m, f.m);
            for (int hd = 0; hd < heads; ++hd) d_slot.at(s, hd) += d_bias.at(hd, i, j);
        }
    g.d_bias = qnn::qmlp_backward_batch(f.feats, p.bias_mlp, d_slot, workers);

    const double gamma_x = softplus(p.gamma_x_raw), gamma_y = softplus(p.gamma_y_raw);
    double d_gx = 0, d_gy = 0;
    for (int dy = -(f.m - 1); dy <= f.m - 1; ++dy)
        for (int dx = -(f.m - 1); dx <= f.m - 1; ++dx) {
            const int s = slot_of(dy, dx, f.m);
            d_gx += g.d_bias.d_x.at(s, 0) * log_feature_dgamma(dx, gamma_x);
            d_gy += g.d_bias.d_x.at(s, 1) * log_feature_dgamma(dy, gamma_y);
        }
    g.d_gamma_x_raw = d_gx * sigmoid(p.gamma_x_raw);
    g.d_gamma_y_raw = d_gy * sigmoid(p.gamma_y_raw);

    qnn::LayerBatchGrad q_g = qnn::quantum_layer_backward_batch(f.tokens, p.theta_q, d_q, workers);
    qnn::LayerBatchGrad k_g = qnn::quantum_layer_backward_batch(f.tokens, p.theta_k, d_k, workers);
    qnn::LayerBatchGrad v_g = qnn::quantum_layer_backward_batch(f.tokens, p.theta_v, d_v, workers);
    g.d_theta_q = std::move(q_g.d_theta);
    g.d_theta_k = std::move(k_g.d_theta);
    g.d_theta_v = std::move(v_g.d_theta);
    g.d_theta_o = std::move(o_g.d_theta);

    Tensor d_tokens({f.nw, f.t, p.dim});
    for (size_t i = 0; i < d_tokens.v.size(); ++i)
        d_tokens.v[i] = q_g.d_x.v[i] + k_g.d_x.v[i] + v_g.d_x.v[i];
    Tensor d_shifted = window_merge(d_tokens, f.h, f.w);
    g.d_x = shift ? inverse_shift(d_shifted, shift) : std::move(d_shifted);
    return g;
}

} // namespace qsr::attn
