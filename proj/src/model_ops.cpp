#include "qsr/model/ops.hpp"

#include <cmath>
#include <string>

#include "qsr/error.hpp"

namespace qsr::model {

Conv2d make_conv(int in_ch, int out_ch, SplitMix64& gen) {
    if (in_ch < 1 || out_ch < 1)
        throw ValidationError("conv channels must be positive, got " + std::to_string(in_ch) +
                              " -> " + std::to_string(out_ch));
    Conv2d c;
    c.in_ch = in_ch;
    c.out_ch = out_ch;
    c.w.resize(size_t(out_ch) * in_ch * 9);
    for (double& v : c.w) v = gen.truncated_normal(0.02);
    c.b.assign(size_t(out_ch), 0.0);
    return c;
}

void validate_conv(const Conv2d& c) {
    if (c.in_ch < 1 || c.out_ch < 1) throw StructureError("conv has non-positive channel count");
    if (c.w.size() != size_t(c.out_ch) * c.in_ch * 9 || c.b.size() != size_t(c.out_ch))
        throw StructureError("conv weight storage does not match its channel counts");
}

namespace {

void require_map(const Tensor& x, int channels, const char* what) {
    if (x.shape.size() != 3 || x.shape[2] != channels)
        throw ValidationError(std::string(what) + ": expected an [H,W," +
                              std::to_string(channels) + "] map");
    if (x.shape[0] < 1 || x.shape[1] < 1) throw ValidationError("empty spatial extent");
}

} // namespace

Tensor conv2d_3x3(const Tensor& x, const Conv2d& c) {
    validate_conv(c);
    require_map(x, c.in_ch, "conv2d_3x3");
    const int h = x.shape[0], w = x.shape[1];
    Tensor out({h, w, c.out_ch});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int o = 0; o < c.out_ch; ++o) {
                double acc = c.b[size_t(o)];
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sx = xx + kx - 1;
                        if (sx < 0 || sx >= w) continue;
                        const double* wrow = &c.w[((size_t(o) * c.in_ch) * 3 + ky) * 3 + kx];
                        for (int i = 0; i < c.in_ch; ++i)
                            acc += wrow[size_t(i) * 9] * x.at(sy, sx, i);
                    }
                }
                out.at(y, xx, o) = acc;
            }
    return out;
}

ConvGrad conv2d_3x3_backward(const Tensor& x, const Conv2d& c, const Tensor& cotangent) {
    validate_conv(c);
    require_map(x, c.in_ch, "conv2d_3x3_backward");
    cotangent.require_shape({x.shape[0], x.shape[1], c.out_ch});
    const int h = x.shape[0], w = x.shape[1];
    ConvGrad g;
    g.d_x = Tensor({h, w, c.in_ch});
    g.d_w.assign(c.w.size(), 0.0);
    g.d_b.assign(c.b.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int o = 0; o < c.out_ch; ++o) {
                const double co = cotangent.at(y, xx, o);
                g.d_b[size_t(o)] += co;
                for (int ky = 0; ky < 3; ++ky) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sx = xx + kx - 1;
                        if (sx < 0 || sx >= w) continue;
                        for (int i = 0; i < c.in_ch; ++i) {
                            const size_t wi = ((size_t(o) * c.in_ch + i) * 3 + ky) * 3 + kx;
                            g.d_w[wi] += co * x.at(sy, sx, i);
                            g.d_x.at(sy, sx, i) += co * c.w[wi];
                        }
                    }
                }
            }
    return g;
}

namespace {

void require_last_dim(const Tensor& x, size_t d, const char* what) {
    if (x.shape.empty() || x.shape.back() < 1)
        throw ValidationError(std::string(what) + ": tensor has no channel axis");
    if (size_t(x.shape.back()) != d)
        throw ValidationError(std::string(what) + ": scale/bias length " + std::to_string(d) +
                              " does not match channel dim " + std::to_string(x.shape.back()));
}

} // namespace

Tensor layer_norm(const Tensor& x, const std::vector<double>& scale,
                  const std::vector<double>& bias) {
    require_last_dim(x, scale.size(), "layer_norm");
    if (scale.size() != bias.size()) throw ValidationError("layer_norm scale/bias length mismatch");
    const size_t d = scale.size(), tokens = x.v.size() / d;
    Tensor out = x;
    for (size_t t = 0; t < tokens; ++t) {
        const double* row = &x.v[t * d];
        double mu = 0;
        for (size_t i = 0; i < d; ++i) mu += row[i];
        mu /= double(d);
        double var = 0;
        for (size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
        var /= double(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (size_t i = 0; i < d; ++i)
            out.v[t * d + i] = scale[i] * (row[i] - mu) * inv + bias[i];
    }
    return out;
}

LayerNormGrad layer_norm_backward(const Tensor& x, const std::vector<double>& scale,
                                  const Tensor& cotangent) {
    require_last_dim(x, scale.size(), "layer_norm_backward");
    cotangent.require_shape(x, "layer_norm cotangent");
    const size_t d = scale.size(), tokens = x.v.size() / d;
    LayerNormGrad g;
    g.d_x = Tensor(x.shape);
    g.d_scale.assign(d, 0.0);
    g.d_bias.assign(d, 0.0);
    for (size_t t = 0; t < tokens; ++t) {
        const double* row = &x.v[t * d];
        const double* co = &cotangent.v[t * d];
        double mu = 0;
        for (size_t i = 0; i < d; ++i) mu += row[i];
        mu /= double(d);
        double var = 0;
        for (size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
        var /= double(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        // dL/dx through xhat = (x - mu) * inv with mu, var both functions of x
        double mean_g = 0, mean_gx = 0;
        for (size_t i = 0; i < d; ++i) {
            const double xhat = (row[i] - mu) * inv;
            const double gi = co[i] * scale[i];
            g.d_scale[i] += co[i] * xhat;
            g.d_bias[i] += co[i];
            mean_g += gi;
            mean_gx += gi * xhat;
        }
        mean_g /= double(d);
        mean_gx /= double(d);
        for (size_t i = 0; i < d; ++i) {
            const double xhat = (row[i] - mu) * inv;
            const double gi = co[i] * scale[i];
            g.d_x.v[t * d + i] = (gi - mean_g - xhat * mean_gx) * inv;
        }
    }
    return g;
}

Tensor pixel_shuffle(const Tensor& x, int s) {
    if (s < 1) throw ValidationError("pixel_shuffle scale must be >= 1");
    if (x.shape.size() != 3) throw ValidationError("pixel_shuffle expects an [H,W,C] map");
    const int h = x.shape[0], w = x.shape[1], cin = x.shape[2];
    if (cin % (s * s) != 0)
        throw ValidationError("pixel_shuffle: " + std::to_string(cin) +
                              " channels not divisible by s^2 = " + std::to_string(s * s));
    const int c = cin / (s * s);
    Tensor out({h * s, w * s, c});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int ch = 0; ch < c; ++ch)
                for (int dy = 0; dy < s; ++dy)
                    for (int dx = 0; dx < s; ++dx)
                        out.at(y * s + dy, xx * s + dx, ch) =
                            x.at(y, xx, ch * s * s + dy * s + dx);
    return out;
}

Tensor pixel_unshuffle(const Tensor& x, int s) {
    if (s < 1) throw ValidationError("pixel_unshuffle scale must be >= 1");
    if (x.shape.size() != 3) throw ValidationError("pixel_unshuffle expects an [H,W,C] map");
    const int hs = x.shape[0], ws = x.shape[1], c = x.shape[2];
    if (hs % s != 0 || ws % s != 0)
        throw ValidationError("pixel_unshuffle: spatial dims not divisible by s");
    const int h = hs / s, w = ws / s;
    Tensor out({h, w, c * s * s});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx)
            for (int ch = 0; ch < c; ++ch)
                for (int dy = 0; dy < s; ++dy)
                    for (int dx = 0; dx < s; ++dx)
                        out.at(y, xx, ch * s * s + dy * s + dx) =
                            x.at(y * s + dy, xx * s + dx, ch);
    return out;
}

} // namespace qsr::model
