#include "qsr/eval/upscale.hpp"

#include <algorithm>
#include <cmath>

#include "qsr/error.hpp"

namespace qsr::eval {

namespace {

void check_input(const Tensor& lr, int s) {
    if (lr.shape.size() != 3) throw ValidationError("upscale expects an [H,W,C] image");
    if (s < 1) throw ValidationError("upscale factor must be >= 1");
}

int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

// source coordinate of a destination pixel center, align_corners=false
double src_coord(int dst, int s) { return (dst + 0.5) / s - 0.5; }

} // namespace

double catmull_rom(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2) * t - (a + 3)) * t * t + 1;
    if (t < 2.0) return ((a * t - 5 * a) * t + 8 * a) * t - 4 * a;
    return 0.0;
}

Tensor upscale_nearest(const Tensor& lr, int s) {
    check_input(lr, s);
    const int h = lr.shape[0], w = lr.shape[1], c = lr.shape[2];
    Tensor out({h * s, w * s, c});
    for (int y = 0; y < h * s; ++y)
        for (int x = 0; x < w * s; ++x)
            for (int ch = 0; ch < c; ++ch) out.at(y, x, ch) = lr.at(y / s, x / s, ch);
    return out;
}

Tensor upscale_bilinear(const Tensor& lr, int s) {
    check_input(lr, s);
    const int h = lr.shape[0], w = lr.shape[1], c = lr.shape[2];
    Tensor out({h * s, w * s, c});
    for (int y = 0; y < h * s; ++y) {
        const double sy = src_coord(y, s);
        const int y0 = int(std::floor(sy));
        const double fy = sy - y0;
        const int ya = std::clamp(y0, 0, h - 1), yb = std::clamp(y0 + 1, 0, h - 1);
        for (int x = 0; x < w * s; ++x) {
            const double sx = src_coord(x, s);
            const int x0 = int(std::floor(sx));
            const double fx = sx - x0;
            const int xa = std::clamp(x0, 0, w - 1), xb = std::clamp(x0 + 1, 0, w - 1);
            for (int ch = 0; ch < c; ++ch)
                out.at(y, x, ch) = (1 - fy) * ((1 - fx) * lr.at(ya, xa, ch) + fx * lr.at(ya, xb, ch)) +
                                   fy * ((1 - fx) * lr.at(yb, xa, ch) + fx * lr.at(yb, xb, ch));
        }
    }
    return out;
}

Tensor upscale_bicubic(const Tensor& lr, int s) {
    check_input(lr, s);
    const int h = lr.shape[0], w = lr.shape[1], c = lr.shape[2];
    Tensor out({h * s, w * s, c});
    for (int y = 0; y < h * s; ++y) {
        const double sy = src_coord(y, s);
        const int y0 = int(std::floor(sy));
        double wy[4];
        for (int k = 0; k < 4; ++k) wy[k] = catmull_rom(sy - (y0 - 1 + k));
        for (int x = 0; x < w * s; ++x) {
            const double sx = src_coord(x, s);
            const int x0 = int(std::floor(sx));
            double wx[4];
            for (int k = 0; k < 4; ++k) wx[k] = catmull_rom(sx - (x0 - 1 + k));
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0;
                for (int ky = 0; ky < 4; ++ky) {
                    const int yy = reflect(y0 - 1 + ky, h);
                    for (int kx = 0; kx < 4; ++kx)
                        acc += wy[ky] * wx[kx] * lr.at(yy, reflect(x0 - 1 + kx, w), ch);
                }
                out.at(y, x, ch) = acc;
            }
        }
    }
    return out;
}

} // namespace qsr::eval
