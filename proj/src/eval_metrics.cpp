#include "qsr/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qsr/error.hpp"

namespace qsr::eval {

namespace {

constexpr int kWindow = 7;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01; // K1 * L
constexpr double kC2 = 0.03; // K2 * L

// symmetric reflection keeps every tap inside [0, n)
int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

struct Gauss7 {
    double w[kWindow];
    Gauss7() {
        double sum = 0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - kWindow / 2;
            w[i] = std::exp(-d * d / (2 * kSigma * kSigma));
            sum += w[i];
        }
        for (double& x : w) x /= sum;
    }
};

} // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
    if (!a.same_shape(b)) throw ValidationError("psnr shapes differ");
    if (!(peak > 0)) throw ValidationError("psnr peak must be positive");
    double mse = 0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const double d = a.v[i] - b.v[i];
        mse += d * d;
    }
    mse /= double(a.v.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double psnr_capped(const Tensor& a, const Tensor& b, double peak) {
    const double v = psnr(a, b, peak);
    return std::isinf(v) ? kPsnrAggregationCap : v;
}

double ssim(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ValidationError("ssim shapes differ");
    if (a.shape.size() != 3) throw ValidationError("ssim expects [H,W,C] images");
    const int h = a.shape[0], w = a.shape[1], c = a.shape[2];
    if (h < kWindow || w < kWindow)
        throw ValidationError("ssim needs at least a " + std::to_string(kWindow) + "x" +
                              std::to_string(kWindow) + " image, got " + std::to_string(h) + "x" +
                              std::to_string(w));

    static const Gauss7 g;
    double total = 0;
    for (int ch = 0; ch < c; ++ch) {
        double channel_sum = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                for (int dy = 0; dy < kWindow; ++dy) {
                    const int yy = reflect(y + dy - kWindow / 2, h);
                    for (int dx = 0; dx < kWindow; ++dx) {
                        const int xx = reflect(x + dx - kWindow / 2, w);
                        const double wt = g.w[dy] * g.w[dx];
                        const double va = a.at(yy, xx, ch), vb = b.at(yy, xx, ch);
                        ma += wt * va;
                        mb += wt * vb;
                        maa += wt * va * va;
                        mbb += wt * vb * vb;
                        mab += wt * va * vb;
                    }
                }
                const double va = maa - ma * ma;
                const double vb = mbb - mb * mb;
                const double cov = mab - ma * mb;
                channel_sum += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
                               ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
            }
        total += channel_sum / double(h * w);
    }
    return total / c;
}

} // namespace qsr::eval
