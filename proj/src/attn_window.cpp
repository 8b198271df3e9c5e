#include "qsr/attn/window.hpp"

#include <algorithm>

#include "qsr/error.hpp"

namespace qsr::attn {

namespace {

void require_map(const Tensor& x) {
    if (x.rank() != 3) throw ValidationError("expected a [H,W,D] feature map");
}

} // namespace

Tensor window_partition(const Tensor& x, int m) {
    require_map(x);
    const int h = x.shape[0], w = x.shape[1], d = x.shape[2];
    if (m < 1 || h % m != 0 || w % m != 0)
        throw ValidationError("window size " + std::to_string(m) + " must divide " +
                              std::to_string(h) + "x" + std::to_string(w));
    const int wh = h / m, ww = w / m;
    Tensor out({wh * ww, m * m, d});
    for (int wr = 0; wr < wh; ++wr)
        for (int wc = 0; wc < ww; ++wc) {
            const int win = wr * ww + wc;
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < m; ++c) {
                    const double* src = x.data() + (size_t(wr * m + r) * w + (wc * m + c)) * d;
                    double* dst = out.data() + (size_t(win) * (m * m) + (r * m + c)) * d;
                    std::copy(src, src + d, dst);
                }
        }
    return out;
}

Tensor window_merge(const Tensor& windows, int h, int w) {
    if (windows.rank() != 3) throw ValidationError("expected [num_windows, M*M, D] windows");
    const int t = windows.shape[1], d = windows.shape[2];
    int m = 0;
    while (m * m < t) ++m;
    if (m * m != t) throw ValidationError("window token count is not a square");
    if (h % m != 0 || w % m != 0 || windows.shape[0] != (h / m) * (w / m))
        throw ValidationError("window count does not tile the requested map");
    const int ww = w / m;
    Tensor out({h, w, d});
    for (int win = 0; win < windows.shape[0]; ++win) {
        const int wr = win / ww, wc = win % ww;
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c) {
                const double* src = windows.data() + (size_t(win) * t + (r * m + c)) * d;
                double* dst = out.data() + (size_t(wr * m + r) * w + (wc * m + c)) * d;
                std::copy(src, src + d, dst);
            }
    }
    return out;
}

namespace {

Tensor roll(const Tensor& x, int dr, int dc) {
    const int h = x.shape[0], w = x.shape[1], d = x.shape[2];
    Tensor out({h, w, d});
    for (int i = 0; i < h; ++i) {
        const int si = ((i + dr) % h + h) % h;
        for (int j = 0; j < w; ++j) {
            const int sj = ((j + dc) % w + w) % w;
            const double* src = x.data() + (size_t(si) * w + sj) * d;
            std::copy(src, src + d, out.data() + (size_t(i) * w + j) * d);
        }
    }
    return out;
}

void validate_shift(const Tensor& x, int shift) {
    require_map(x);
    if (shift < 0 || shift >= std::min(x.shape[0], x.shape[1]))
        throw ValidationError("shift must lie in [0, min(H,W))");
}

} // namespace

Tensor cyclic_shift(const Tensor& x, int shift) {
    validate_shift(x, shift);
    return roll(x, shift, shift);
}

Tensor inverse_shift(const Tensor& x, int shift) {
    validate_shift(x, shift);
    return roll(x, -shift, -shift);
}

AttentionMaskSpec compute_attention_mask(int h, int w, int m, int shift) {
    if (m < 1 || h % m != 0 || w % m != 0)
        throw ValidationError("window size must divide the map");
    if (shift != 0 && 2 * shift != m)
        throw ValidationError("mask shift must be 0 or M/2");

    AttentionMaskSpec spec;
    spec.h = h;
    spec.w = w;
    spec.window = m;
    spec.shift = shift;

    // nine regions, axis bands split at len-M and len-shift in post-shift
    // coordinates (the standard construction slices the canvas the windows
    // are cut from, so unwrapped content stays mask-free)
    auto band = [&](int pos, int len) { return pos < len - m ? 0 : (pos < len - shift ? 1 : 2); };
    // the same labels transported back to the pre-shift canvas
    spec.region_id.resize(size_t(h) * size_t(w));
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            spec.region_id[size_t(i) * w + j] =
                3 * band(((i - shift) % h + h) % h, h) + band(((j - shift) % w + w) % w, w);

    const int t = m * m;
    const int ww = w / m;
    const int num_windows = (h / m) * ww;
    auto window_region = [&](int win, int tok) {
        const int gi = (win / ww) * m + tok / m;
        const int gj = (win % ww) * m + tok % m;
        return 3 * band(gi, h) + band(gj, w);
    };
    spec.mask = Tensor({num_windows, t, t});
    for (int win = 0; win < num_windows; ++win)
        for (int i = 0; i < t; ++i)
            for (int j = 0; j < t; ++j)
                spec.mask.at(win, i, j) =
                    window_region(win, i) == window_region(win, j) ? 0.0 : kMaskValue;
    return spec;
}

} // namespace qsr::attn
