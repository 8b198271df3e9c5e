#pragma once

#include <vector>

#include "qsr/tensor.hpp"

namespace qsr::attn {

// Finite stand-in for -inf so masked softmax stays NaN-free.
inline constexpr double kMaskValue = -1e9;

// [H,W,D] -> [num_windows, M*M, D]; windows and in-window tokens row-major.
Tensor window_partition(const Tensor& x, int m);

// Exact inverse of window_partition.
Tensor window_merge(const Tensor& windows, int h, int w);

// Roll by (-shift, -shift): out[i][j] = x[(i+shift) mod H][(j+shift) mod W].
Tensor cyclic_shift(const Tensor& x, int shift);

// Exact inverse roll.
Tensor inverse_shift(const Tensor& x, int shift);

// Pairwise attention mask for shifted windows. After the roll, tokens that
// wrapped around sit next to tokens that did not; region_id labels the nine
// pre-shift regions (axis boundaries at len-M and len-shift) and the mask
// blocks attention between tokens of differing regions.
struct AttentionMaskSpec {
    int h = 0;
    int w = 0;
    int window = 0;
    int shift = 0;
    std::vector<int> region_id; // [h*w], pre-shift canvas, row-major
    Tensor mask;                // [num_windows, M*M, M*M], entries {0, kMaskValue}
};

AttentionMaskSpec compute_attention_mask(int h, int w, int m, int shift);

} // namespace qsr::attn
