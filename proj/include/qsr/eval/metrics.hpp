#pragma once

#include "qsr/tensor.hpp"

namespace qsr::eval {

// Aggregation treats infinite PSNR (identical images) as this many dB;
// per-image values keep the infinity sentinel.
inline constexpr double kPsnrAggregationCap = 60.0;

// 10 log10(peak^2 / MSE); identical inputs return +infinity.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// PSNR with the infinity sentinel replaced by the aggregation cap.
double psnr_capped(const Tensor& a, const Tensor& b, double peak = 1.0);

// Mean local SSIM over a 7x7 Gaussian window (sigma 1.5) with reflect
// padding, computed per channel and averaged. Stabilizers C1 = K1 * L and
// C2 = K2 * L with K1 = 0.01, K2 = 0.03, L = 1.
double ssim(const Tensor& a, const Tensor& b);

} // namespace qsr::eval
