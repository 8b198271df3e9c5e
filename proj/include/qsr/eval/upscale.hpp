#pragma once

#include "qsr/tensor.hpp"

namespace qsr::eval {

// Classical interpolation baselines, [H,W,C] -> [sH,sW,C]. Bilinear and
// bicubic use the align_corners=false pixel-center convention; bicubic is
// the Catmull-Rom kernel (a = -0.5) with reflected borders.
Tensor upscale_nearest(const Tensor& lr, int s = 2);
Tensor upscale_bilinear(const Tensor& lr, int s = 2);
Tensor upscale_bicubic(const Tensor& lr, int s = 2);

// Catmull-Rom weight at distance t from the sample (exposed for tests).
double catmull_rom(double t);

} // namespace qsr::eval
