#pragma once

#include <cstdint>
#include <string>

#include "qsr/tensor.hpp"

namespace qsr::io {

// Clamp to [0,1], scale to 0..255 and round half to even.
std::uint8_t quantize(double v);

// 8-bit PNG, grayscale (C=1) or RGB (C=3), non-interlaced. Values are
// quantized on write and mapped back to byte/255 on read.
void write_png(const std::string& path, const Tensor& img);
Tensor read_png(const std::string& path); // handles scanline filters 0-4

// Binary PGM (P5) / PPM (P6) with maxval 255, same value conventions.
void write_pnm(const std::string& path, const Tensor& img);
Tensor read_pnm(const std::string& path);

// Loads by extension: .png, .pgm, .ppm.
Tensor read_image(const std::string& path);

} // namespace qsr::io
