#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qsr/tensor.hpp"

namespace qsr::data {

// IDX image container (big-endian header, magic 0x00000803, u8 pixels).
// Returned stack is [count, rows, cols] with raw byte values 0..255.
Tensor load_idx(const std::string& path);
void write_idx(const std::string& path, const Tensor& stack);

// Raw-tensor sidecar for non-IDX sources: "QSRT" magic, u32 little-endian
// JSON header length, header {count, rows, cols, channels, dtype:"u8"},
// then raw bytes. Returned stack is [count, rows, cols, channels], 0..255.
Tensor load_qsrt(const std::string& path);
void write_qsrt(const std::string& path, const Tensor& stack);

// 2x2 box-filter mean; dims must be even.
Tensor downsample2(const Tensor& hr); // [H,W,C] -> [H/2,W/2,C]

struct ImagePair {
    Tensor lr; // [H/2, W/2, C] in [0,1], exactly downsample2(hr)
    Tensor hr; // [H, W, C] in [0,1]
    int source_index = 0;
};

enum class Split { train, test };

struct DatasetHandle {
    std::string name;
    Split split = Split::train;
    int channels = 1;
    std::vector<ImagePair> items;
};

// hr = pixel/255, lr = downsample2(hr), order preserved. Accepts [N,H,W]
// (grayscale) or [N,H,W,C] stacks with byte-range values.
DatasetHandle make_pairs(const Tensor& stack, const std::string& name);

// Deterministic prefix/suffix partition: the first train_count items form
// the train handle, the remainder the test handle, order preserved.
std::pair<DatasetHandle, DatasetHandle> split_dataset(const DatasetHandle& ds, int train_count);

// Seeded epoch batching: one permutation drawn from seed ^ epoch, sliced
// into batch_size chunks, last partial batch kept.
std::vector<std::vector<int>> batches(int count, int batch_size, std::uint64_t seed, int epoch);

// Procedural stroke-glyph corpus (smooth pen strokes on a dark field),
// the stand-in benchmark source when no external dataset file is given.
// Returns a [count, rows, cols] stack of byte-range values.
Tensor synth_glyphs(int count, int rows, int cols, std::uint64_t seed);

} // namespace qsr::data
