#pragma once

#include <cstdint>
#include <string>

#include "qsr/model/network.hpp"

namespace qsr::model {

// Checkpoint file: "QSR1" magic, u32 little-endian JSON header length, the
// header itself (config, flat-view layout, seed, epoch), then the flat
// parameter vector as little-endian f64. Roundtrips byte-exactly.
struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    std::uint64_t seed = 0;
    int epoch = 0;
};

void save_checkpoint(const std::string& path, const ModelParams& params, const ModelConfig& cfg,
                     std::uint64_t seed, int epoch);
Checkpoint load_checkpoint(const std::string& path);

} // namespace qsr::model
