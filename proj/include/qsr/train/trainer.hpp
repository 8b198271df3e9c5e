#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qsr/data/dataset.hpp"
#include "qsr/model/network.hpp"
#include "qsr/tensor.hpp"

namespace qsr::train {

struct TrainConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 64;
    int epochs = 25;
    std::uint64_t seed = 0;
    double clip_norm = 0.0;      // 0 disables the global-norm clip; 10 is the stability preset
    int grad_check_every = 0;    // 0 disables in-loop gradient spot checks
    int workers = 1;             // circuit-batch worker count for forward/backward
    std::string log_path;       // empty -> no step log; else JSON lines appended
};

void validate_train(const TrainConfig& cfg);

// Adam moments over the flat parameter view.
struct AdamState {
    std::vector<double> m, v;
    long t = 0;
};

AdamState make_adam(std::size_t n);

// Mean absolute error. When d_sr is given it receives the input cotangent
// sign(sr - hr)/N, with sign(0) = 0.
double l1_loss(const Tensor& sr, const Tensor& hr, Tensor* d_sr = nullptr);

// In-place bias-corrected Adam update. A non-finite gradient refuses the
// whole step: params and state are left untouched.
void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               const TrainConfig& cfg);

struct EpochStats {
    double mean_loss = 0.0;
    int steps = 0;
    double wall_seconds = 0.0;
};

// One pass over the training set: permutation from seed ^ epoch, then per
// batch forward / L1 / backward / Adam. step0 is the global step count
// before this epoch (used for the log and the in-loop grad checks).
EpochStats train_epoch(model::ModelParams& params, const model::ModelConfig& mcfg,
                       const data::DatasetHandle& train_set, const TrainConfig& cfg,
                       AdamState& state, int epoch, long step0 = 0);

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    std::string worst_name; // flat-view slice name of the worst coordinate
    int coords = 0;         // coordinates actually probed
};

// Central finite differences (h = 1e-5) on a random coordinate subset of the
// flat view (at least min_coords, or all of them when the model is smaller),
// against the analytic gradient of the L1 loss on one image pair.
GradCheckReport grad_check(const model::ModelParams& params, const model::ModelConfig& mcfg,
                           const Tensor& lr_img, const Tensor& hr_img, int min_coords = 200,
                           std::uint64_t seed = 0, int workers = 1);

// Mean L1 over a dataset with the current weights (evaluation hook).
double mean_l1(const model::ModelParams& params, const model::ModelConfig& mcfg,
               const data::DatasetHandle& ds, int workers = 1);

} // namespace qsr::train
