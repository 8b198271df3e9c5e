#include "qsr/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "qsr/error.hpp"
#include "qsr/rng.hpp"

namespace qsr::train {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point from) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - from)
        .count();
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace

void validate_train(const TrainConfig& cfg) {
    if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr))
        throw ValidationError("learning rate must be finite and >= 0");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
        throw ValidationError("Adam betas must lie in [0, 1)");
    if (!(cfg.eps > 0.0)) throw ValidationError("Adam eps must be positive");
    if (cfg.batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (cfg.epochs < 0) throw ValidationError("epoch count must be >= 0");
    if (cfg.clip_norm < 0.0) throw ValidationError("clip_norm must be >= 0 (0 disables)");
    if (cfg.grad_check_every < 0) throw ValidationError("grad_check_every must be >= 0");
    if (cfg.workers < 1) throw ValidationError("worker count must be >= 1");
}

AdamState make_adam(std::size_t n) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    return s;
}

double l1_loss(const Tensor& sr, const Tensor& hr, Tensor* d_sr) {
    if (!sr.same_shape(hr)) throw ValidationError("l1_loss shapes differ");
    const double n = double(sr.v.size());
    if (d_sr) {
        *d_sr = Tensor(sr.shape);
        std::fill(d_sr->v.begin(), d_sr->v.end(), 0.0);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < sr.v.size(); ++i) {
        const double d = sr.v[i] - hr.v[i];
        sum += std::abs(d);
        if (d_sr && d != 0.0) d_sr->v[i] = (d > 0 ? 1.0 : -1.0) / n;
    }
    return sum / n;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               const TrainConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size())
        throw ValidationError("adam_step size mismatch between params, grads and state");
    if (!all_finite(grads)) throw NumericalError("non-finite gradient, step refused");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

EpochStats train_epoch(model::ModelParams& params, const model::ModelConfig& mcfg,
                       const data::DatasetHandle& train_set, const TrainConfig& cfg,
                       AdamState& state, int epoch, long step0) {
    validate_train(cfg);
    if (train_set.items.empty()) throw ValidationError("cannot train on an empty dataset");

    const model::FlatLayout layout = model::flat_layout(params);
    if (state.m.size() != layout.total)
        throw ValidationError("optimizer state does not match the model's flat view");

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path, std::ios::app);
        if (!log) throw ValidationError("cannot open training log: " + cfg.log_path);
    }

    // stochastic-depth draws consume their own stream so the batch
    // permutation stays comparable across drop rates
    SplitMix64 drop_gen(cfg.seed ^ (0x9e3779b97f4a7c15ull * std::uint64_t(epoch + 1)));

    const auto epoch_start = std::chrono::steady_clock::now();
    EpochStats stats;
    double loss_sum = 0.0;
    long step = step0;

    for (const std::vector<int>& batch :
         data::batches(int(train_set.items.size()), cfg.batch_size, cfg.seed, epoch)) {
        const auto step_start = std::chrono::steady_clock::now();
        std::vector<double> grad(layout.total, 0.0);
        double batch_loss = 0.0;
        const double inv_b = 1.0 / double(batch.size());

        try {
            for (int idx : batch) {
                const data::ImagePair& item = train_set.items[std::size_t(idx)];
                std::vector<double> scales;
                if (mcfg.drop_path > 0.0) scales = model::draw_drop_scales(mcfg, drop_gen);
                const Tensor sr = model::model_forward(item.lr, params, mcfg, cfg.workers, scales);
                Tensor cot;
                batch_loss += inv_b * l1_loss(sr, item.hr, &cot);
                const model::ModelGrad g =
                    model::model_backward(item.lr, params, mcfg, cot, cfg.workers, scales);
                const std::vector<double> gf = model::flatten(g.by_param);
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += inv_b * gf[i];
            }

            if (cfg.clip_norm > 0.0) {
                double sq = 0.0;
                for (double g : grad) sq += g * g;
                const double norm = std::sqrt(sq);
                if (norm > cfg.clip_norm)
                    for (double& g : grad) g *= cfg.clip_norm / norm;
            }

            std::vector<double> flat = model::flatten(params);
            adam_step(flat, grad, state, cfg);
            model::unflatten(params, flat);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                 ", step " + std::to_string(step) + ")");
        }

        if (log) {
            nlohmann::json line{{"step", step},
                                {"epoch", epoch},
                                {"loss", batch_loss},
                                {"lr", cfg.lr},
                                {"wall_ms", elapsed_ms(step_start)}};
            if (cfg.grad_check_every > 0 && step % cfg.grad_check_every == 0) {
                const data::ImagePair& probe = train_set.items[std::size_t(batch[0])];
                line["grad_check_max_rel_err"] =
                    grad_check(params, mcfg, probe.lr, probe.hr, 200, cfg.seed, cfg.workers)
                        .max_rel_err;
            }
            log << line.dump() << '\n' << std::flush;
        }

        loss_sum += batch_loss;
        ++stats.steps;
        ++step;
    }

    stats.mean_loss = stats.steps ? loss_sum / stats.steps : 0.0;
    stats.wall_seconds = elapsed_ms(epoch_start) / 1000.0;
    return stats;
}

GradCheckReport grad_check(const model::ModelParams& params, const model::ModelConfig& mcfg,
                           const Tensor& lr_img, const Tensor& hr_img, int min_coords,
                           std::uint64_t seed, int workers) {
    model::ModelParams probe = params;
    const model::FlatLayout layout = model::flat_layout(probe);
    std::vector<double> flat = model::flatten(probe);

    Tensor cot;
    l1_loss(model::model_forward(lr_img, probe, mcfg, workers), hr_img, &cot);
    const std::vector<double> analytic =
        model::flatten(model::model_backward(lr_img, probe, mcfg, cot, workers).by_param);

    std::vector<std::size_t> coords;
    if (layout.total <= std::size_t(min_coords)) {
        coords.resize(layout.total);
        for (std::size_t i = 0; i < layout.total; ++i) coords[i] = i;
    } else {
        SplitMix64 gen(seed);
        coords = permutation(layout.total, gen);
        coords.resize(std::size_t(min_coords));
    }

    const double h = 1e-5;
    GradCheckReport report;
    report.coords = int(coords.size());
    for (std::size_t i : coords) {
        const double orig = flat[i];
        flat[i] = orig + h;
        model::unflatten(probe, flat);
        const double up = l1_loss(model::model_forward(lr_img, probe, mcfg, workers), hr_img);
        flat[i] = orig - h;
        model::unflatten(probe, flat);
        const double dn = l1_loss(model::model_forward(lr_img, probe, mcfg, workers), hr_img);
        flat[i] = orig;

        const double fd = (up - dn) / (2 * h);
        // floor of 1e-3 makes rel < 1e-4 equivalent to the absolute-or-relative
        // tolerance max(1e-4 |fd|, 1e-7) used by the unit-level checks
        const double rel = std::abs(analytic[i] - fd) / std::max(std::abs(fd), 1e-3);
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_index = i;
        }
    }
    model::unflatten(probe, flat);
    report.worst_name = layout.name_of(report.worst_index);
    return report;
}

double mean_l1(const model::ModelParams& params, const model::ModelConfig& mcfg,
               const data::DatasetHandle& ds, int workers) {
    if (ds.items.empty()) throw ValidationError("cannot evaluate an empty dataset");
    double sum = 0.0;
    for (const data::ImagePair& item : ds.items)
        sum += l1_loss(model::model_forward(item.lr, params, mcfg, workers), item.hr);
    return sum / double(ds.items.size());
}

} // namespace qsr::train
