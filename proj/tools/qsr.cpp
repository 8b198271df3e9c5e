// Command-line front end: training, single-image SR, benchmark tables,
// noise and scaling sweeps, gradient checks, and feature-dependence
// analysis. Every run drops a manifest into its output directory first,
// so a missing manifest means the run never started.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "qsr/data/dataset.hpp"
#include "qsr/error.hpp"
#include "qsr/eval/benchmark.hpp"
#include "qsr/eval/dependence.hpp"
#include "qsr/eval/metrics.hpp"
#include "qsr/eval/upscale.hpp"
#include "qsr/io/hash.hpp"
#include "qsr/io/image.hpp"
#include "qsr/model/checkpoint.hpp"
#include "qsr/model/network.hpp"
#include "qsr/qsim/density.hpp"
#include "qsr/rng.hpp"
#include "qsr/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qsr;

namespace {

// ---------------------------------------------------------------- plumbing

int env_workers() {
    if (const char* s = std::getenv("QSR_WORKERS")) {
        const int v = std::atoi(s);
        if (v >= 1) return v;
    }
    return 1;
}

std::string iso_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Write-then-rename so readers never observe a half-written file.
void write_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open file for writing: " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw FormatError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

// Run manifest: config snapshot, seed, input content hashes, timestamps and
// produced files. Written before the work starts and again when it ends.
struct Manifest {
    std::string command;
    fs::path out_dir;
    json config = json::object();
    json inputs = json::object();
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
    std::string started_at;

    void start() {
        started_at = iso_now();
        write(nullptr);
    }
    void finish() {
        const std::string done = iso_now();
        write(&done);
    }

private:
    void write(const std::string* finished) const {
        json m{{"command", command},
               {"config", config},
               {"seed", seed},
               {"inputs", inputs},
               {"started_at", started_at},
               {"finished_at", finished ? json(*finished) : json()},
               {"outputs", outputs}};
        write_atomic(out_dir / "manifest.json", m.dump(2) + "\n");
    }
};

// ------------------------------------------------------------ config knobs

json model_json(const model::ModelConfig& c) {
    return {{"embed_dim", c.embed_dim},   {"window", c.window},
            {"num_layers", c.num_layers}, {"heads", c.heads},
            {"qmlp_ratio", c.qmlp_ratio}, {"upscale", c.upscale},
            {"layers_per_block", c.layers_per_block}, {"channels", c.channels},
            {"drop_path", c.drop_path},   {"qlayer_depth", c.qlayer_depth}};
}

json train_json(const train::TrainConfig& c) {
    return {{"lr", c.lr},           {"beta1", c.beta1},
            {"beta2", c.beta2},     {"eps", c.eps},
            {"batch_size", c.batch_size}, {"epochs", c.epochs},
            {"clip_norm", c.clip_norm},   {"grad_check_every", c.grad_check_every}};
}

// Dotted-path overrides: --set model.embed_dim=8 --set train.lr=1e-3.
void apply_set(model::ModelConfig& mc, train::TrainConfig& tc, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
        throw ValidationError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    auto as_int = [&] { return std::stoi(val); };
    auto as_f64 = [&] { return std::stod(val); };

    if (key == "model.embed_dim") mc.embed_dim = as_int();
    else if (key == "model.window") mc.window = as_int();
    else if (key == "model.num_layers") mc.num_layers = as_int();
    else if (key == "model.heads") mc.heads = as_int();
    else if (key == "model.qmlp_ratio") mc.qmlp_ratio = as_int();
    else if (key == "model.upscale") mc.upscale = as_int();
    else if (key == "model.layers_per_block") mc.layers_per_block = as_int();
    else if (key == "model.channels") mc.channels = as_int();
    else if (key == "model.drop_path") mc.drop_path = as_f64();
    else if (key == "model.qlayer_depth") mc.qlayer_depth = as_int();
    else if (key == "train.lr") tc.lr = as_f64();
    else if (key == "train.beta1") tc.beta1 = as_f64();
    else if (key == "train.beta2") tc.beta2 = as_f64();
    else if (key == "train.eps") tc.eps = as_f64();
    else if (key == "train.batch_size") tc.batch_size = as_int();
    else if (key == "train.epochs") tc.epochs = as_int();
    else if (key == "train.clip_norm") tc.clip_norm = as_f64();
    else if (key == "train.grad_check_every") tc.grad_check_every = as_int();
    else
        throw ValidationError("unknown --set key '" + key +
                              "' (model.{embed_dim,window,num_layers,heads,qmlp_ratio,upscale,"
                              "layers_per_block,channels,drop_path,qlayer_depth} or "
                              "train.{lr,beta1,beta2,eps,batch_size,epochs,clip_norm,"
                              "grad_check_every})");
}

// The reference micro configuration used by gradcheck and the sweeps:
// live circuits (depth 2) at the smallest useful width.
model::ModelConfig micro_config() {
    model::ModelConfig c;
    c.embed_dim = 4;
    c.window = 2;
    c.num_layers = 2;
    c.heads = 2;
    c.qmlp_ratio = 1;
    c.layers_per_block = 2;
    c.qlayer_depth = 2;
    return c;
}

// ---------------------------------------------------------------- datasets

// A dataset argument is either a file (.idx/.qsrt/anything IDX) or the
// built-in generator "synth:COUNT[:SEED]" producing 28x28 stroke glyphs.
data::DatasetHandle load_data(const std::string& spec, json& input_info) {
    Tensor stack;
    std::string name;
    if (spec.rfind("synth:", 0) == 0) {
        const std::string rest = spec.substr(6);
        const auto colon = rest.find(':');
        const int count = std::stoi(colon == std::string::npos ? rest : rest.substr(0, colon));
        const std::uint64_t seed =
            colon == std::string::npos ? 20260816ull : std::stoull(rest.substr(colon + 1));
        stack = data::synth_glyphs(count, 28, 28, seed);
        name = "glyphs";
        std::vector<unsigned char> bytes;
        bytes.reserve(stack.v.size());
        for (double v : stack.v) bytes.push_back(static_cast<unsigned char>(v));
        input_info = {{"spec", spec}, {"content_hash", io::content_hash(bytes)}};
    } else {
        const std::string ext = fs::path(spec).extension().string();
        stack = ext == ".qsrt" ? data::load_qsrt(spec) : data::load_idx(spec);
        name = fs::path(spec).stem().string();
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return char(std::tolower(c)); });
        input_info = {{"spec", spec}, {"content_hash", io::file_hash(spec)}};
    }
    input_info["images"] = stack.dim(0);
    return data::make_pairs(stack, name);
}

data::DatasetHandle head_of(const data::DatasetHandle& ds, int count, data::Split split) {
    data::DatasetHandle out{ds.name, split, ds.channels, {}};
    const int n = std::min<int>(count, int(ds.items.size()));
    out.items.assign(ds.items.begin(), ds.items.begin() + n);
    return out;
}

// ------------------------------------------------------------------- eval

Tensor clamped01(Tensor t) {
    for (double& v : t.v) v = std::clamp(v, 0.0, 1.0);
    return t;
}

eval::Upscaler baseline_upscaler(const std::string& method) {
    if (method == "nearest")
        return [](const Tensor& lr) { return eval::upscale_nearest(lr, 2); };
    if (method == "bilinear")
        return [](const Tensor& lr) { return eval::upscale_bilinear(lr, 2); };
    if (method == "bicubic")
        return [](const Tensor& lr) { return eval::upscale_bicubic(lr, 2); };
    throw ValidationError("unknown method '" + method +
                          "' (choose from nearest, bilinear, bicubic, quiet-sr)");
}

eval::Upscaler model_upscaler(const model::Checkpoint& ck, int workers) {
    return [&ck, workers](const Tensor& lr) {
        return clamped01(model::model_forward(lr, ck.params, ck.config, workers));
    };
}

json checkpoint_input(const std::string& path) {
    return {{"spec", path}, {"content_hash", io::file_hash(path)}};
}

void save_checkpoint_atomic(const fs::path& path, const model::ModelParams& params,
                            const model::ModelConfig& cfg, std::uint64_t seed, int epoch) {
    const fs::path tmp = path.string() + ".tmp";
    model::save_checkpoint(tmp.string(), params, cfg, seed, epoch);
    fs::rename(tmp, path);
}

void emit_report(const eval::MetricsReport& report, const fs::path& out_dir, Manifest& manifest) {
    write_atomic(out_dir / "metrics.csv", eval::to_csv({report}));
    const std::string table = eval::to_text_table(report);
    write_atomic(out_dir / "metrics.txt", table);
    manifest.outputs.push_back((out_dir / "metrics.csv").string());
    manifest.outputs.push_back((out_dir / "metrics.txt").string());
    std::fputs(table.c_str(), stdout);
}

// ---------------------------------------------------------------- commands

struct TrainArgs {
    std::string dataset, out = "runs/train";
    std::uint64_t seed = 0;
    int subset = 0;      // 0 = everything except the test tail
    int test_count = 100;
    int workers = env_workers();
    std::vector<std::string> sets;
    train::TrainConfig tcfg;
    model::ModelConfig mcfg;
};

int run_train(TrainArgs a) {
    for (const auto& kv : a.sets) apply_set(a.mcfg, a.tcfg, kv);
    a.tcfg.seed = a.seed;
    a.tcfg.workers = a.workers;
    model::validate_config(a.mcfg);
    train::validate_train(a.tcfg);

    json data_info;
    const data::DatasetHandle all = load_data(a.dataset, data_info);
    const int n = int(all.items.size());
    const int train_count = a.subset > 0 ? a.subset : std::max(1, n - a.test_count);
    if (train_count >= n && a.subset > 0)
        throw ValidationError("subset " + std::to_string(a.subset) + " leaves no test images (" +
                              std::to_string(n) + " available)");
    auto [train_set, rest] = data::split_dataset(all, std::min(train_count, n));
    const data::DatasetHandle test_set = head_of(rest, a.test_count, data::Split::test);

    const fs::path out_dir(a.out);
    fs::create_directories(out_dir);
    const fs::path log_path = out_dir / "steps.jsonl";
    fs::remove(log_path); // train_epoch appends; start each run clean
    a.tcfg.log_path = log_path.string();

    Manifest manifest;
    manifest.command = "train";
    manifest.out_dir = out_dir;
    manifest.seed = a.seed;
    manifest.config = {{"model", model_json(a.mcfg)},
                       {"train", train_json(a.tcfg)},
                       {"flags",
                        {{"dataset", a.dataset},
                         {"subset", a.subset},
                         {"test_count", a.test_count},
                         {"workers", a.workers}}}};
    manifest.inputs = {{"dataset", data_info}};
    manifest.start();

    const auto rr = model::resource_report(a.mcfg);
    std::printf("dataset %s: %d train / %d test pairs\n", train_set.name.c_str(),
                int(train_set.items.size()), int(test_set.items.size()));
    std::printf("resources: %d qubits/circuit (formula ceil(log2 D)+0 = %d), %ld circuits/forward, "
                "%zu params\n",
                rr.qubits_per_circuit, rr.formula_qubits, rr.circuits_per_forward, rr.param_count);

    model::ModelParams params = model::make_model(a.mcfg, a.seed);
    train::AdamState adam = train::make_adam(model::flat_layout(params).total);
    const fs::path ck_path = out_dir / "checkpoint.qsr1";

    long step = 0;
    for (int epoch = 0; epoch < a.tcfg.epochs; ++epoch) {
        const train::EpochStats stats =
            train::train_epoch(params, a.mcfg, train_set, a.tcfg, adam, epoch, step);
        step += stats.steps;
        save_checkpoint_atomic(ck_path, params, a.mcfg, a.seed, epoch);
        std::printf("epoch %d: mean L1 %.6f over %d steps (%.1fs)\n", epoch, stats.mean_loss,
                    stats.steps, stats.wall_seconds);
    }
    if (a.tcfg.epochs == 0) save_checkpoint_atomic(ck_path, params, a.mcfg, a.seed, 0);
    manifest.outputs.push_back(ck_path.string());
    manifest.outputs.push_back(log_path.string());

    if (!test_set.items.empty()) {
        model::Checkpoint ck{a.mcfg, params, a.seed, a.tcfg.epochs};
        eval::MetricsReport report;
        report.dataset = test_set.name;
        for (const char* m : {"nearest", "bilinear", "bicubic"})
            report.rows.push_back(eval::benchmark_method(m, baseline_upscaler(m), test_set));
        report.rows.push_back(
            eval::benchmark_method("quiet-sr", model_upscaler(ck, a.workers), test_set));
        report.reference_rows = eval::paper_rows(test_set.name);
        report.note = "measured on the held-out tail; infinite PSNR capped at 60 dB";
        emit_report(report, out_dir, manifest);
    }
    manifest.finish();
    return 0;
}

struct SrArgs {
    std::string checkpoint, input, output;
    int workers = env_workers();
};

int run_sr(const SrArgs& a) {
    const model::Checkpoint ck = model::load_checkpoint(a.checkpoint);
    const Tensor img = io::read_image(a.input);
    const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    if (c != ck.config.channels)
        throw ValidationError("checkpoint expects " + std::to_string(ck.config.channels) +
                              "-channel input, image has " + std::to_string(c));
    const int m = ck.config.window;
    if (h % m != 0 || w % m != 0)
        throw ValidationError("input " + std::to_string(h) + "x" + std::to_string(w) +
                              " is not divisible by the attention window M=" + std::to_string(m));

    const fs::path out_path(a.output);
    Manifest manifest;
    manifest.command = "sr";
    manifest.out_dir = out_path.parent_path().empty() ? "." : out_path.parent_path();
    manifest.seed = ck.seed;
    manifest.config = {{"model", model_json(ck.config)},
                       {"flags", {{"checkpoint", a.checkpoint}, {"input", a.input},
                                  {"output", a.output}, {"workers", a.workers}}}};
    manifest.inputs = {{"checkpoint", checkpoint_input(a.checkpoint)},
                       {"image", {{"spec", a.input}, {"content_hash", io::file_hash(a.input)}}}};
    manifest.start();

    const Tensor sr = clamped01(model::model_forward(img, ck.params, ck.config, a.workers));
    const std::string ext = out_path.extension().string();
    if (ext == ".png") io::write_png(a.output, sr);
    else if (ext == ".pgm" || ext == ".ppm") io::write_pnm(a.output, sr);
    else throw ValidationError("unsupported output extension '" + ext + "' (use .png, .pgm, .ppm)");

    manifest.outputs.push_back(a.output);
    manifest.finish();
    std::printf("%dx%d -> %dx%d written to %s\n", h, w, sr.dim(0), sr.dim(1), a.output.c_str());
    return 0;
}

struct BenchmarkArgs {
    std::string dataset, methods, checkpoint, reference, out = "runs/benchmark";
    int subset = 0;
    int workers = env_workers();
};

int run_benchmark(const BenchmarkArgs& a) {
    std::vector<std::string> methods;
    for (std::size_t at = 0; at < a.methods.size();) {
        const auto comma = a.methods.find(',', at);
        const auto end = comma == std::string::npos ? a.methods.size() : comma;
        if (end > at) methods.push_back(a.methods.substr(at, end - at));
        at = end + 1;
    }
    if (methods.empty())
        throw ValidationError("methods list is empty (choose from nearest, bilinear, bicubic, "
                              "quiet-sr)");
    for (std::string& m : methods)
        if (m == "model") m = "quiet-sr";
    const bool wants_model =
        std::find(methods.begin(), methods.end(), "quiet-sr") != methods.end();
    if (wants_model && a.checkpoint.empty())
        throw ValidationError("method quiet-sr requires --checkpoint");

    json data_info;
    data::DatasetHandle ds = load_data(a.dataset, data_info);
    ds.split = data::Split::test;
    if (a.subset > 0) ds = head_of(ds, a.subset, data::Split::test);

    const fs::path out_dir(a.out);
    Manifest manifest;
    manifest.command = "benchmark";
    manifest.out_dir = out_dir;
    manifest.config = {{"flags",
                        {{"dataset", a.dataset}, {"methods", methods}, {"subset", a.subset},
                         {"checkpoint", a.checkpoint}, {"reference", a.reference},
                         {"workers", a.workers}}}};
    manifest.inputs = {{"dataset", data_info}};

    model::Checkpoint ck;
    if (wants_model) {
        ck = model::load_checkpoint(a.checkpoint);
        manifest.inputs["checkpoint"] = checkpoint_input(a.checkpoint);
        manifest.seed = ck.seed;
    }
    manifest.start();

    eval::MetricsReport report;
    report.dataset = ds.name;
    for (const std::string& m : methods)
        report.rows.push_back(eval::benchmark_method(
            m, m == "quiet-sr" ? model_upscaler(ck, a.workers) : baseline_upscaler(m), ds));
    const std::string ref = a.reference.empty() ? ds.name : a.reference;
    report.reference_rows = eval::paper_rows(ref);
    report.note = report.reference_rows.empty()
                      ? "no published reference rows for '" + ref + "'"
                      : "reference rows: published '" + ref + "' table";
    emit_report(report, out_dir, manifest);
    manifest.finish();
    return 0;
}

struct NoiseArgs {
    std::string checkpoint, dataset, kind = "depolarizing", out = "runs/noise-sweep";
    std::vector<double> strengths = {0.0, 0.25, 0.5, 0.75, 1.0};
    int subset = 4;
    int workers = env_workers();
};

qsim::NoiseChannel::Kind parse_kind(const std::string& s) {
    using K = qsim::NoiseChannel::Kind;
    if (s == "depolarizing") return K::Depolarizing;
    if (s == "amplitude-damping") return K::AmplitudeDamping;
    if (s == "phase-damping") return K::PhaseDamping;
    if (s == "bit-flip") return K::BitFlip;
    throw ValidationError("unknown noise kind '" + s +
                          "' (depolarizing, amplitude-damping, phase-damping, bit-flip)");
}

int run_noise_sweep(const NoiseArgs& a) {
    const qsim::NoiseChannel::Kind kind = parse_kind(a.kind);
    for (double s : a.strengths)
        if (!(s >= 0.0 && s <= 1.0))
            throw ValidationError("noise strength must lie in [0,1], got " + std::to_string(s));

    const model::Checkpoint ck = model::load_checkpoint(a.checkpoint);
    json data_info;
    data::DatasetHandle ds = load_data(a.dataset, data_info);
    ds = head_of(ds, a.subset > 0 ? a.subset : int(ds.items.size()), data::Split::test);

    const fs::path out_dir(a.out);
    Manifest manifest;
    manifest.command = "noise-sweep";
    manifest.out_dir = out_dir;
    manifest.seed = ck.seed;
    manifest.config = {{"model", model_json(ck.config)},
                       {"flags",
                        {{"dataset", a.dataset}, {"kind", a.kind}, {"strengths", a.strengths},
                         {"subset", a.subset}, {"checkpoint", a.checkpoint},
                         {"workers", a.workers}}}};
    manifest.inputs = {{"dataset", data_info}, {"checkpoint", checkpoint_input(a.checkpoint)}};
    manifest.start();

    const eval::MetricRow noiseless =
        eval::benchmark_method("quiet-sr", model_upscaler(ck, a.workers), ds);
    std::printf("noiseless baseline: %.4f dB / %.4f SSIM over %d images\n", noiseless.psnr_db,
                noiseless.ssim, int(ds.items.size()));

    std::string csv = "kind,strength,psnr_db,ssim\n";
    bool zero_row_ok = true;
    for (double s : a.strengths) {
        eval::MetricRow row;
        {
            qsim::NoiseScope scope({kind, s});
            row = eval::benchmark_method("quiet-sr", model_upscaler(ck, a.workers), ds);
        }
        char line[160];
        std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f\n", a.kind.c_str(), s, row.psnr_db,
                      row.ssim);
        csv += line;
        std::printf("  %s p=%.2f: %.4f dB / %.4f SSIM\n", a.kind.c_str(), s, row.psnr_db, row.ssim);
        if (s == 0.0) {
            // the density path at strength 0 must agree with the pure path
            const double dp = std::abs(row.psnr_db - noiseless.psnr_db);
            const double dsim = std::abs(row.ssim - noiseless.ssim);
            if (dp > 1e-9 || dsim > 1e-9) {
                zero_row_ok = false;
                std::fprintf(stderr,
                             "error: strength-0 row deviates from the noiseless baseline "
                             "(dPSNR %.3e, dSSIM %.3e)\n",
                             dp, dsim);
            }
        }
    }
    write_atomic(out_dir / "noise.csv", csv);
    manifest.outputs.push_back((out_dir / "noise.csv").string());
    manifest.finish();
    return zero_row_ok ? 0 : 1;
}

struct ScalingArgs {
    std::string dataset, out = "runs/scaling-sweep";
    std::vector<int> dims;
    int budget = 300;
    int subset = 64;
    int test_count = 32;
    std::uint64_t seed = 0;
    int workers = env_workers();
    std::vector<std::string> sets;
};

int run_scaling_sweep(const ScalingArgs& a) {
    if (a.dims.empty()) throw ValidationError("--dims needs at least one embedding dimension");
    for (int d : a.dims) {
        if (d < 1) throw ValidationError("embedding dimension must be positive");
        if (d > 10)
            throw CapacityError("embedding dimension " + std::to_string(d) +
                                " exceeds the 10-qubit resource target");
    }
    if (a.budget < 1) throw ValidationError("--budget must be at least 1 step");

    json data_info;
    const data::DatasetHandle all = load_data(a.dataset, data_info);
    const int n = int(all.items.size());
    const int train_count = std::min(a.subset, std::max(1, n - 1));
    auto [train_set, rest] = data::split_dataset(all, train_count);
    const data::DatasetHandle test_set = head_of(rest, a.test_count, data::Split::test);
    if (test_set.items.empty())
        throw ValidationError("no test images left after the training subset");

    const fs::path out_dir(a.out);
    Manifest manifest;
    manifest.command = "scaling-sweep";
    manifest.out_dir = out_dir;
    manifest.seed = a.seed;
    manifest.inputs = {{"dataset", data_info}};
    manifest.config = {{"flags",
                        {{"dataset", a.dataset}, {"dims", a.dims}, {"budget", a.budget},
                         {"subset", a.subset}, {"test_count", a.test_count},
                         {"workers", a.workers}}}};
    manifest.start();

    std::string csv = "dim,psnr_db\n";
    for (const int dim : a.dims) {
        model::ModelConfig mcfg = micro_config();
        mcfg.embed_dim = dim;
        mcfg.heads = dim % 2 == 0 ? 2 : 1; // heads must divide the embedding
        train::TrainConfig tcfg;
        tcfg.batch_size = 8;
        for (const auto& kv : a.sets) apply_set(mcfg, tcfg, kv);
        mcfg.embed_dim = dim; // the sweep owns this knob; --set cannot retarget it
        tcfg.seed = a.seed;
        tcfg.workers = a.workers;
        model::validate_config(mcfg);
        train::validate_train(tcfg);

        const int spe =
            (int(train_set.items.size()) + tcfg.batch_size - 1) / tcfg.batch_size;
        tcfg.epochs = (a.budget + spe - 1) / spe; // first epoch count reaching the budget

        model::ModelParams params = model::make_model(mcfg, a.seed);
        train::AdamState adam = train::make_adam(model::flat_layout(params).total);
        long step = 0;
        for (int epoch = 0; epoch < tcfg.epochs; ++epoch)
            step += train::train_epoch(params, mcfg, train_set, tcfg, adam, epoch, step).steps;

        const model::Checkpoint ck{mcfg, params, a.seed, tcfg.epochs};
        const eval::MetricRow row =
            eval::benchmark_method("quiet-sr", model_upscaler(ck, a.workers), test_set);
        char line[64];
        std::snprintf(line, sizeof line, "%d,%.6f\n", dim, row.psnr_db);
        csv += line;
        std::printf("dim %d: %.4f dB after %ld steps\n", dim, row.psnr_db, step);
    }
    write_atomic(out_dir / "scaling.csv", csv);
    manifest.outputs.push_back((out_dir / "scaling.csv").string());
    manifest.finish();
    return 0;
}

struct GradcheckArgs {
    std::string out = "runs/gradcheck";
    std::uint64_t seed = 0;
    int coords = 200;
    double tol = 1e-4;
    int workers = env_workers();
    std::vector<std::string> sets;
};

int run_gradcheck(const GradcheckArgs& a) {
    model::ModelConfig mcfg = micro_config();
    train::TrainConfig unused;
    for (const auto& kv : a.sets) apply_set(mcfg, unused, kv);
    model::validate_config(mcfg);

    const fs::path out_dir(a.out);
    Manifest manifest;
    manifest.command = "gradcheck";
    manifest.out_dir = out_dir;
    manifest.seed = a.seed;
    manifest.config = {{"model", model_json(mcfg)},
                       {"flags", {{"coords", a.coords}, {"tol", a.tol}, {"workers", a.workers}}}};
    manifest.start();

    SplitMix64 gen(a.seed ^ 0xfeedull);
    Tensor lr({4, 4, mcfg.channels});
    for (double& v : lr.v) v = gen.next_double();
    // A far-away constant target keeps every residual on one side of the
    // L1 kink, so central differences measure the true derivative.
    Tensor hr({4 * mcfg.upscale, 4 * mcfg.upscale, mcfg.channels});
    for (double& v : hr.v) v = 5.0;

    const model::ModelParams params = model::make_model(mcfg, a.seed);
    const train::GradCheckReport report =
        train::grad_check(params, mcfg, lr, hr, a.coords, a.seed, a.workers);
    std::printf("max_rel_err %.3e over %d coordinates (worst: %s)\n", report.max_rel_err,
                report.coords, report.worst_name.c_str());

    write_atomic(out_dir / "gradcheck.json",
                 json{{"max_rel_err", report.max_rel_err},
                      {"coords", report.coords},
                      {"worst", report.worst_name},
                      {"tol", a.tol}}
                         .dump(2) +
                     "\n");
    manifest.outputs.push_back((out_dir / "gradcheck.json").string());
    manifest.finish();
    if (report.max_rel_err >= a.tol) {
        std::fprintf(stderr, "error: max_rel_err %.3e exceeds tolerance %.1e\n", report.max_rel_err,
                     a.tol);
        return 1;
    }
    return 0;
}

struct FeatureArgs {
    std::string checkpoint, dataset, out = "runs/feature-analysis";
    std::vector<int> ks = {10, 25, 50, 100, 150};
    int subset = 4;
    int max_tokens = 800;
    int permutations = 1000;
    std::uint64_t seed = 0;
    int workers = env_workers();
};

int reflect_idx(int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
    return i;
}

int run_feature_analysis(const FeatureArgs& a) {
    const model::Checkpoint ck = model::load_checkpoint(a.checkpoint);
    json data_info;
    data::DatasetHandle ds = load_data(a.dataset, data_info);
    ds = head_of(ds, a.subset > 0 ? a.subset : int(ds.items.size()), data::Split::test);
    if (ds.items.empty()) throw ValidationError("feature analysis needs at least one image");

    const fs::path out_dir(a.out);
    Manifest manifest;
    manifest.command = "feature-analysis";
    manifest.out_dir = out_dir;
    manifest.seed = a.seed;
    manifest.config = {{"model", model_json(ck.config)},
                       {"flags",
                        {{"dataset", a.dataset}, {"subset", a.subset}, {"ks", a.ks},
                         {"max_tokens", a.max_tokens}, {"permutations", a.permutations},
                         {"checkpoint", a.checkpoint}, {"workers", a.workers}}}};
    manifest.inputs = {{"dataset", data_info}, {"checkpoint", checkpoint_input(a.checkpoint)}};
    manifest.start();

    // One row per low-res pixel: X holds its reflect-padded 3x3 input patch,
    // Y the deepest pre-upsample feature vector at the same position.
    const int c = ck.config.channels, d = ck.config.embed_dim;
    std::vector<std::vector<double>> xs, ys;
    for (const data::ImagePair& pair : ds.items) {
        const Tensor feats = model::model_features(pair.lr, ck.params, ck.config, a.workers);
        const int h = pair.lr.dim(0), w = pair.lr.dim(1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                std::vector<double> patch;
                patch.reserve(std::size_t(9) * c);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        for (int k = 0; k < c; ++k)
                            patch.push_back(
                                pair.lr.at(reflect_idx(y + dy, h), reflect_idx(x + dx, w), k));
                xs.push_back(std::move(patch));
                std::vector<double> f(std::size_t(d), 0.0);
                for (int k = 0; k < d; ++k) f[std::size_t(k)] = feats.at(y, x, k);
                ys.push_back(std::move(f));
            }
    }

    // cap the O(n^2) dependence cost with a seeded, order-stable subsample
    std::vector<std::size_t> keep(xs.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
    if (int(keep.size()) > a.max_tokens) {
        SplitMix64 gen(a.seed ^ 0x70cull);
        keep = permutation(keep.size(), gen);
        keep.resize(std::size_t(a.max_tokens));
        std::sort(keep.begin(), keep.end());
    }
    const int n = int(keep.size());
    Tensor x({n, 9 * c}), yf({n, d});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 9 * c; ++j) x.at(i, j) = xs[keep[std::size_t(i)]][std::size_t(j)];
        for (int j = 0; j < d; ++j) yf.at(i, j) = ys[keep[std::size_t(i)]][std::size_t(j)];
    }

    const auto dcor_by_k = eval::dcor_by_neighborhood(x, yf, a.ks);
    const eval::HsicResult hsic = eval::hsic_test(x, yf, a.permutations, a.seed);

    std::string csv = "k,dcor\n";
    json dcor_json = json::array();
    for (const auto& [k, dcor] : dcor_by_k) {
        char line[64];
        std::snprintf(line, sizeof line, "%d,%.9f\n", k, dcor);
        csv += line;
        dcor_json.push_back({{"k", k}, {"dcor", dcor}});
        std::printf("k=%3d: dCor %.4f\n", k, dcor);
    }
    std::printf("HSIC stat %.6g, p = %.4f (%d permutations, %d tokens)\n", hsic.stat, hsic.p_value,
                hsic.permutations, n);

    write_atomic(out_dir / "dcor_by_k.csv", csv);
    write_atomic(out_dir / "feature_report.json",
                 json{{"dcor_by_k", dcor_json},
                      {"hsic_stat", hsic.stat},
                      {"p_value", hsic.p_value},
                      {"permutations", hsic.permutations},
                      {"tokens", n},
                      {"x_dim", 9 * c},
                      {"y_dim", d}}
                         .dump(2) +
                     "\n");
    manifest.outputs.push_back((out_dir / "dcor_by_k.csv").string());
    manifest.outputs.push_back((out_dir / "feature_report.json").string());
    manifest.finish();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid quantum-classical super-resolution toolkit"};
    app.require_subcommand(1);

    TrainArgs ta;
    CLI::App* train = app.add_subcommand("train", "train a model and report test metrics");
    train->add_option("--dataset", ta.dataset, "dataset file or synth:COUNT[:SEED]")->required();
    train->add_option("--out", ta.out, "output directory");
    train->add_option("--seed", ta.seed, "model init / shuffle seed");
    train->add_option("--epochs", ta.tcfg.epochs, "training epochs");
    train->add_option("--subset", ta.subset, "train on the first N images only");
    train->add_option("--test-count", ta.test_count, "held-out tail size");
    train->add_option("--workers", ta.workers, "circuit-batch worker count");
    train->add_option("--set", ta.sets, "config override key=value (model.* / train.*)");

    SrArgs sa;
    CLI::App* sr = app.add_subcommand("sr", "super-resolve one image with a checkpoint");
    sr->add_option("--checkpoint", sa.checkpoint, "trained checkpoint")->required();
    sr->add_option("--input", sa.input, "input image (.png/.pgm/.ppm)")->required();
    sr->add_option("--output", sa.output, "output image path")->required();
    sr->add_option("--workers", sa.workers, "circuit-batch worker count");

    BenchmarkArgs ba;
    CLI::App* bench = app.add_subcommand("benchmark", "measure methods against a dataset");
    bench->add_option("--dataset", ba.dataset, "dataset file or synth:COUNT[:SEED]")->required();
    bench->add_option("--methods", ba.methods, "comma list: nearest,bilinear,bicubic,quiet-sr")
        ->required();
    bench->add_option("--checkpoint", ba.checkpoint, "checkpoint (needed for quiet-sr)");
    bench->add_option("--reference", ba.reference, "published table to print alongside");
    bench->add_option("--subset", ba.subset, "first N images only");
    bench->add_option("--out", ba.out, "output directory");
    bench->add_option("--workers", ba.workers, "circuit-batch worker count");

    NoiseArgs na;
    CLI::App* noise = app.add_subcommand("noise-sweep", "evaluate a checkpoint under gate noise");
    noise->add_option("--checkpoint", na.checkpoint, "trained checkpoint")->required();
    noise->add_option("--dataset", na.dataset, "dataset file or synth:COUNT[:SEED]")->required();
    noise->add_option("--kind", na.kind,
                      "depolarizing | amplitude-damping | phase-damping | bit-flip");
    noise->add_option("--strengths", na.strengths, "channel strengths in [0,1]")->delimiter(',');
    noise->add_option("--subset", na.subset, "images to evaluate (density sim is slow)");
    noise->add_option("--out", na.out, "output directory");
    noise->add_option("--workers", na.workers, "circuit-batch worker count");

    ScalingArgs sca;
    CLI::App* scaling =
        app.add_subcommand("scaling-sweep", "PSNR vs embedding dimension at a fixed step budget");
    scaling->add_option("--dataset", sca.dataset, "dataset file or synth:COUNT[:SEED]")->required();
    scaling->add_option("--dims", sca.dims, "embedding dimensions (each <= 10)")
        ->required()
        ->delimiter(',');
    scaling->add_option("--budget", sca.budget, "optimizer steps per dimension");
    scaling->add_option("--subset", sca.subset, "training images");
    scaling->add_option("--test-count", sca.test_count, "held-out tail size");
    scaling->add_option("--seed", sca.seed, "model init / shuffle seed");
    scaling->add_option("--out", sca.out, "output directory");
    scaling->add_option("--workers", sca.workers, "circuit-batch worker count");
    scaling->add_option("--set", sca.sets, "config override key=value (model.* / train.*)");

    GradcheckArgs ga;
    CLI::App* grad = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
    grad->add_option("--seed", ga.seed, "model / probe seed");
    grad->add_option("--coords", ga.coords, "minimum coordinates to probe");
    grad->add_option("--tol", ga.tol, "max relative error accepted");
    grad->add_option("--out", ga.out, "output directory");
    grad->add_option("--workers", ga.workers, "circuit-batch worker count");
    grad->add_option("--set", ga.sets, "config override key=value (model.*)");

    FeatureArgs fa;
    CLI::App* feat =
        app.add_subcommand("feature-analysis", "dependence between inputs and deep features");
    feat->add_option("--checkpoint", fa.checkpoint, "trained checkpoint")->required();
    feat->add_option("--dataset", fa.dataset, "dataset file or synth:COUNT[:SEED]")->required();
    feat->add_option("--ks", fa.ks, "neighborhood sizes for the dCor sweep")->delimiter(',');
    feat->add_option("--subset", fa.subset, "images contributing tokens");
    feat->add_option("--max-tokens", fa.max_tokens, "token cap for the O(n^2) statistics");
    feat->add_option("--permutations", fa.permutations, "HSIC permutation count");
    feat->add_option("--seed", fa.seed, "subsample / permutation seed");
    feat->add_option("--out", fa.out, "output directory");
    feat->add_option("--workers", fa.workers, "circuit-batch worker count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return run_train(ta);
        if (*sr) return run_sr(sa);
        if (*bench) return run_benchmark(ba);
        if (*noise) return run_noise_sweep(na);
        if (*scaling) return run_scaling_sweep(sca);
        if (*grad) return run_gradcheck(ga);
        if (*feat) return run_feature_analysis(fa);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
