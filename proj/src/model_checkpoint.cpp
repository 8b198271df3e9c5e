#include "qsr/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

#include "qsr/error.hpp"

namespace qsr::model {

namespace {

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
    return json{{"embed_dim", c.embed_dim},
                {"window", c.window},
                {"num_layers", c.num_layers},
                {"heads", c.heads},
                {"qmlp_ratio", c.qmlp_ratio},
                {"upscale", c.upscale},
                {"layers_per_block", c.layers_per_block},
                {"channels", c.channels},
                {"drop_path", c.drop_path},
                {"qlayer_depth", c.qlayer_depth}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.embed_dim = j.at("embed_dim").get<int>();
    c.window = j.at("window").get<int>();
    c.num_layers = j.at("num_layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.qmlp_ratio = j.at("qmlp_ratio").get<int>();
    c.upscale = j.at("upscale").get<int>();
    c.layers_per_block = j.at("layers_per_block").get<int>();
    c.channels = j.at("channels").get<int>();
    c.drop_path = j.at("drop_path").get<double>();
    c.qlayer_depth = j.at("qlayer_depth").get<int>();
    return c;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(char((bits >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    return v;
}

double get_f64(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

} // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const ModelConfig& cfg,
                     std::uint64_t seed, int epoch) {
    validate_model(params, cfg);
    const FlatLayout layout = flat_layout(params);
    const std::vector<double> flat = flatten(params);

    json layout_json = json::array();
    for (const FlatSlice& s : layout.slices)
        layout_json.push_back(json{{"name", s.name}, {"offset", s.offset}, {"count", s.count}});
    const json header{{"config", config_to_json(cfg)},
                      {"layout", layout_json},
                      {"seed", seed},
                      {"epoch", epoch},
                      {"param_count", layout.total}};
    const std::string header_str = header.dump();

    std::string blob = "QSR1";
    put_u32(blob, std::uint32_t(header_str.size()));
    blob += header_str;
    for (double v : flat) put_f64(blob, v);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open checkpoint file for writing: " + path);
    out.write(blob.data(), std::streamsize(blob.size()));
    if (!out) throw FormatError("short write to checkpoint file: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint file: " + path);
    std::vector<unsigned char> blob((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (blob.size() < 8 || std::memcmp(blob.data(), "QSR1", 4) != 0)
        throw FormatError("not a checkpoint file (bad magic): " + path);
    const std::uint32_t header_len = get_u32(blob.data() + 4);
    if (blob.size() < 8 + size_t(header_len))
        throw FormatError("checkpoint header truncated: " + path);

    json header;
    try {
        header = json::parse(blob.begin() + 8, blob.begin() + 8 + header_len);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }

    Checkpoint ck;
    ck.config = config_from_json(header.at("config"));
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.epoch = header.at("epoch").get<int>();
    const std::size_t count = header.at("param_count").get<std::size_t>();

    const std::size_t body = 8 + header_len;
    if (blob.size() != body + count * 8)
        throw FormatError("checkpoint parameter array has wrong length: " + path);
    std::vector<double> flat(count);
    for (std::size_t i = 0; i < count; ++i) flat[i] = get_f64(blob.data() + body + i * 8);

    ck.params = make_model(ck.config, 0); // shapes only; values overwritten
    unflatten(ck.params, flat);
    return ck;
}

} // namespace qsr::model
