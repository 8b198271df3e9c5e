#include "qsr/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

#include "qsr/error.hpp"
#include "qsr/rng.hpp"

namespace qsr::data {

namespace {

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const unsigned char* p) {
    return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 |
           std::uint32_t(p[3]);
}

void put_be32(std::string& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out.push_back(char((v >> (8 * i)) & 0xff));
}

unsigned char to_byte(double v, const char* what) {
    const double r = std::nearbyint(v);
    if (!(r >= 0.0 && r <= 255.0))
        throw ValidationError(std::string(what) + ": pixel value " + std::to_string(v) +
                              " outside byte range");
    return static_cast<unsigned char>(r);
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;

} // namespace

Tensor load_idx(const std::string& path) {
    const std::vector<unsigned char> blob = slurp(path);
    if (blob.size() < 4) throw FormatError("idx file truncated at offset 0: " + path);
    const std::uint32_t magic = be32(blob.data());
    if (magic != kIdxImagesMagic)
        throw FormatError("idx magic 0x" + [&] {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%08x", magic);
            return std::string(buf);
        }() + " is not an image stack (expected 0x00000803): " + path);
    if (blob.size() < 16) throw FormatError("idx file truncated at offset 4: " + path);
    const std::uint32_t count = be32(blob.data() + 4);
    const std::uint32_t rows = be32(blob.data() + 8);
    const std::uint32_t cols = be32(blob.data() + 12);
    const std::size_t need = 16 + std::size_t(count) * rows * cols;
    if (blob.size() != need)
        throw FormatError("idx payload is " + std::to_string(blob.size() - 16) +
                          " bytes, header promises " + std::to_string(need - 16) + ": " + path);
    Tensor stack({int(count), int(rows), int(cols)});
    for (std::size_t i = 0; i < stack.v.size(); ++i) stack.v[i] = double(blob[16 + i]);
    return stack;
}

void write_idx(const std::string& path, const Tensor& stack) {
    if (stack.shape.size() != 3) throw ValidationError("write_idx expects a [N,rows,cols] stack");
    std::string blob;
    blob.reserve(16 + stack.v.size());
    put_be32(blob, kIdxImagesMagic);
    for (int d : stack.shape) put_be32(blob, std::uint32_t(d));
    for (double v : stack.v) blob.push_back(char(to_byte(v, "write_idx")));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    out.write(blob.data(), std::streamsize(blob.size()));
    if (!out) throw FormatError("short write: " + path);
}

Tensor load_qsrt(const std::string& path) {
    const std::vector<unsigned char> blob = slurp(path);
    if (blob.size() < 8 || std::memcmp(blob.data(), "QSRT", 4) != 0)
        throw FormatError("not a raw-tensor file (bad magic): " + path);
    std::uint32_t hlen = 0;
    for (int i = 0; i < 4; ++i) hlen |= std::uint32_t(blob[4 + std::size_t(i)]) << (8 * i);
    if (blob.size() < 8 + std::size_t(hlen))
        throw FormatError("raw-tensor header truncated: " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob.begin() + 8, blob.begin() + 8 + hlen);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("raw-tensor header is not valid JSON: ") + e.what());
    }
    if (header.value("dtype", "") != "u8")
        throw FormatError("raw-tensor dtype must be u8: " + path);
    const int count = header.at("count").get<int>();
    const int rows = header.at("rows").get<int>();
    const int cols = header.at("cols").get<int>();
    const int channels = header.at("channels").get<int>();
    const std::size_t need = 8 + hlen + std::size_t(count) * rows * cols * channels;
    if (blob.size() != need)
        throw FormatError("raw-tensor payload has wrong length: " + path);
    Tensor stack({count, rows, cols, channels});
    for (std::size_t i = 0; i < stack.v.size(); ++i) stack.v[i] = double(blob[8 + hlen + i]);
    return stack;
}

void write_qsrt(const std::string& path, const Tensor& stack) {
    if (stack.shape.size() != 4)
        throw ValidationError("write_qsrt expects a [N,rows,cols,channels] stack");
    const nlohmann::json header{{"count", stack.shape[0]},
                                {"rows", stack.shape[1]},
                                {"cols", stack.shape[2]},
                                {"channels", stack.shape[3]},
                                {"dtype", "u8"}};
    const std::string hs = header.dump();
    std::string blob = "QSRT";
    for (int i = 0; i < 4; ++i) blob.push_back(char((hs.size() >> (8 * i)) & 0xff));
    blob += hs;
    for (double v : stack.v) blob.push_back(char(to_byte(v, "write_qsrt")));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    out.write(blob.data(), std::streamsize(blob.size()));
    if (!out) throw FormatError("short write: " + path);
}

Tensor downsample2(const Tensor& hr) {
    if (hr.shape.size() != 3) throw ValidationError("downsample2 expects an [H,W,C] map");
    const int h = hr.shape[0], w = hr.shape[1], c = hr.shape[2];
    if (h % 2 != 0 || w % 2 != 0)
        throw ValidationError("downsample2 needs even dims, got " + std::to_string(h) + "x" +
                              std::to_string(w));
    Tensor lr({h / 2, w / 2, c});
    for (int y = 0; y < h / 2; ++y)
        for (int x = 0; x < w / 2; ++x)
            for (int ch = 0; ch < c; ++ch)
                lr.at(y, x, ch) = 0.25 * (hr.at(2 * y, 2 * x, ch) + hr.at(2 * y, 2 * x + 1, ch) +
                                          hr.at(2 * y + 1, 2 * x, ch) +
                                          hr.at(2 * y + 1, 2 * x + 1, ch));
    return lr;
}

DatasetHandle make_pairs(const Tensor& stack, const std::string& name) {
    const bool gray = stack.shape.size() == 3;
    if (!gray && stack.shape.size() != 4)
        throw ValidationError("make_pairs expects [N,H,W] or [N,H,W,C]");
    const int n = stack.shape[0], h = stack.shape[1], w = stack.shape[2];
    const int c = gray ? 1 : stack.shape[3];
    DatasetHandle ds;
    ds.name = name;
    ds.channels = c;
    ds.items.reserve(std::size_t(n));
    const std::size_t image_size = std::size_t(h) * w * c;
    for (int i = 0; i < n; ++i) {
        ImagePair pair;
        pair.source_index = i;
        pair.hr = Tensor({h, w, c});
        for (std::size_t k = 0; k < image_size; ++k)
            pair.hr.v[k] = stack.v[std::size_t(i) * image_size + k] / 255.0;
        pair.lr = downsample2(pair.hr);
        ds.items.push_back(std::move(pair));
    }
    return ds;
}

std::pair<DatasetHandle, DatasetHandle> split_dataset(const DatasetHandle& ds, int train_count) {
    if (train_count < 0 || train_count > int(ds.items.size()))
        throw ValidationError("train_count " + std::to_string(train_count) +
                              " outside dataset of " + std::to_string(ds.items.size()));
    DatasetHandle train{ds.name, Split::train, ds.channels, {}};
    DatasetHandle test{ds.name, Split::test, ds.channels, {}};
    train.items.assign(ds.items.begin(), ds.items.begin() + train_count);
    test.items.assign(ds.items.begin() + train_count, ds.items.end());
    return {std::move(train), std::move(test)};
}

std::vector<std::vector<int>> batches(int count, int batch_size, std::uint64_t seed, int epoch) {
    if (count < 0) throw ValidationError("negative item count");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    SplitMix64 gen(seed ^ std::uint64_t(epoch));
    const std::vector<std::size_t> order = permutation(std::size_t(count), gen);
    std::vector<std::vector<int>> out;
    for (int start = 0; start < count; start += batch_size) {
        const int end = std::min(count, start + batch_size);
        std::vector<int> b;
        b.reserve(std::size_t(end - start));
        for (int i = start; i < end; ++i) b.push_back(int(order[std::size_t(i)]));
        out.push_back(std::move(b));
    }
    return out;
}

Tensor synth_glyphs(int count, int rows, int cols, std::uint64_t seed) {
    if (count < 1 || rows < 4 || cols < 4)
        throw ValidationError("glyph corpus needs count >= 1 and at least 4x4 images");
    SplitMix64 gen(seed);
    Tensor stack({count, rows, cols});
    for (int img = 0; img < count; ++img) {
        // 2..4 smooth pen strokes with a Gaussian cross-section
        const int strokes = 2 + int(gen.next_below(3));
        struct Seg {
            double x0, y0, x1, y1, sigma, amp;
        };
        std::vector<Seg> segs;
        for (int s = 0; s < strokes; ++s) {
            Seg seg;
            seg.x0 = gen.uniform(0.15, 0.85) * cols;
            seg.y0 = gen.uniform(0.15, 0.85) * rows;
            const double ang = gen.uniform(0.0, 2 * 3.14159265358979);
            const double len = gen.uniform(0.25, 0.6) * std::min(rows, cols);
            seg.x1 = seg.x0 + len * std::cos(ang);
            seg.y1 = seg.y0 + len * std::sin(ang);
            seg.sigma = gen.uniform(0.8, 1.6);
            seg.amp = gen.uniform(0.6, 1.0);
            segs.push_back(seg);
        }
        for (int y = 0; y < rows; ++y)
            for (int x = 0; x < cols; ++x) {
                double best = 0.0;
                for (const Seg& s : segs) {
                    const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
                    const double px = x - s.x0, py = y - s.y0;
                    const double len2 = vx * vx + vy * vy;
                    double t = len2 > 0 ? (px * vx + py * vy) / len2 : 0.0;
                    t = std::clamp(t, 0.0, 1.0);
                    const double dx = px - t * vx, dy = py - t * vy;
                    const double d2 = dx * dx + dy * dy;
                    best = std::max(best, s.amp * std::exp(-d2 / (2 * s.sigma * s.sigma)));
                }
                stack.at(img, y, x) = std::nearbyint(255.0 * std::min(1.0, best));
            }
    }
    return stack;
}

} // namespace qsr::data
