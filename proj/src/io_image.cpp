#include "qsr/io/image.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "qsr/error.hpp"

namespace qsr::io {

namespace {

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>()};
    return bytes;
}

void spill(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + path);
}

std::uint32_t be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

// One PNG chunk: length, 4-byte type, payload, CRC over type+payload.
void put_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + type_at, static_cast<uInt>(4 + payload.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

const unsigned char kPngSignature[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

void check_image_shape(const Tensor& img) {
    if (img.shape.size() != 3)
        throw ValidationError("image tensor must be [H,W,C]");
    const int c = img.shape[2];
    if (c != 1 && c != 3)
        throw ValidationError("image must have 1 or 3 channels, got " + std::to_string(c));
    if (img.shape[0] < 1 || img.shape[1] < 1)
        throw ValidationError("image dimensions must be positive");
}

// Paeth predictor from the PNG filter spec: pick the neighbor closest to
// the linear estimate a + b - c, ties resolved left, up, up-left.
int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

std::uint8_t quantize(double v) {
    if (!(v >= 0.0)) v = 0.0; // also catches NaN
    if (v > 1.0) v = 1.0;
    // nearbyint under the default rounding mode gives round-half-to-even,
    // so 0.5/255 boundaries do not bias the image brighter or darker.
    return static_cast<std::uint8_t>(std::nearbyint(v * 255.0));
}

void write_png(const std::string& path, const Tensor& img) {
    check_image_shape(img);
    const int h = img.shape[0], w = img.shape[1], c = img.shape[2];

    // Raw scanlines, each prefixed with filter type 0 (None).
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(h) * (static_cast<std::size_t>(w) * c + 1));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k) raw.push_back(quantize(img.at(y, x, k)));
    }

    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> zdata(zlen);
    const int rc = compress2(zdata.data(), &zlen, raw.data(),
                             static_cast<uLong>(raw.size()), Z_DEFAULT_COMPRESSION);
    if (rc != Z_OK) throw NumericalError("zlib compression failed with code " + std::to_string(rc));
    zdata.resize(zlen);

    std::vector<unsigned char> out(kPngSignature, kPngSignature + 8);
    std::vector<unsigned char> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(w));
    put_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);                                  // bit depth
    ihdr.push_back(c == 1 ? 0 : 2);                     // gray / truecolor
    ihdr.push_back(0);                                  // compression
    ihdr.push_back(0);                                  // filter method
    ihdr.push_back(0);                                  // non-interlaced
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", zdata);
    put_chunk(out, "IEND", {});
    spill(path, out);
}

Tensor read_png(const std::string& path) {
    const std::vector<unsigned char> bytes = slurp(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSignature, 8) != 0)
        throw FormatError(path + " is not a PNG file");

    int w = 0, h = 0, channels = 0;
    bool seen_ihdr = false;
    std::vector<unsigned char> zdata;

    std::size_t at = 8;
    while (at + 8 <= bytes.size()) {
        const std::uint32_t len = be32(bytes.data() + at);
        const char* type = reinterpret_cast<const char*>(bytes.data() + at + 4);
        if (at + 12 + len > bytes.size())
            throw FormatError("PNG chunk overruns file at offset " + std::to_string(at));
        const unsigned char* data = bytes.data() + at + 8;

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw FormatError("PNG IHDR has wrong length");
            w = static_cast<int>(be32(data));
            h = static_cast<int>(be32(data + 4));
            const int depth = data[8], color = data[9], interlace = data[12];
            if (depth != 8)
                throw FormatError("unsupported PNG bit depth " + std::to_string(depth) +
                                  " (only 8 is handled)");
            if (color == 0) channels = 1;
            else if (color == 2) channels = 3;
            else
                throw FormatError("unsupported PNG color type " + std::to_string(color) +
                                  " (only grayscale and RGB are handled)");
            if (interlace != 0) throw FormatError("interlaced PNG is not supported");
            seen_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            zdata.insert(zdata.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        } // ancillary chunks are skipped
        at += 12 + len;
    }
    if (!seen_ihdr || w < 1 || h < 1) throw FormatError("PNG is missing a valid IHDR");
    if (zdata.empty()) throw FormatError("PNG has no IDAT data");

    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    const std::size_t raw_size = static_cast<std::size_t>(h) * (stride + 1);
    std::vector<unsigned char> raw(raw_size);
    uLongf rlen = static_cast<uLongf>(raw_size);
    const int rc = uncompress(raw.data(), &rlen, zdata.data(), static_cast<uLong>(zdata.size()));
    if (rc != Z_OK) throw FormatError("PNG IDAT stream is corrupt (zlib code " + std::to_string(rc) + ")");
    if (rlen != raw_size)
        throw FormatError("PNG pixel data is " + std::to_string(rlen) + " bytes, expected " +
                          std::to_string(raw_size));

    // Undo per-scanline filtering in place; `recon` walks the previous row.
    const int bpp = channels;
    std::vector<unsigned char> prior(stride, 0), line(stride);
    Tensor img({h, w, channels});
    for (int y = 0; y < h; ++y) {
        const unsigned char* src = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
        const int filter = src[0];
        ++src;
        for (std::size_t i = 0; i < stride; ++i) {
            const int x = src[i];
            const int a = i >= static_cast<std::size_t>(bpp) ? line[i - bpp] : 0;
            const int b = prior[i];
            const int c = i >= static_cast<std::size_t>(bpp) ? prior[i - bpp] : 0;
            int v = 0;
            switch (filter) {
                case 0: v = x; break;
                case 1: v = x + a; break;
                case 2: v = x + b; break;
                case 3: v = x + (a + b) / 2; break;
                case 4: v = x + paeth(a, b, c); break;
                default:
                    throw FormatError("PNG scanline uses unknown filter " + std::to_string(filter));
            }
            line[i] = static_cast<unsigned char>(v & 0xff);
        }
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < channels; ++k)
                img.at(y, x, k) = line[static_cast<std::size_t>(x) * channels + k] / 255.0;
        prior = line;
    }
    return img;
}

void write_pnm(const std::string& path, const Tensor& img) {
    check_image_shape(img);
    const int h = img.shape[0], w = img.shape[1], c = img.shape[2];
    char header[64];
    std::snprintf(header, sizeof header, "%s\n%d %d\n255\n", c == 1 ? "P5" : "P6", w, h);
    std::vector<unsigned char> out(header, header + std::strlen(header));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int k = 0; k < c; ++k) out.push_back(quantize(img.at(y, x, k)));
    spill(path, out);
}

Tensor read_pnm(const std::string& path) {
    const std::vector<unsigned char> bytes = slurp(path);
    std::size_t at = 0;

    auto skip_space = [&] {
        while (at < bytes.size()) {
            if (std::isspace(bytes[at])) { ++at; continue; }
            if (bytes[at] == '#') { // comment runs to end of line
                while (at < bytes.size() && bytes[at] != '\n') ++at;
                continue;
            }
            break;
        }
    };
    auto next_int = [&]() -> int {
        skip_space();
        if (at >= bytes.size() || !std::isdigit(bytes[at]))
            throw FormatError(path + " has a malformed PNM header");
        long v = 0;
        while (at < bytes.size() && std::isdigit(bytes[at])) {
            v = v * 10 + (bytes[at] - '0');
            if (v > 1 << 30) throw FormatError(path + " has an out-of-range PNM header field");
            ++at;
        }
        return static_cast<int>(v);
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
        throw FormatError(path + " is not a binary PGM/PPM file");
    const int channels = bytes[1] == '5' ? 1 : 3;
    at = 2;
    const int w = next_int(), h = next_int(), maxval = next_int();
    if (w < 1 || h < 1) throw FormatError(path + " has non-positive PNM dimensions");
    if (maxval != 255)
        throw FormatError(path + " has maxval " + std::to_string(maxval) + ", only 255 is handled");
    ++at; // single whitespace byte separates header from pixel data

    const std::size_t need = static_cast<std::size_t>(h) * w * channels;
    if (bytes.size() < at + need)
        throw FormatError(path + " pixel data is truncated: have " +
                          std::to_string(bytes.size() - at) + " bytes, need " + std::to_string(need));

    Tensor img({h, w, channels});
    for (std::size_t i = 0; i < need; ++i) img.v[i] = bytes[at + i] / 255.0;
    return img;
}

Tensor read_image(const std::string& path) {
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".png") return read_png(path);
    if (ext == ".pgm" || ext == ".ppm") return read_pnm(path);
    throw ValidationError("unsupported image extension '" + ext + "' (use .png, .pgm, or .ppm)");
}

} // namespace qsr::io
