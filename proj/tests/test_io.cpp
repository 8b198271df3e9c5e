#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "qsr/error.hpp"
#include "qsr/io/hash.hpp"
#include "qsr/io/image.hpp"
#include "qsr/rng.hpp"
#include "qsr/tensor.hpp"

using namespace qsr;
using namespace qsr::io;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("qsr_io_test_" + name)).string();
}

std::vector<unsigned char> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    REQUIRE(bool(out));
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

Tensor random_image(int h, int w, int c, std::uint64_t seed) {
    SplitMix64 gen(seed);
    Tensor img({h, w, c});
    for (double& v : img.v) v = gen.next_double();
    return img;
}

void push_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

void push_chunk(std::vector<unsigned char>& out, const char type[4],
                const std::vector<unsigned char>& payload) {
    push_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + at, static_cast<uInt>(4 + payload.size()));
    push_be32(out, static_cast<std::uint32_t>(crc));
}

// Assembles a PNG from already-filtered scanlines, so tests can exercise
// arbitrary headers and filter bytes without going through write_png.
std::vector<unsigned char> build_png(int w, int h, int depth, int color,
                                     const std::vector<unsigned char>& raw) {
    std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<unsigned char> ihdr;
    push_be32(ihdr, std::uint32_t(w));
    push_be32(ihdr, std::uint32_t(h));
    ihdr.push_back(static_cast<unsigned char>(depth));
    ihdr.push_back(static_cast<unsigned char>(color));
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    push_chunk(out, "IHDR", ihdr);
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> z(zlen);
    REQUIRE(compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) == Z_OK);
    z.resize(zlen);
    push_chunk(out, "IDAT", z);
    push_chunk(out, "IEND", {});
    return out;
}

int paeth_ref(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

TEST_CASE("quantize clamps and rounds half to even") {
    CHECK(quantize(0.0) == 0);
    CHECK(quantize(1.0) == 255);
    CHECK(quantize(-0.25) == 0);
    CHECK(quantize(7.5) == 255);
    CHECK(quantize(std::nan("")) == 0);

    // 0.5/255 sits exactly between 0 and 1 -> even neighbor 0;
    // 127.5 between 127 and 128 -> 128; 1.5 between 1 and 2 -> 2.
    CHECK(quantize(0.5 / 255.0) == 0);
    CHECK(quantize(127.5 / 255.0) == 128);
    CHECK(quantize(1.5 / 255.0) == 2);
    CHECK(quantize(128.0 / 255.0) == 128);
}

TEST_CASE("png roundtrip preserves quantized pixels exactly") {
    for (int c : {1, 3}) {
        const Tensor img = random_image(9, 13, c, 0x10aull + std::uint64_t(c));
        const std::string path = tmp_path("roundtrip_" + std::to_string(c) + ".png");
        write_png(path, img);
        const Tensor back = read_png(path);
        REQUIRE(back.shape == std::vector<int>{9, 13, c});
        for (std::size_t i = 0; i < img.v.size(); ++i)
            CHECK(back.v[i] == quantize(img.v[i]) / 255.0);
    }

    // writing the same image twice produces identical bytes
    const Tensor img = random_image(6, 6, 1, 77);
    const std::string a = tmp_path("stable_a.png"), b = tmp_path("stable_b.png");
    write_png(a, img);
    write_png(b, img);
    CHECK(read_bytes(a) == read_bytes(b));
}

TEST_CASE("png reader undoes all five scanline filters") {
    // 4x5 grayscale, pixel (y,x) = 17*y + 31*x mod 256; each row filtered
    // with a different filter type, forward-filtered here by hand.
    const int w = 5, h = 4, bpp = 1;
    std::vector<std::vector<unsigned char>> rows(h, std::vector<unsigned char>(w));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            rows[y][x] = static_cast<unsigned char>((17 * y + 31 * x) & 0xff);

    std::vector<unsigned char> raw;
    const int filters[4] = {0, 1, 2, 3};
    for (int y = 0; y < h; ++y) {
        const int f = y < 4 ? filters[y] : 0;
        raw.push_back(static_cast<unsigned char>(f));
        for (int x = 0; x < w; ++x) {
            const int cur = rows[y][x];
            const int left = x >= bpp ? rows[y][x - bpp] : 0;
            const int up = y > 0 ? rows[y - 1][x] : 0;
            int enc = cur;
            if (f == 1) enc = cur - left;
            else if (f == 2) enc = cur - up;
            else if (f == 3) enc = cur - (left + up) / 2;
            raw.push_back(static_cast<unsigned char>(enc & 0xff));
        }
    }
    const std::string path = tmp_path("filters.png");
    write_bytes(path, build_png(w, h, 8, 0, raw));
    const Tensor img = read_png(path);
    REQUIRE(img.shape == std::vector<int>{h, w, 1});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) CHECK(img.at(y, x, 0) == rows[y][x] / 255.0);

    // Paeth on RGB: filter 4 with bpp=3 against the reference predictor.
    const int w3 = 3, h3 = 3, c3 = 3;
    std::vector<unsigned char> px(std::size_t(w3) * h3 * c3);
    SplitMix64 gen(99);
    for (auto& v : px) v = static_cast<unsigned char>(gen.next_below(256));
    std::vector<unsigned char> raw3;
    for (int y = 0; y < h3; ++y) {
        raw3.push_back(4);
        for (int i = 0; i < w3 * c3; ++i) {
            const std::size_t at = std::size_t(y) * w3 * c3 + i;
            const int cur = px[at];
            const int a = i >= c3 ? px[at - c3] : 0;
            const int b = y > 0 ? px[at - std::size_t(w3) * c3] : 0;
            const int cc = (y > 0 && i >= c3) ? px[at - std::size_t(w3) * c3 - c3] : 0;
            raw3.push_back(static_cast<unsigned char>((cur - paeth_ref(a, b, cc)) & 0xff));
        }
    }
    const std::string path3 = tmp_path("paeth.png");
    write_bytes(path3, build_png(w3, h3, 8, 2, raw3));
    const Tensor img3 = read_png(path3);
    REQUIRE(img3.shape == std::vector<int>{h3, w3, c3});
    for (std::size_t i = 0; i < px.size(); ++i) CHECK(img3.v[i] == px[i] / 255.0);
}

TEST_CASE("png reader rejects what it cannot represent") {
    const std::string path = tmp_path("bad.png");

    SUBCASE("not a png") {
        write_bytes(path, {'J', 'P', 'E', 'G', 0, 0, 0, 0, 1, 2, 3});
        CHECK_THROWS_AS(read_png(path), FormatError);
    }
    SUBCASE("16-bit depth") {
        write_bytes(path, build_png(2, 1, 16, 0, {0, 0, 1, 0, 2}));
        CHECK_THROWS_WITH_AS(read_png(path), doctest::Contains("bit depth"), FormatError);
    }
    SUBCASE("palette color type") {
        write_bytes(path, build_png(2, 1, 8, 3, {0, 1, 2}));
        CHECK_THROWS_WITH_AS(read_png(path), doctest::Contains("color type"), FormatError);
    }
    SUBCASE("pixel payload shorter than promised") {
        // 4x4 header over a 2x1 scanline payload
        write_bytes(path, build_png(4, 4, 8, 0, {0, 10, 20}));
        CHECK_THROWS_AS(read_png(path), FormatError);
    }
    SUBCASE("chunk overruns file") {
        std::vector<unsigned char> bytes = build_png(2, 1, 8, 0, {0, 10, 20});
        // keep the IDAT length+type readable but cut off most of its payload
        bytes.resize(8 + 25 + 8 + 2);
        write_bytes(path, bytes);
        CHECK_THROWS_WITH_AS(read_png(path), doctest::Contains("overruns"), FormatError);
    }
    SUBCASE("corrupt IDAT stream") {
        std::vector<unsigned char> bytes = build_png(2, 1, 8, 0, {0, 10, 20});
        // flip a byte inside the IDAT payload (signature 8 + IHDR 25 + len 4 + tag 4 + 2)
        bytes[8 + 25 + 8 + 2] ^= 0xff;
        write_bytes(path, bytes);
        CHECK_THROWS_AS(read_png(path), FormatError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_png(tmp_path("nope.png")), FormatError); }
    SUBCASE("bad tensor shapes for the writer") {
        CHECK_THROWS_AS(write_png(path, Tensor({4, 4})), ValidationError);
        CHECK_THROWS_AS(write_png(path, Tensor({4, 4, 2})), ValidationError);
    }
}

TEST_CASE("pnm roundtrip and header parsing") {
    for (int c : {1, 3}) {
        const Tensor img = random_image(7, 5, c, 0x55ull + std::uint64_t(c));
        const std::string path = tmp_path(c == 1 ? "gray.pgm" : "color.ppm");
        write_pnm(path, img);
        const Tensor back = read_pnm(path);
        REQUIRE(back.shape == img.shape);
        for (std::size_t i = 0; i < img.v.size(); ++i)
            CHECK(back.v[i] == quantize(img.v[i]) / 255.0);

        // read_image dispatches on extension
        const Tensor again = read_image(path);
        CHECK(again.v == back.v);
    }

    // comments and generous whitespace are legal between header fields
    const std::string path = tmp_path("comments.pgm");
    const std::string text = "P5 # magic\n# a comment line\n  2\t1 # dims\n255\n";
    std::vector<unsigned char> bytes(text.begin(), text.end());
    bytes.push_back(0);
    bytes.push_back(255);
    write_bytes(path, bytes);
    const Tensor img = read_pnm(path);
    REQUIRE(img.shape == std::vector<int>{1, 2, 1});
    CHECK(img.at(0, 0, 0) == 0.0);
    CHECK(img.at(0, 1, 0) == 1.0);

    SUBCASE("rejections") {
        const std::string bad = tmp_path("bad.pgm");
        write_bytes(bad, {'P', '2', '\n'}); // ASCII PGM is not handled
        CHECK_THROWS_AS(read_pnm(bad), FormatError);
        const std::string wide = "P5\n2 1\n65535\n";
        write_bytes(bad, std::vector<unsigned char>(wide.begin(), wide.end()));
        CHECK_THROWS_WITH_AS(read_pnm(bad), doctest::Contains("maxval"), FormatError);
        const std::string trunc = "P5\n4 4\n255\n12";
        write_bytes(bad, std::vector<unsigned char>(trunc.begin(), trunc.end()));
        CHECK_THROWS_WITH_AS(read_pnm(bad), doctest::Contains("truncated"), FormatError);
        CHECK_THROWS_AS(read_image(tmp_path("what.bmp")), ValidationError);
    }
}

TEST_CASE("sha1 matches published test vectors") {
    auto hex_of = [](const std::string& s) {
        return sha1_hex(reinterpret_cast<const unsigned char*>(s.data()), s.size());
    };
    CHECK(hex_of("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
    CHECK(hex_of("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
    CHECK(hex_of("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "84983e441c3bd26ebaae4aa1f95129e5e54670f1");
    // million-a vector crosses many block boundaries
    CHECK(hex_of(std::string(1000000, 'a')) == "34aa973cd4c4daa4f61eeb2bdbad27316534016f");
    // lengths straddling the 55/56-byte padding edge
    CHECK(hex_of(std::string(55, 'x')) != hex_of(std::string(56, 'x')));
}

TEST_CASE("content hash agrees with git blob ids") {
    // `git hash-object` of an empty file and of "hello\n" — fixed, well-known ids.
    CHECK(content_hash(std::string()) == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(content_hash(std::string("hello\n")) == "ce013625030ba8dba906f756967f9e9ca394464a");

    const std::string path = tmp_path("hashed.bin");
    write_bytes(path, {'h', 'e', 'l', 'l', 'o', '\n'});
    CHECK(file_hash(path) == "ce013625030ba8dba906f756967f9e9ca394464a");
    CHECK_THROWS_AS(file_hash(tmp_path("absent.bin")), FormatError);
}
