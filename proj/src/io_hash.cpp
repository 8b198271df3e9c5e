#include "qsr/io/hash.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "qsr/error.hpp"

namespace qsr::io {

namespace {

std::uint32_t rotl(std::uint32_t v, int n) { return (v << n) | (v >> (32 - n)); }

// Straight implementation of the FIPS 180 SHA-1 compression function.
struct Sha1 {
    std::uint32_t h[5] = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u, 0xc3d2e1f0u};
    unsigned char block[64];
    std::size_t fill = 0;
    std::uint64_t total = 0;

    void compress(const unsigned char* p) {
        std::uint32_t w[80];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
                   (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
        for (int i = 16; i < 80; ++i)
            w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20)      { f = (b & c) | (~b & d);          k = 0x5a827999u; }
            else if (i < 40) { f = b ^ c ^ d;                   k = 0x6ed9eba1u; }
            else if (i < 60) { f = (b & c) | (b & d) | (c & d); k = 0x8f1bbcdcu; }
            else             { f = b ^ c ^ d;                   k = 0xca62c1d6u; }
            const std::uint32_t t = rotl(a, 5) + f + e + k + w[i];
            e = d; d = c; c = rotl(b, 30); b = a; a = t;
        }
        h[0] += a; h[1] += b; h[2] += c; h[3] += d; h[4] += e;
    }

    void update(const unsigned char* data, std::size_t size) {
        total += size;
        while (size > 0) {
            const std::size_t take = std::min(size, std::size_t(64) - fill);
            std::memcpy(block + fill, data, take);
            fill += take;
            data += take;
            size -= take;
            if (fill == 64) {
                compress(block);
                fill = 0;
            }
        }
    }

    std::string finish() {
        const std::uint64_t bits = total * 8;
        const unsigned char pad = 0x80;
        update(&pad, 1);
        const unsigned char zero = 0;
        while (fill != 56) update(&zero, 1);
        unsigned char len[8];
        for (int i = 0; i < 8; ++i) len[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
        // update() would re-count the length bytes; feed them directly.
        std::memcpy(block + 56, len, 8);
        compress(block);

        char hex[41];
        for (int i = 0; i < 5; ++i) std::snprintf(hex + 8 * i, 9, "%08x", h[i]);
        return std::string(hex, 40);
    }
};

} // namespace

std::string sha1_hex(const unsigned char* data, std::size_t size) {
    Sha1 s;
    s.update(data, size);
    return s.finish();
}

std::string content_hash(const std::vector<unsigned char>& bytes) {
    char header[32];
    const int n = std::snprintf(header, sizeof header, "blob %zu", bytes.size());
    Sha1 s;
    s.update(reinterpret_cast<const unsigned char*>(header), std::size_t(n) + 1); // includes NUL
    s.update(bytes.data(), bytes.size());
    return s.finish();
}

std::string content_hash(const std::string& text) {
    return content_hash(std::vector<unsigned char>(text.begin(), text.end()));
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>()};
    return content_hash(bytes);
}

} // namespace qsr::io
