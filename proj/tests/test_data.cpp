#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>

#include "qsr/data/dataset.hpp"
#include "qsr/error.hpp"
#include "qsr/rng.hpp"

using namespace qsr;
using namespace qsr::data;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("qsr_data_test_" + name);
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    REQUIRE(bool(out));
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
    for (int i = 3; i >= 0; --i) v.push_back((x >> (8 * i)) & 0xff);
}

Tensor random_bytes_stack(std::vector<int> shape, SplitMix64& gen) {
    Tensor t(std::move(shape));
    for (double& v : t.v) v = double(gen.next_below(256));
    return t;
}

} // namespace

TEST_CASE("idx load parses the big-endian header and payload") {
    // hand-built file: magic 0x00000803, dims (2, 28, 28), 1568 payload bytes
    std::vector<unsigned char> file;
    push_be32(file, 0x00000803);
    push_be32(file, 2);
    push_be32(file, 28);
    push_be32(file, 28);
    SplitMix64 gen(11);
    for (int i = 0; i < 2 * 28 * 28; ++i) file.push_back((unsigned char)gen.next_below(256));
    const auto path = tmp_path("hand.idx");
    write_bytes(path, file);

    const Tensor stack = load_idx(path.string());
    REQUIRE(stack.shape == std::vector<int>{2, 28, 28});
    for (std::size_t i = 0; i < stack.v.size(); ++i) CHECK(stack.v[i] == double(file[16 + i]));

    SUBCASE("two loads of the same file are bitwise identical") {
        const Tensor again = load_idx(path.string());
        CHECK(again.shape == stack.shape);
        CHECK(again.v == stack.v);
    }
    SUBCASE("write_idx(load_idx(f)) reproduces f byte-exactly") {
        const auto copy = tmp_path("hand_copy.idx");
        write_idx(copy.string(), stack);
        CHECK(read_bytes(copy) == file);
    }
}

TEST_CASE("idx rejects wrong magic and truncation with format errors") {
    std::vector<unsigned char> labels; // 0x801 is the label-file magic, not images
    push_be32(labels, 0x00000801);
    push_be32(labels, 2);
    labels.push_back(7);
    labels.push_back(3);
    const auto lp = tmp_path("labels.idx");
    write_bytes(lp, labels);
    CHECK_THROWS_AS(load_idx(lp.string()), FormatError);

    std::vector<unsigned char> cut;
    push_be32(cut, 0x00000803);
    push_be32(cut, 1);
    push_be32(cut, 4);
    push_be32(cut, 4);
    for (int i = 0; i < 9; ++i) cut.push_back(0); // promises 16 bytes, ships 9
    const auto cp = tmp_path("cut.idx");
    write_bytes(cp, cut);
    CHECK_THROWS_AS(load_idx(cp.string()), FormatError);

    const auto tp = tmp_path("tiny.idx");
    write_bytes(tp, {0x00, 0x00});
    CHECK_THROWS_AS(load_idx(tp.string()), FormatError);

    CHECK_THROWS_AS(load_idx(tmp_path("does_not_exist.idx").string()), FormatError);
}

TEST_CASE("raw-tensor files roundtrip and reject foreign blobs") {
    SplitMix64 gen(23);
    const Tensor stack = random_bytes_stack({3, 8, 6, 2}, gen);
    const auto path = tmp_path("stack.qsrt");
    write_qsrt(path.string(), stack);

    const Tensor back = load_qsrt(path.string());
    CHECK(back.shape == stack.shape);
    CHECK(back.v == stack.v);

    SUBCASE("write-load-write is byte stable") {
        const auto copy = tmp_path("stack_copy.qsrt");
        write_qsrt(copy.string(), back);
        CHECK(read_bytes(copy) == read_bytes(path));
    }
    SUBCASE("idx files are not raw-tensor files") {
        std::vector<unsigned char> idx;
        push_be32(idx, 0x00000803);
        push_be32(idx, 1);
        push_be32(idx, 2);
        push_be32(idx, 2);
        for (int i = 0; i < 4; ++i) idx.push_back(0);
        const auto ip = tmp_path("notqsrt.bin");
        write_bytes(ip, idx);
        CHECK_THROWS_AS(load_qsrt(ip.string()), FormatError);
    }
    SUBCASE("header length beyond the file is a format error") {
        std::vector<unsigned char> bad = {'Q', 'S', 'R', 'T', 0xff, 0x00, 0x00, 0x00, '{', '}'};
        const auto bp = tmp_path("badlen.qsrt");
        write_bytes(bp, bad);
        CHECK_THROWS_AS(load_qsrt(bp.string()), FormatError);
    }
}

TEST_CASE("downsample2 is the 2x2 box mean") {
    SUBCASE("constant image stays constant") {
        Tensor x({6, 4, 2});
        for (double& v : x.v) v = 0.37;
        const Tensor y = downsample2(x);
        REQUIRE(y.shape == std::vector<int>{3, 2, 2});
        for (double v : y.v) CHECK(v == 0.37);
    }
    SUBCASE("block (0,0,1,1) averages to 0.5") {
        Tensor x({2, 2, 1});
        x.at(0, 0, 0) = 0.0;
        x.at(0, 1, 0) = 0.0;
        x.at(1, 0, 0) = 1.0;
        x.at(1, 1, 0) = 1.0;
        const Tensor y = downsample2(x);
        REQUIRE(y.shape == std::vector<int>{1, 1, 1});
        CHECK(y.v[0] == 0.5);
    }
    SUBCASE("random 28x28 matches the naive oracle") {
        SplitMix64 gen(5);
        Tensor x({28, 28, 3});
        for (double& v : x.v) v = gen.uniform(0.0, 1.0);
        const Tensor y = downsample2(x);
        for (int i = 0; i < 14; ++i)
            for (int j = 0; j < 14; ++j)
                for (int c = 0; c < 3; ++c) {
                    double sum = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) sum += x.at(2 * i + dy, 2 * j + dx, c);
                    CHECK(std::abs(y.at(i, j, c) - sum / 4.0) <= 1e-15);
                }
    }
    SUBCASE("odd dims are rejected") {
        CHECK_THROWS_AS(downsample2(Tensor({5, 4, 1})), ValidationError);
        CHECK_THROWS_AS(downsample2(Tensor({4, 7, 1})), ValidationError);
        CHECK_THROWS_AS(downsample2(Tensor({4, 4})), ValidationError);
    }
}

TEST_CASE("make_pairs normalizes, downsamples and preserves order") {
    SplitMix64 gen(42);
    const Tensor stack = random_bytes_stack({5, 28, 28}, gen);
    const DatasetHandle ds = make_pairs(stack, "toy");

    CHECK(ds.name == "toy");
    CHECK(ds.channels == 1);
    REQUIRE(ds.items.size() == 5);
    for (int i = 0; i < 5; ++i) {
        const ImagePair& p = ds.items[size_t(i)];
        CHECK(p.source_index == i);
        REQUIRE(p.hr.shape == std::vector<int>{28, 28, 1});
        REQUIRE(p.lr.shape == std::vector<int>{14, 14, 1});
        // hr is the source slice over 255, lr is exactly downsample2(hr)
        for (int y = 0; y < 28; ++y)
            for (int x = 0; x < 28; ++x) CHECK(p.hr.at(y, x, 0) == stack.at(i, y, x) / 255.0);
        const Tensor lr_again = downsample2(p.hr);
        CHECK(p.lr.v == lr_again.v);
        for (double v : p.hr.v) CHECK((v >= 0.0 && v <= 1.0));
        for (double v : p.lr.v) CHECK((v >= 0.0 && v <= 1.0));
    }

    SUBCASE("all-zero and all-255 images hit the range endpoints") {
        Tensor flat({2, 4, 4});
        for (int k = 0; k < 16; ++k) flat.v[16 + std::size_t(k)] = 255.0;
        const DatasetHandle d2 = make_pairs(flat, "flat");
        for (double v : d2.items[0].hr.v) CHECK(v == 0.0);
        for (double v : d2.items[0].lr.v) CHECK(v == 0.0);
        for (double v : d2.items[1].hr.v) CHECK(v == 1.0);
        for (double v : d2.items[1].lr.v) CHECK(v == 1.0);
    }
    SUBCASE("multi-channel stacks keep their channel count") {
        const Tensor rgb = random_bytes_stack({2, 8, 8, 3}, gen);
        const DatasetHandle d3 = make_pairs(rgb, "rgb");
        CHECK(d3.channels == 3);
        CHECK(d3.items[0].hr.shape == std::vector<int>{8, 8, 3});
        CHECK(d3.items[0].lr.shape == std::vector<int>{4, 4, 3});
    }
    SUBCASE("wrong rank is rejected") {
        CHECK_THROWS_AS(make_pairs(Tensor({4, 4}), "flat2d"), ValidationError);
    }
}

TEST_CASE("split_dataset is a deterministic prefix partition") {
    SplitMix64 gen(7);
    const DatasetHandle ds = make_pairs(random_bytes_stack({6, 4, 4}, gen), "toy");
    const auto [train, test] = split_dataset(ds, 4);
    CHECK(train.split == Split::train);
    CHECK(test.split == Split::test);
    REQUIRE(train.items.size() == 4);
    REQUIRE(test.items.size() == 2);
    for (int i = 0; i < 4; ++i) CHECK(train.items[size_t(i)].source_index == i);
    for (int i = 0; i < 2; ++i) CHECK(test.items[size_t(i)].source_index == 4 + i);
    CHECK_THROWS_AS(split_dataset(ds, 7), ValidationError);
    CHECK_THROWS_AS(split_dataset(ds, -1), ValidationError);
}

TEST_CASE("batches permute once per epoch and keep the tail") {
    SUBCASE("batch_size >= len gives a single permuted batch") {
        const auto bs = batches(6, 10, 99, 0);
        REQUIRE(bs.size() == 1);
        std::vector<int> sorted = bs[0];
        std::sort(sorted.begin(), sorted.end());
        std::vector<int> iota(6);
        std::iota(iota.begin(), iota.end(), 0);
        CHECK(sorted == iota);
    }
    SUBCASE("same seed and epoch reproduce the same order") {
        CHECK(batches(100, 7, 1234, 3) == batches(100, 7, 1234, 3));
    }
    SUBCASE("epochs and seeds reshuffle") {
        CHECK(batches(100, 7, 1234, 3) != batches(100, 7, 1234, 4));
        CHECK(batches(100, 7, 1234, 3) != batches(100, 7, 77, 3));
    }
    SUBCASE("union of all batches is the full index set") {
        const auto bs = batches(10, 4, 5, 2);
        REQUIRE(bs.size() == 3);
        CHECK(bs[0].size() == 4);
        CHECK(bs[1].size() == 4);
        CHECK(bs[2].size() == 2); // partial tail kept
        std::set<int> seen;
        for (const auto& b : bs) seen.insert(b.begin(), b.end());
        CHECK(seen.size() == 10);
        CHECK(*seen.begin() == 0);
        CHECK(*seen.rbegin() == 9);
    }
    SUBCASE("bad arguments are rejected") {
        CHECK_THROWS_AS(batches(10, 0, 1, 0), ValidationError);
        CHECK_THROWS_AS(batches(-1, 4, 1, 0), ValidationError);
    }
}

TEST_CASE("stroke-glyph corpus is deterministic and byte-ranged") {
    const Tensor a = synth_glyphs(8, 28, 28, 77);
    const Tensor b = synth_glyphs(8, 28, 28, 77);
    REQUIRE(a.shape == std::vector<int>{8, 28, 28});
    CHECK(a.v == b.v);

    const Tensor c = synth_glyphs(8, 28, 28, 78);
    CHECK(a.v != c.v);

    double total = 0;
    for (double v : a.v) {
        CHECK(v == std::floor(v));
        CHECK((v >= 0.0 && v <= 255.0));
        total += v;
    }
    // strokes cover a visible fraction of the field without washing it out
    const double mean = total / double(a.v.size());
    CHECK(mean > 2.0);
    CHECK(mean < 160.0);

    SUBCASE("images differ from one another") {
        const std::size_t px = 28 * 28;
        bool any_diff = false;
        for (std::size_t i = 0; i < px; ++i) any_diff |= (a.v[i] != a.v[px + i]);
        CHECK(any_diff);
    }
    SUBCASE("the corpus feeds straight into pair construction") {
        const DatasetHandle ds = make_pairs(a, "glyphs");
        CHECK(ds.items.size() == 8);
        CHECK(ds.items[0].lr.shape == std::vector<int>{14, 14, 1});
    }
    SUBCASE("degenerate sizes are rejected") {
        CHECK_THROWS_AS(synth_glyphs(0, 28, 28, 1), ValidationError);
        CHECK_THROWS_AS(synth_glyphs(1, 2, 28, 1), ValidationError);
    }
}
