#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace qsr {

// Counter-based generator (splitmix64). All randomness in the project flows
// through this so that runs are bitwise reproducible across platforms; the
// std:: distributions are implementation-defined and must not be used.
class SplitMix64 {
  public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Unbiased uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Normal(0, std) re-drawn until within 2 std, the usual truncated init.
    double truncated_normal(double std_dev) {
        for (;;) {
            double z = normal();
            if (std::fabs(z) <= 2.0) return z * std_dev;
        }
    }

  private:
    uint64_t state_;
};

// Fisher-Yates permutation of 0..n-1.
inline std::vector<size_t> permutation(size_t n, SplitMix64& gen) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = n; i > 1; --i) {
        size_t j = size_t(gen.next_below(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

} // namespace qsr
