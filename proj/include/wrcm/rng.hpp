#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

// Counter-based randomness (Philox4x64-10). Every stream is addressed by a
// 128-bit key derived from (master_seed, replication_index, purpose), so
// identical seeds reproduce identical sequences regardless of thread
// scheduling, and per-pair edge decisions can be re-derived from the point
// ids alone.

namespace wrcm {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

struct PhiloxKey {
    std::uint64_t k0 = 0;
    std::uint64_t k1 = 0;
};

using PhiloxBlock = std::array<std::uint64_t, 4>;

namespace detail {

inline void mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
}

} // namespace detail

// One 10-round Philox4x64 block. Verified against the numpy Philox bit
// generator (see tests for frozen vectors).
inline PhiloxBlock philox4x64(PhiloxBlock ctr, PhiloxKey key) {
    constexpr std::uint64_t m0 = 0xd2e7470ee14c6c93ull;
    constexpr std::uint64_t m1 = 0xca5a826395121157ull;
    constexpr std::uint64_t w0 = 0x9e3779b97f4a7c15ull;
    constexpr std::uint64_t w1 = 0xbb67ae8584caa73bull;
    for (int round = 0; round < 10; ++round) {
        std::uint64_t hi0, lo0, hi1, lo1;
        detail::mulhilo64(m0, ctr[0], hi0, lo0);
        detail::mulhilo64(m1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key.k0, lo1, hi0 ^ ctr[3] ^ key.k1, lo0};
        key.k0 += w0;
        key.k1 += w1;
    }
    return ctr;
}

enum class StreamPurpose : std::uint64_t {
    Positions = 1,
    Weights = 2,
    Edges = 3,
};

struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t replication_index = 0;
    StreamPurpose purpose = StreamPurpose::Positions;
};

inline PhiloxKey derive_key(const SeedSpec& seed) {
    const std::uint64_t h0 = splitmix64(seed.master_seed);
    const std::uint64_t h1 = splitmix64(h0 ^ splitmix64(seed.replication_index + 0x517cc1b727220a95ull));
    const std::uint64_t h2 = splitmix64(h1 ^ (static_cast<std::uint64_t>(seed.purpose) * 0xda942042e4dd58b5ull));
    return {h1, h2};
}

// Sequential stream over consecutive Philox blocks of one key.
class RandomStream {
  public:
    explicit RandomStream(PhiloxKey key) : key_(key) {}
    explicit RandomStream(const SeedSpec& seed) : RandomStream(derive_key(seed)) {}

    std::uint64_t next_u64() {
        if (pos_ == 4) {
            buf_ = philox4x64({block_, 0, 0, 0}, key_);
            ++block_;
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    // 53-bit uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in the open interval (0, 1); used for quantile inversion where
    // both endpoints are outside the CDF domain.
    double next_open_double() {
        return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    }

  private:
    PhiloxKey key_;
    std::uint64_t block_ = 0;
    PhiloxBlock buf_{};
    int pos_ = 4;
};

inline RandomStream derive_stream(const SeedSpec& seed) { return RandomStream(seed); }

// Uniform for an unordered point pair. Symmetric in (id_a, id_b) and
// independent of any stream state, so edge decisions are identical no matter
// which worker or in which order they are evaluated.
inline double pair_uniform(PhiloxKey edge_key, std::uint64_t id_a, std::uint64_t id_b) {
    const std::uint64_t lo = id_a < id_b ? id_a : id_b;
    const std::uint64_t hi = id_a < id_b ? id_b : id_a;
    const PhiloxBlock out = philox4x64({lo, hi, 0x70414952ull, 0}, edge_key);
    return static_cast<double>(out[0] >> 11) * 0x1.0p-53;
}

// Exact Poisson sampling: product-of-uniforms for small means, Hormann's
// transformed rejection (PTRD) for large ones.
inline std::uint64_t sample_poisson(RandomStream& stream, double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 10.0) {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = stream.next_double();
        while (prod > limit) {
            ++k;
            prod *= stream.next_double();
        }
        return k;
    }
    const double smu = std::sqrt(mean);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        double u = stream.next_double() - 0.5;
        double v = stream.next_double();
        const double us = 0.5 - std::abs(u);
        const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
        const double rhs = kf * std::log(mean) - mean - std::lgamma(kf + 1.0);
        if (lhs <= rhs) return static_cast<std::uint64_t>(kf);
    }
}

} // namespace wrcm
