#pragma once

// Counter-based random streams (Philox4x32-10). A stream is addressed by
// (master_seed, sample_index, slot); draws within a stream are addressed by
// position. No state is carried, so any thread may evaluate any draw and the
// aggregate output of a parallel computation cannot depend on scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace stagecut::rng {

enum class Slot : std::uint32_t {
    data_index = 0,
    noise_vector = 1,
    time_a = 2,
    time_b = 3,
};

struct StreamKey {
    std::uint64_t master_seed = 0;
    std::uint64_t sample_index = 0;
    Slot slot = Slot::data_index;
};

namespace detail {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    for (int round = 0;; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(0xD2511F53u, ctr[0], hi0, lo0);
        mulhilo(0xCD9E8D57u, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        if (round == 9) break;
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
    }
    return ctr;
}

// Two 64-bit words per block: word j of block b in the stream named by `key`.
inline std::uint64_t word64(const StreamKey& key, std::uint32_t block, unsigned j) {
    const std::array<std::uint32_t, 4> ctr = {
        block,
        static_cast<std::uint32_t>(key.slot),
        static_cast<std::uint32_t>(key.sample_index),
        static_cast<std::uint32_t>(key.sample_index >> 32),
    };
    const std::array<std::uint32_t, 2> k = {
        static_cast<std::uint32_t>(key.master_seed),
        static_cast<std::uint32_t>(key.master_seed >> 32),
    };
    const auto out = philox4x32_10(ctr, k);
    return j == 0 ? (static_cast<std::uint64_t>(out[0]) << 32) | out[1]
                  : (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
}

inline double to_unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1p-53; }

} // namespace detail

// i-th uniform draw of the stream, in [0,1).
inline double uniform_at(const StreamKey& key, std::uint64_t i) {
    return detail::to_unit(detail::word64(key, static_cast<std::uint32_t>(i >> 1), i & 1));
}

inline std::vector<double> uniform(const StreamKey& key, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = uniform_at(key, i);
    return out;
}

// Uniform integer in [0, n): floor(u * n).
inline std::size_t uniform_index(const StreamKey& key, std::uint64_t i, std::size_t n) {
    auto v = static_cast<std::size_t>(uniform_at(key, i) * static_cast<double>(n));
    return v < n ? v : n - 1;
}

// i-th standard normal of the stream. Box-Muller on one Philox block per pair;
// u1 is shifted into (0,1] so the log never sees zero.
inline double standard_normal_at(const StreamKey& key, std::uint64_t i) {
    const auto block = static_cast<std::uint32_t>(i >> 1);
    const double u1 =
        static_cast<double>((detail::word64(key, block, 0) >> 11) + 1) * 0x1p-53;
    const double u2 = detail::to_unit(detail::word64(key, block, 1));
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return (i & 1) ? r * std::sin(a) : r * std::cos(a);
}

inline std::vector<double> standard_normal(const StreamKey& key, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = standard_normal_at(key, i);
    return out;
}

} // namespace stagecut::rng
