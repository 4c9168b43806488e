#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace onebit {

/**
 * Philox4x32-10 counter-based generator.
 *
 * The key is the 64-bit seed; the upper half of the 128-bit counter holds a
 * stream id so that independent streams (phases, noise, sweep points) can be
 * drawn from one seed without coordination. Output order is fixed, which is
 * what makes simulated scenarios bit-reproducible across platforms.
 */
class Philox4x32 {
public:
    using block_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    static constexpr std::string_view name = "philox4x32-10";

    Philox4x32(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_{stream}
    {}

    /// Raw bijection, exposed for known-answer testing.
    static block_type encrypt(block_type ctr, key_type key)
    {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

    std::uint32_t next_u32()
    {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64()
    {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    void refill()
    {
        const block_type ctr{static_cast<std::uint32_t>(counter_),
                             static_cast<std::uint32_t>(counter_ >> 32),
                             static_cast<std::uint32_t>(stream_),
                             static_cast<std::uint32_t>(stream_ >> 32)};
        buf_ = encrypt(ctr, key_);
        ++counter_;
        pos_ = 0;
    }

    key_type key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    block_type buf_{};
    int pos_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Fixed stream ids used by the simulators.
namespace streams {
inline constexpr std::uint64_t rfi_phase = 1;
inline constexpr std::uint64_t noise = 2;
inline constexpr std::uint64_t instance = 3;
} // namespace streams

} // namespace onebit
