#pragma once

#include <cmath>
#include <cstdint>

#include "uatlab/errors.hpp"

namespace uatlab {

// Counter-based pseudo-random stream. The i-th output is a pure function of
// (seed, stream_id, i), so any draw sequence can be reproduced from the two
// identifiers alone and unrelated streams never interact. Derived substreams
// hash a child index into the stream id, which lets one root seed fan out
// into independent per-purpose, per-step, or per-sample streams.
class RngStream {
public:
    // Well-known stream ids used across the code base.
    static constexpr std::uint64_t kModelInit = 1;
    static constexpr std::uint64_t kDropout = 2;
    static constexpr std::uint64_t kBatchSampling = 3;
    static constexpr std::uint64_t kScheduler = 4;
    static constexpr std::uint64_t kReward = 5;
    static constexpr std::uint64_t kData = 6;

    RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : seed_(seed), stream_(stream_id), base_(derive_base(seed, stream_id)) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_; }

    std::uint64_t next_u64() noexcept {
        return mix64(base_ + (counter_++) * kGamma);
    }

    // Uniform double in [0,1) with 53 random bits.
    double next_unit() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes exactly two draws.
    double next_gaussian() noexcept {
        const double u1 = 1.0 - next_unit();  // (0,1], keeps log finite
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // Unbiased integer in [0, n) via rejection sampling.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) {
            throw ContractError("RngStream::next_below: n must be positive");
        }
        const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) {
                return r % n;
            }
        }
    }

    // Independent stream derived from this stream's identity (not its
    // position): substream(k) is reproducible no matter how many draws the
    // parent has made.
    RngStream substream(std::uint64_t child) const noexcept {
        return RngStream(seed_, mix64(stream_ ^ mix64(child + 0x5851f42d4c957f2dULL)));
    }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
    static constexpr double kPi = 3.14159265358979323846;

    // splitmix64 finalizer; full-avalanche mix of a 64-bit word.
    static std::uint64_t mix64(std::uint64_t z) noexcept {
        z += kGamma;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive_base(std::uint64_t seed, std::uint64_t stream) noexcept {
        return mix64(mix64(seed) ^ (stream * 0xda3e39cb94b95bdbULL));
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

}  // namespace uatlab
