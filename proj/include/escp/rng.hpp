#pragma once

#include <cmath>
#include <cstdint>

namespace escp {

namespace detail {

// SplitMix64 finalizer, used to spread seeds and stream ids.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Counter-style PCG64 (XSL-RR) generator keyed by (seed, stream).  Distinct
// streams select distinct odd increments, so trials can draw from their own
// stream and stay reproducible no matter what order they run in.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {
        const u128 inc_hi = detail::mix64(stream ^ 0xda3e39cb94b95bdbULL);
        const u128 inc_lo = detail::mix64(stream + 0x5851f42d4c957f2dULL);
        inc_ = ((inc_hi << 64) | inc_lo) | 1u;
        const u128 st_hi = detail::mix64(seed);
        const u128 st_lo = detail::mix64(seed ^ 0x9e3779b97f4a7c15ULL);
        state_ = 0;
        step();
        state_ += (st_hi << 64) | st_lo;
        step();
    }

    std::uint64_t next_u64() {
        step();
        const std::uint64_t xored =
            static_cast<std::uint64_t>(state_ >> 64) ^ static_cast<std::uint64_t>(state_);
        const unsigned rot = static_cast<unsigned>(state_ >> 122);
        return (xored >> rot) | (xored << ((-rot) & 63u));
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), unbiased (rejection).
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Marsaglia polar method (spare value cached).
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    // Exponential with rate lambda (> 0).
    double next_exponential(double lambda) {
        double u;
        do {
            u = next_double();
        } while (u <= 0.0);
        return -std::log(u) / lambda;
    }

    // A child stream derived deterministically from this stream's identity.
    RngStream substream(std::uint64_t id) const {
        return RngStream(seed_, detail::mix64(stream_ ^ detail::mix64(id)));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

  private:
    using u128 = unsigned __int128;
    static constexpr std::uint64_t kMultHi = 0x2360ed051fc65da4ULL;
    static constexpr std::uint64_t kMultLo = 0x4385df649fccf645ULL;

    void step() {
        const u128 mult = (u128(kMultHi) << 64) | kMultLo;
        state_ = state_ * mult + inc_;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    u128 state_ = 0;
    u128 inc_ = 1;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace escp
