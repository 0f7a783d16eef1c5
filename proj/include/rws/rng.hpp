#pragma once

#include <cstdint>

namespace rws {

// Counter-based stream: every (key, counter) pair maps to the same
// uniform on every platform, so windows and walks can be regenerated
// lazily and in parallel without coordination.
class Rng {
  public:
    explicit Rng(std::uint64_t key) : state_(mix(key)) {}
    Rng(std::uint64_t seed, std::uint64_t stream)
        : state_(mix(mix(seed) ^ mix(stream * 0x9e3779b97f4a7c15ULL + 1))) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // uniform in [0, 1), 53 mantissa bits
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // strictly positive uniform, safe under log()
    double next_double_pos() {
        double u;
        do { u = next_double(); } while (u <= 0.0);
        return u;
    }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

  private:
    std::uint64_t state_;
};

// Stream for the environment layer at index n (n may be negative).
inline Rng layer_rng(std::uint64_t seed, long long n) {
    return Rng(seed, static_cast<std::uint64_t>(n) * 4ULL + 0ULL);
}

// Stream for the 1D environment site at x (used by the 1D lift so a
// site keeps its vector no matter which layer window requests it).
inline Rng site_rng(std::uint64_t seed, long long x) {
    return Rng(seed, static_cast<std::uint64_t>(x) * 4ULL + 1ULL);
}

// Stream for walk number `walk_id` under environment seed `seed`.
inline Rng walk_rng(std::uint64_t seed, std::uint64_t walk_id) {
    return Rng(seed, walk_id * 4ULL + 2ULL);
}

}  // namespace rws
