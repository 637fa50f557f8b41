#pragma once

#include <cstdint>
#include <string_view>

namespace physmg::rng {

// 64-bit finalizer (splitmix64). Statistically strong enough for Monte Carlo
// work here and, crucially, stateless: the same (key, counter) pair always
// yields the same value regardless of thread scheduling.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a hash of a purpose tag, so streams for different purposes never
// collide even under the same root seed.
constexpr std::uint64_t tag(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Counter-based stream keyed by (root seed, purpose tag, item index).
// Consuming k values advances an internal counter; two streams with the same
// key always produce the same sequence.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0)
        : key_(mix64(mix64(seed) ^ mix64(purpose * 0xd1342543de82ef95ULL) ^
                     mix64(index * 0xaf251af3b0f025b5ULL))) {}

    std::uint64_t next_u64() { return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    // Uniform in [0, 1): 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0, 1), never returning an exact endpoint (safe for ppf).
    double next_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_normal();  // inverse-CDF method, one uniform per draw

    std::uint64_t draws() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace physmg::rng
