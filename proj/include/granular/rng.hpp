#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

// Counter-based random numbers. Every draw is a pure function of
// (seed, purpose, step, counter), so particle loops can be evaluated in any
// order, or in parallel, and still produce the sequence of the sequential
// reference run.

namespace granular::rng {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Purpose tags keep the substreams of one step disjoint.
enum class Purpose : std::uint64_t {
    init = 1,
    collision = 2,
    forcing = 3,
    bootstrap = 4,
    verify = 5,
};

class Stream {
public:
    Stream(std::uint64_t seed, Purpose purpose, std::uint64_t step)
        : base_(mix64(mix64(mix64(seed) + static_cast<std::uint64_t>(purpose)) +
                      step)) {}

    std::uint64_t word(std::uint64_t counter) const {
        return mix64(base_ + counter * 0x9E3779B97F4A7C15ull);
    }

    // uniform in [0, 1)
    double uniform(std::uint64_t counter) const {
        return static_cast<double>(word(counter) >> 11) * 0x1.0p-53;
    }

    // uniform in (0, 1], safe as a log argument
    double uniform_pos(std::uint64_t counter) const {
        return static_cast<double>((word(counter) >> 11) + 1) * 0x1.0p-53;
    }

private:
    std::uint64_t base_;
};

// Box-Muller transform; u1 must lie in (0, 1].
inline std::pair<double, double> normal_pair(double u1, double u2) {
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(th), r * std::sin(th)};
}

} // namespace granular::rng
