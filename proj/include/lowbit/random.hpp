#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lowbit {

/// Seeded random stream. Draws are derived from the raw 64-bit engine output
/// rather than std distributions so results are identical across standard
/// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : m_engine(seed) {}

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(m_engine() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (one draw per call, the pair's twin is discarded).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer on [0, n).
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

    /// Independent child stream, e.g. one per worker or per experiment arm.
    Rng split() { return Rng(m_engine() ^ 0x9e3779b97f4a7c15ULL); }

    std::uint64_t next_u64() { return m_engine(); }

private:
    std::mt19937_64 m_engine;
};

} // namespace lowbit
