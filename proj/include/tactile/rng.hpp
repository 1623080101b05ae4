#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace tactile {

/// Seeded generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The std distributions are not (their algorithms are
/// implementation-defined), so uniform and Gaussian draws are derived here
/// from raw engine bits: 53-bit uniforms and the Box-Muller transform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t bits() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace tactile
