#pragma once

#include <algorithm>
#include <cmath>

namespace tactile {

/// Contact wrench on the gel: shear (fx, fy) and normal fn in newtons,
/// torsion tau about the contact normal in newton-millimeters.
struct Wrench {
    double fx = 0.0;
    double fy = 0.0;
    double fn = 0.0;
    double tau = 0.0;

    friend constexpr Wrench operator+(const Wrench& a, const Wrench& b) noexcept {
        return {a.fx + b.fx, a.fy + b.fy, a.fn + b.fn, a.tau + b.tau};
    }
    friend constexpr Wrench operator*(double s, const Wrench& a) noexcept {
        return {s * a.fx, s * a.fy, s * a.fn, s * a.tau};
    }
    friend constexpr bool operator==(const Wrench&, const Wrench&) = default;

    bool finite() const noexcept {
        return std::isfinite(fx) && std::isfinite(fy) && std::isfinite(fn) && std::isfinite(tau);
    }
};

/// Total force: Euclidean norm of the three force axes. Torsion is excluded
/// and a negative normal component counts as zero.
inline double total_force(const Wrench& w) noexcept {
    const double fn = std::max(w.fn, 0.0);
    return std::sqrt(w.fx * w.fx + w.fy * w.fy + fn * fn);
}

}  // namespace tactile
