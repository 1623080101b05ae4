#pragma once

// Forward model of a dot-matrix gel: a linear map from contact wrench to
// marker displacement, plus a renderer producing the grayscale image a
// camera under the gel would see.
//
//   d_i = k_s (fx, fy) + k_n fn (p_i - c) / R + k_t tau perp(p_i - c) / R + jitter
//
// c is the centroid of the rest grid and R half its diagonal, so the radial
// and torsion terms sum to zero over the grid and the mean displacement is
// the shear term alone.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tactile/error.hpp"
#include "tactile/geometry.hpp"
#include "tactile/image.hpp"
#include "tactile/rng.hpp"
#include "tactile/wrench.hpp"

namespace tactile {

struct GelConfig {
    int rows = 7;
    int cols = 9;
    int image_width = 320;
    int image_height = 240;
    double margin = 30.0;
    double dot_radius = 4.0;
    double dot_contrast = 0.8;
    double k_s = 2.0;    // px / N
    double k_n = 1.5;    // px / N
    double k_t = 0.05;   // px / (N mm)
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    std::size_t marker_count() const noexcept {
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }
};

inline void validate(const GelConfig& c) {
    auto fail = [](const std::string& why) { throw Error(Errc::invalid_config, why); };
    if (c.rows < 2 || c.cols < 2) fail("marker grid needs at least 2 rows and 2 columns");
    if (c.image_width <= 0 || c.image_height <= 0) fail("image dimensions must be positive");
    if (!(c.dot_radius > 0.0)) fail("dot_radius must be positive");
    if (!(c.dot_contrast > 0.0 && c.dot_contrast <= 1.0)) fail("dot_contrast must lie in (0, 1]");
    if (!(c.margin >= c.dot_radius)) fail("margin must be at least dot_radius");
    if (!(2.0 * c.margin < c.image_width) || !(2.0 * c.margin < c.image_height))
        fail("marker grid does not fit inside the image margins");
    if (!(c.k_s > 0.0 && c.k_n > 0.0 && c.k_t > 0.0)) fail("gel gains must be positive");
    if (!(c.noise_sigma >= 0.0) || !std::isfinite(c.noise_sigma)) fail("noise_sigma must be >= 0");
}

struct GelState {
    GelConfig config;
    std::vector<Vec2> rest_positions;
    std::vector<Vec2> current_positions;
    Wrench applied;
    Rng rng;

    /// Mean of the rest grid.
    Vec2 centroid() const noexcept {
        Vec2 c;
        for (const auto& p : rest_positions) c += p;
        return rest_positions.empty() ? c : (1.0 / static_cast<double>(rest_positions.size())) * c;
    }

    /// Half the diagonal of the rest grid.
    double radius_norm() const noexcept {
        return 0.5 * std::hypot(config.image_width - 2.0 * config.margin, config.image_height - 2.0 * config.margin);
    }

    std::vector<Vec2> displacements() const {
        std::vector<Vec2> d(rest_positions.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = current_positions[i] - rest_positions[i];
        return d;
    }
};

/// Rest grid in row-major order, corner markers on the margin lines.
inline std::vector<Vec2> rest_grid(const GelConfig& c) {
    std::vector<Vec2> grid;
    grid.reserve(c.marker_count());
    const double span_x = c.image_width - 2.0 * c.margin;
    const double span_y = c.image_height - 2.0 * c.margin;
    for (int r = 0; r < c.rows; ++r) {
        for (int k = 0; k < c.cols; ++k) {
            grid.push_back({c.margin + span_x * k / (c.cols - 1), c.margin + span_y * r / (c.rows - 1)});
        }
    }
    return grid;
}

inline GelState make_gel(const GelConfig& config) {
    validate(config);
    GelState s;
    s.config = config;
    s.rest_positions = rest_grid(config);
    s.current_positions = s.rest_positions;
    s.rng = Rng(config.seed);
    return s;
}

/// Noise-free displacement of one marker under a wrench.
inline Vec2 model_displacement(const GelConfig& c, Vec2 rest, Vec2 centroid, double radius_norm, const Wrench& w) {
    const Vec2 r = rest - centroid;
    return Vec2{c.k_s * w.fx, c.k_s * w.fy} + (c.k_n * w.fn / radius_norm) * r +
           (c.k_t * w.tau / radius_norm) * perp(r);
}

inline GelState apply_wrench(GelState state, const Wrench& w) {
    if (!w.finite()) throw Error(Errc::invalid_config, "wrench components must be finite");
    const Vec2 c = state.centroid();
    const double radius = state.radius_norm();
    const double sigma = state.config.noise_sigma;
    for (std::size_t i = 0; i < state.rest_positions.size(); ++i) {
        Vec2 d = model_displacement(state.config, state.rest_positions[i], c, radius, w);
        if (sigma > 0.0) {
            d.x += sigma * state.rng.gaussian();
            d.y += sigma * state.rng.gaussian();
        }
        state.current_positions[i] = state.rest_positions[i] + d;
    }
    state.applied = w;
    return state;
}

/// Partial relaxation of the gel after the object slips: every displacement
/// and the applied wrench shrink by (1 - fraction).
inline GelState snap_back(GelState state, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error(Errc::invalid_config, "snap_back fraction must lie in [0, 1]");
    const double keep = 1.0 - fraction;
    for (std::size_t i = 0; i < state.rest_positions.size(); ++i) {
        state.current_positions[i] = state.rest_positions[i] + keep * (state.current_positions[i] - state.rest_positions[i]);
    }
    state.applied = keep * state.applied;
    return state;
}

/// Gaussian width of the rendered dot profile.
inline double dot_sigma(const GelConfig& c) noexcept { return 0.5 * c.dot_radius; }

/// Renders each marker as a Gaussian intensity dip of depth contrast*255,
/// composited by per-pixel minimum over a white background.
inline GelImage render(const GelState& state) {
    const GelConfig& c = state.config;
    const double w = c.image_width, h = c.image_height;
    for (const auto& p : state.current_positions) {
        if (!(p.x >= c.dot_radius && p.x <= w - 1.0 - c.dot_radius && p.y >= c.dot_radius &&
              p.y <= h - 1.0 - c.dot_radius)) {
            throw Error(Errc::marker_out_of_bounds,
                        "marker at (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") left the drawable region");
        }
    }
    GelImage img(c.image_width, c.image_height, 255);
    std::vector<double> field(img.pixels.size(), 255.0);
    const double sigma = dot_sigma(c);
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    const double depth = 255.0 * c.dot_contrast;
    const int reach = static_cast<int>(std::ceil(4.0 * sigma)) + 1;
    for (const auto& p : state.current_positions) {
        const int x0 = std::max(0, static_cast<int>(std::floor(p.x)) - reach);
        const int x1 = std::min(c.image_width - 1, static_cast<int>(std::floor(p.x)) + reach + 1);
        const int y0 = std::max(0, static_cast<int>(std::floor(p.y)) - reach);
        const int y1 = std::min(c.image_height - 1, static_cast<int>(std::floor(p.y)) + reach + 1);
        for (int y = y0; y <= y1; ++y) {
            const double dy = y - p.y;
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - p.x;
                const double v = 255.0 - depth * std::exp(-(dx * dx + dy * dy) * inv_two_sigma2);
                double& f = field[static_cast<std::size_t>(y) * c.image_width + x];
                f = std::min(f, v);
            }
        }
    }
    for (std::size_t i = 0; i < field.size(); ++i) {
        img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(field[i]), 0L, 255L));
    }
    return img;
}

}  // namespace tactile
