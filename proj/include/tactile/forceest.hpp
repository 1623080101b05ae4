#pragma once

// Force estimation from marker flow: the closed-form inverse of the linear
// gel model, the pooled features used by the learned estimator, and a
// flow-discontinuity slip detector.

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tactile/error.hpp"
#include "tactile/flowtrack.hpp"
#include "tactile/gelsim.hpp"
#include "tactile/geometry.hpp"
#include "tactile/wrench.hpp"

namespace tactile {

struct Calibration {
    double k_s = 2.0;
    double k_n = 1.5;
    double k_t = 0.05;
    Vec2 centroid{160.0, 120.0};
    double radius_norm = 0.5 * std::hypot(260.0, 180.0);
};

inline void validate(const Calibration& c) {
    if (!(c.k_s > 0.0 && c.k_n > 0.0 && c.k_t > 0.0)) throw Error(Errc::invalid_config, "calibration gains must be positive");
    if (!(c.radius_norm > 0.0)) throw Error(Errc::invalid_config, "radius_norm must be positive");
}

/// Calibration matching a gel configuration exactly.
inline Calibration calibration_for(const GelConfig& gel) {
    const GelState s = make_gel(gel);
    return {gel.k_s, gel.k_n, gel.k_t, s.centroid(), s.radius_norm()};
}

struct ForceEstimate {
    Wrench wrench;
    double total = 0.0;
    double quality = 0.0;  // fraction of valid flow entries
};

inline constexpr std::size_t kMinValidFlow = 4;

namespace detail {

inline std::size_t require_valid(const FlowField& flow) {
    const std::size_t n = flow.valid_count();
    if (n < kMinValidFlow)
        throw Error(Errc::insufficient_valid_flow, std::to_string(n) + " valid flow entries, need at least 4");
    return n;
}

inline double quality_of(const FlowField& flow, std::size_t valid) {
    return flow.entries.empty() ? 0.0 : static_cast<double>(valid) / static_cast<double>(flow.entries.size());
}

}  // namespace detail

/// Inverts the gel model over the valid entries: the mean delta gives shear,
/// the least-squares radial and tangential components of the residual field
/// give normal force and torsion.
inline ForceEstimate estimate_from_flow(const FlowField& flow, const Calibration& cal) {
    validate(cal);
    const std::size_t n = detail::require_valid(flow);
    const Vec2 mean = mean_delta(flow);

    double radial = 0.0, tangential = 0.0, lever = 0.0;
    for (const auto& e : flow.entries) {
        if (!e.valid) continue;
        const Vec2 r = e.base - cal.centroid;
        const Vec2 dev = e.delta - mean;
        radial += dot(dev, r);
        tangential += dot(dev, perp(r));
        lever += norm2(r);
    }
    ForceEstimate out;
    out.wrench.fx = mean.x / cal.k_s;
    out.wrench.fy = mean.y / cal.k_s;
    if (lever > 0.0) {
        out.wrench.fn = std::max(0.0, cal.radius_norm / cal.k_n * radial / lever);
        out.wrench.tau = cal.radius_norm / cal.k_t * tangential / lever;
    }
    out.total = total_force(out.wrench);
    out.quality = detail::quality_of(flow, n);
    return out;
}

inline constexpr std::size_t kFeatureCount = 6;
using FeatureVector = std::array<double, kFeatureCount>;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "mean_dx", "mean_dy", "mean_radial", "mean_tangential", "mean_magnitude", "std_magnitude"};

/// Six pooled features over valid entries: mean dx, mean dy, mean projection
/// of (d - mean) onto r / R and onto perp(r) / R, mean |d|, and std |d|.
inline FeatureVector pool_features(const FlowField& flow, const Calibration& cal) {
    validate(cal);
    const std::size_t n = detail::require_valid(flow);
    const Vec2 mean = mean_delta(flow);
    double radial = 0.0, tangential = 0.0, mag = 0.0, mag2 = 0.0;
    for (const auto& e : flow.entries) {
        if (!e.valid) continue;
        const Vec2 r = (1.0 / cal.radius_norm) * (e.base - cal.centroid);
        const Vec2 dev = e.delta - mean;
        radial += dot(dev, r);
        tangential += dot(dev, perp(r));
        const double m = norm(e.delta);
        mag += m;
        mag2 += m * m;
    }
    const double inv = 1.0 / static_cast<double>(n);
    const double mean_mag = mag * inv;
    const double var = std::max(0.0, mag2 * inv - mean_mag * mean_mag);
    return {mean.x, mean.y, radial * inv, tangential * inv, mean_mag, std::sqrt(var)};
}

// ---------------------------------------------------------------------------
// Slip detection

struct SlipDetectConfig {
    double drop_ratio = 0.3;
    double disp_thresh = 5.0;      // px, std of |d_i - mean|
    double force_threshold = 0.2;  // N, same default as the haptic dead zone
};

enum class SlipTrigger { flow_drop, dispersion };

constexpr std::string_view to_string(SlipTrigger t) noexcept {
    return t == SlipTrigger::flow_drop ? "flow_drop" : "dispersion";
}

struct SlipEvent {
    std::size_t frame = 0;
    SlipTrigger reason = SlipTrigger::flow_drop;

    friend bool operator==(const SlipEvent&, const SlipEvent&) = default;
};

/// Mean |delta| over valid entries; zero when none are valid.
inline double mean_magnitude(const FlowField& flow) noexcept {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& e : flow.entries) {
        if (!e.valid) continue;
        sum += norm(e.delta);
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// Standard deviation of |d_i - mean| over valid entries.
inline double delta_dispersion(const FlowField& flow) noexcept {
    const Vec2 mean = mean_delta(flow);
    double s = 0.0, s2 = 0.0;
    std::size_t n = 0;
    for (const auto& e : flow.entries) {
        if (!e.valid) continue;
        const double m = norm(e.delta - mean);
        s += m;
        s2 += m * m;
        ++n;
    }
    if (n == 0) return 0.0;
    const double mu = s / static_cast<double>(n);
    return std::sqrt(std::max(0.0, s2 / static_cast<double>(n) - mu * mu));
}

/// Flags frame t when the mean flow magnitude falls by more than drop_ratio
/// of its running maximum in a single frame, or when the flow dispersion
/// crosses disp_thresh while the estimated total force exceeds
/// force_threshold (rising edge only). Frame indices refer to positions in
/// the history spans, which must have equal length.
inline std::vector<SlipEvent> detect_slip(std::span<const ForceEstimate> estimates, std::span<const FlowField> flows,
                                          const SlipDetectConfig& cfg = {}) {
    if (estimates.size() != flows.size()) throw Error(Errc::shape_mismatch, "slip history spans differ in length");
    std::vector<SlipEvent> events;
    if (flows.size() < 2) return events;

    double prev_mag = mean_magnitude(flows[0]);
    double running_max = prev_mag;
    bool prev_dispersed = false;
    for (std::size_t t = 0; t < flows.size(); ++t) {
        const double mag = t == 0 ? prev_mag : mean_magnitude(flows[t]);
        const bool dispersed =
            estimates[t].total > cfg.force_threshold && delta_dispersion(flows[t]) > cfg.disp_thresh;
        if (t > 0) {
            if (running_max > 0.0 && prev_mag - mag > cfg.drop_ratio * running_max) {
                events.push_back({t, SlipTrigger::flow_drop});
            } else if (dispersed && !prev_dispersed) {
                events.push_back({t, SlipTrigger::dispersion});
            }
        }
        prev_dispersed = dispersed;
        running_max = std::max(running_max, mag);
        prev_mag = mag;
    }
    return events;
}

}  // namespace tactile
