#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>

#include "tactile/error.hpp"

namespace tactile {

inline constexpr std::size_t kFingerCount = 5;

/// Finger order: thumb, index, middle, ring, pinky.
struct HapticConfig {
    double threshold = 0.2;  // N, dead zone
    double f_max = 10.0;     // N, saturation
    double log_scale = 1.0;  // N, curvature of the log map
    std::array<bool, kFingerCount> finger_mask{true, true, true, true, true};
    double rate_limit = 0.2;  // max intensity change per update
};

inline void validate(const HapticConfig& c) {
    if (!(c.threshold >= 0.0 && c.threshold < c.f_max)) throw Error(Errc::invalid_config, "need 0 <= threshold < f_max");
    if (!(c.log_scale > 0.0)) throw Error(Errc::invalid_config, "log_scale must be > 0");
    if (!(c.rate_limit > 0.0 && c.rate_limit <= 1.0)) throw Error(Errc::invalid_config, "rate_limit must lie in (0, 1]");
}

struct HapticCommand {
    std::array<double, kFingerCount> intensities{};
    std::uint64_t source_timestamp = 0;  // ns

    friend bool operator==(const HapticCommand&, const HapticCommand&) = default;
};

/// Dead zone below the threshold, then a log curve normalized to reach 1 at
/// f_max, so small forces get most of the intensity range:
///   ln(1 + (f - threshold) / s) / ln(1 + (f_max - threshold) / s), capped at 1.
inline double shape_intensity(double total, const HapticConfig& cfg) {
    if (!(total > cfg.threshold)) return 0.0;
    if (total >= cfg.f_max) return 1.0;
    const double num = std::log1p((total - cfg.threshold) / cfg.log_scale);
    const double den = std::log1p((cfg.f_max - cfg.threshold) / cfg.log_scale);
    return std::min(1.0, num / den);
}

/// Broadcasts the shaped intensity to every enabled finger, limiting the
/// per-finger change against the previous command.
inline HapticCommand make_command(double total, const std::optional<HapticCommand>& prev, const HapticConfig& cfg,
                                  std::uint64_t timestamp_ns) {
    const double target = shape_intensity(std::max(0.0, total), cfg);
    HapticCommand cmd;
    cmd.source_timestamp = timestamp_ns;
    for (std::size_t i = 0; i < kFingerCount; ++i) {
        if (!cfg.finger_mask[i]) continue;
        const double before = prev ? prev->intensities[i] : 0.0;
        cmd.intensities[i] = std::clamp(target, before - cfg.rate_limit, before + cfg.rate_limit);
        cmd.intensities[i] = std::clamp(cmd.intensities[i], 0.0, 1.0);
    }
    return cmd;
}

}  // namespace tactile
