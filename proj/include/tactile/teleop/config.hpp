#pragma once

// The shared JSON configuration document. Every section and field is
// optional; missing values keep their defaults.
//
//   {
//     "tick_rate": 25,
//     "gel": {...}, "track": {...}, "calibration": {...}, "haptic": {...},
//     "ball": {...}, "rig": {...}, "slip": {...},
//     "experiment": {...}, "ball_ranges": {...}, "wire": {...}
//   }

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "tactile/error.hpp"
#include "tactile/flowtrack.hpp"
#include "tactile/forceest.hpp"
#include "tactile/gelsim.hpp"
#include "tactile/hapticmap.hpp"
#include "tactile/sliprig.hpp"
#include "tactile/teleop/ball.hpp"

namespace tactile {

inline void to_json(nlohmann::json& j, const Vec2& v) { j = nlohmann::json::array({v.x, v.y}); }
inline void from_json(const nlohmann::json& j, Vec2& v) {
    v.x = j.at(0).get<double>();
    v.y = j.at(1).get<double>();
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GelConfig, rows, cols, image_width, image_height, margin, dot_radius,
                                                dot_contrast, k_s, k_n, k_t, noise_sigma, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrackConfig, window_half, pyramid_levels, max_iterations, epsilon, min_eigen)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Calibration, k_s, k_n, k_t, centroid, radius_norm)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(HapticConfig, threshold, f_max, log_scale, finger_mask, rate_limit)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RigConfig, spring_k, wire_slack_len, clamp_normal, mu_static, mu_kinetic,
                                                motor_speed, dt, slip_epsilon, tension_step)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SlipDetectConfig, drop_ratio, disp_thresh, force_threshold)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Wrench, fx, fy, fn, tau)

}  // namespace tactile

namespace tactile::teleop {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BallParams, rest_diameter, stiffness, yield_force, plastic_rate, hold_min)

struct ExperimentConfig {
    double i_target = 0.35;            // feedback mode stops closing at this haptic intensity
    double naive_target_ratio = 0.8;   // naive mode closes to this fraction of the rest diameter
    double close_rate = 5.0;           // mm / s
    double hold_time = 2.0;            // s, lifted hold
    double timeout = 30.0;             // s, abort a grasp that never completes
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, i_target, naive_target_ratio, close_rate, hold_time, timeout)

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Range, lo, hi)

/// Bounds for randomized ball draws in the robustness experiment.
struct BallRanges {
    Range rest_diameter{30.0, 50.0};
    Range stiffness{1.0, 3.0};
    Range yield_force{0.8, 2.0};
    Range plastic_rate{0.2, 1.0};
    Range hold_min{0.2, 0.6};
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BallRanges, rest_diameter, stiffness, yield_force, plastic_rate, hold_min)

struct WireConfig {
    int tcp_port = 7455;
    int ws_port = 7456;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(WireConfig, tcp_port, ws_port)

struct PipelineConfig {
    double tick_rate = 25.0;  // Hz
    GelConfig gel;
    TrackConfig track;
    Calibration calibration = calibration_for(GelConfig{});
    HapticConfig haptic;
    BallParams ball;
    RigConfig rig;
    SlipDetectConfig slip;
    double shear_fraction = 0.3;   // gel shear fy as a fraction of contact force
    double gel_force_limit = 6.0;  // N, normal load at which the gel saturates
    double max_aperture = 80.0;    // mm, GRIP_CMD aperture 1.0
    double gripper_speed = 20.0;   // mm / s, used when a GRIP_CMD carries no max_rate
    ExperimentConfig experiment;
    BallRanges ball_ranges;
    WireConfig wire;
    std::uint64_t seed = 0;

    double dt() const noexcept { return 1.0 / tick_rate; }
};

inline void validate(const PipelineConfig& c) {
    if (!(c.tick_rate > 0.0)) throw Error(Errc::invalid_config, "tick_rate must be > 0");
    validate(c.gel);
    validate(c.track);
    validate(c.calibration);
    validate(c.haptic);
    validate(c.ball);
    validate(c.rig);
    if (!(c.shear_fraction >= 0.0)) throw Error(Errc::invalid_config, "shear_fraction must be >= 0");
    if (!(c.gel_force_limit > 0.0)) throw Error(Errc::invalid_config, "gel_force_limit must be > 0");
    if (!(c.max_aperture > 0.0)) throw Error(Errc::invalid_config, "max_aperture must be > 0");
    if (!(c.gripper_speed > 0.0)) throw Error(Errc::invalid_config, "gripper_speed must be > 0");
    if (!(c.experiment.close_rate > 0.0)) throw Error(Errc::invalid_config, "experiment close_rate must be > 0");
}

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
    j = {{"tick_rate", c.tick_rate},       {"gel", c.gel},
         {"track", c.track},               {"calibration", c.calibration},
         {"haptic", c.haptic},             {"ball", c.ball},
         {"rig", c.rig},                   {"slip", c.slip},
         {"shear_fraction", c.shear_fraction}, {"gel_force_limit", c.gel_force_limit},
         {"max_aperture", c.max_aperture}, {"gripper_speed", c.gripper_speed},
         {"experiment", c.experiment},     {"ball_ranges", c.ball_ranges},
         {"wire", c.wire},                 {"seed", c.seed}};
}

/// Calibration defaults to the exact inverse of the configured gel when the
/// document does not carry one.
inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
    c = PipelineConfig{};
    c.tick_rate = j.value("tick_rate", c.tick_rate);
    if (j.contains("gel")) c.gel = j.at("gel").get<GelConfig>();
    if (j.contains("track")) c.track = j.at("track").get<TrackConfig>();
    c.calibration = j.contains("calibration") ? j.at("calibration").get<Calibration>() : calibration_for(c.gel);
    if (j.contains("haptic")) c.haptic = j.at("haptic").get<HapticConfig>();
    if (j.contains("ball")) c.ball = j.at("ball").get<BallParams>();
    if (j.contains("rig")) c.rig = j.at("rig").get<RigConfig>();
    if (j.contains("slip")) c.slip = j.at("slip").get<SlipDetectConfig>();
    c.shear_fraction = j.value("shear_fraction", c.shear_fraction);
    c.gel_force_limit = j.value("gel_force_limit", c.gel_force_limit);
    c.max_aperture = j.value("max_aperture", c.max_aperture);
    c.gripper_speed = j.value("gripper_speed", c.gripper_speed);
    if (j.contains("experiment")) c.experiment = j.at("experiment").get<ExperimentConfig>();
    if (j.contains("ball_ranges")) c.ball_ranges = j.at("ball_ranges").get<BallRanges>();
    if (j.contains("wire")) c.wire = j.at("wire").get<WireConfig>();
    c.seed = j.value("seed", c.seed);
}

inline PipelineConfig parse_config(const std::string& text) {
    try {
        PipelineConfig c = nlohmann::json::parse(text).get<PipelineConfig>();
        validate(c);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse_error, std::string("config: ") + e.what());
    }
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error(Errc::io_error, "cannot open config " + path.string());
    return parse_config(std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>()));
}

}  // namespace tactile::teleop
