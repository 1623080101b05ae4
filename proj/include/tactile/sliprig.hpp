#pragma once

// Simulated shear/slip test rig. A test object is clamped against the gel
// with a known normal force; a linear motor pulls it through a spring and a
// wire. The object follows a quasi-static stick-slip rule: it stays put until
// the spring tension exceeds mu_static * N, then slides within the step
// until the tension has relaxed to mu_kinetic * N.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "tactile/error.hpp"
#include "tactile/gelsim.hpp"
#include "tactile/image.hpp"

namespace tactile {

struct RigConfig {
    double spring_k = 1.0;        // N / mm
    double wire_slack_len = 0.0;  // mm
    double clamp_normal = 5.0;    // N
    double mu_static = 0.8;
    double mu_kinetic = 0.5;
    double motor_speed = 5.0;  // mm / s
    double dt = 0.004;         // s
    double slip_epsilon = 0.01;  // mm
    double tension_step = 0.5;   // N

    /// Tension change produced by one full-speed motor step.
    double tension_quantum() const noexcept { return spring_k * motor_speed * dt; }
    double static_limit() const noexcept { return mu_static * clamp_normal; }
    double kinetic_level() const noexcept { return mu_kinetic * clamp_normal; }
};

inline void validate(const RigConfig& c) {
    auto fail = [](const char* why) { throw Error(Errc::invalid_config, why); };
    if (!(c.spring_k > 0.0)) fail("spring_k must be > 0");
    if (!(c.wire_slack_len >= 0.0)) fail("wire_slack_len must be >= 0");
    if (!(c.mu_kinetic > 0.0 && c.mu_kinetic <= c.mu_static)) fail("need 0 < mu_kinetic <= mu_static");
    if (!(c.clamp_normal > 0.0)) fail("clamp_normal must be > 0");
    if (!(c.motor_speed > 0.0)) fail("motor_speed must be > 0");
    if (!(c.dt > 0.0)) fail("dt must be > 0");
    if (!(c.slip_epsilon > 0.0)) fail("slip_epsilon must be > 0");
    if (!(c.tension_step > 0.0)) fail("tension_step must be > 0");
}

enum class Regime { stuck, slipping };

constexpr std::string_view to_string(Regime r) noexcept { return r == Regime::stuck ? "stuck" : "slipping"; }

/// regime is slipping for the step in which the object slid; the object is
/// stuck again at the end of every step.
struct RigState {
    double motor_pos = 0.0;   // mm
    double object_pos = 0.0;  // mm
    double time = 0.0;        // s
    Regime regime = Regime::stuck;
    double tension = 0.0;         // N
    double normal_reading = 0.0;  // N
    double shear_reading = 0.0;   // N
};

inline double spring_tension(double motor_pos, double object_pos, const RigConfig& cfg) noexcept {
    return cfg.spring_k * std::max(0.0, motor_pos - object_pos - cfg.wire_slack_len);
}

inline RigState rig_at_rest(const RigConfig& cfg) {
    RigState s;
    s.normal_reading = cfg.clamp_normal;
    return s;
}

inline RigState step_rig(RigState s, double motor_velocity, const RigConfig& cfg) {
    if (!(std::abs(motor_velocity) <= cfg.motor_speed * (1.0 + 1e-12)))
        throw Error(Errc::invalid_config, "motor velocity exceeds motor_speed");
    s.motor_pos += motor_velocity * cfg.dt;
    s.time += cfg.dt;
    s.regime = Regime::stuck;
    s.tension = spring_tension(s.motor_pos, s.object_pos, cfg);
    // relative guard so accumulated motor steps landing on the limit do not count as exceeding it
    if (s.tension > cfg.static_limit() * (1.0 + 1e-9)) {
        s.regime = Regime::slipping;
        s.object_pos = s.motor_pos - cfg.wire_slack_len - cfg.kinetic_level() / cfg.spring_k;
        s.tension = cfg.kinetic_level();
    }
    s.normal_reading = cfg.clamp_normal;
    s.shear_reading = s.tension;
    return s;
}

struct TrialResult {
    bool slipped = false;
    double commanded_tension = 0.0;
    std::optional<double> slip_force;
    std::optional<double> slip_time;
    double object_displacement = 0.0;
};

struct TrialRun {
    TrialResult result;
    std::vector<RigState> telemetry;  // starts with the rest state
    /// Tension reached just before relaxation on each step (equal to
    /// telemetry[i].tension except on slip steps).
    std::vector<double> peak_tension;
};

/// One tension-release cycle: load at full motor speed until the commanded
/// tension is reached or the object slips, then unload until the wire is
/// slack, and compare the object position with where it started.
inline TrialRun run_trial(const RigConfig& cfg, double commanded_tension) {
    validate(cfg);
    if (!(commanded_tension >= 0.0) || !std::isfinite(commanded_tension))
        throw Error(Errc::invalid_config, "commanded tension must be finite and >= 0");

    TrialRun run;
    run.result.commanded_tension = commanded_tension;
    RigState s = rig_at_rest(cfg);
    const double start = s.object_pos;
    run.telemetry.push_back(s);
    run.peak_tension.push_back(s.tension);

    auto advance = [&](double v) {
        const double peak = spring_tension(s.motor_pos + v * cfg.dt, s.object_pos, cfg);
        s = step_rig(s, v, cfg);
        run.telemetry.push_back(s);
        run.peak_tension.push_back(peak);
        if (s.regime == Regime::slipping && !run.result.slip_force) {
            run.result.slip_force = peak;
            run.result.slip_time = s.time;
        }
    };

    // Bound on load steps: slack plus the commanded stretch at full speed.
    const double step_mm = cfg.motor_speed * cfg.dt;
    const auto max_steps = static_cast<std::size_t>(
        std::ceil((cfg.wire_slack_len + commanded_tension / cfg.spring_k) / step_mm)) + 2;
    for (std::size_t i = 0; i < max_steps && s.tension < commanded_tension && !run.result.slip_force; ++i)
        advance(cfg.motor_speed);
    while (s.tension > 0.0) advance(-cfg.motor_speed);

    run.result.object_displacement = s.object_pos - start;
    run.result.slipped = std::abs(run.result.object_displacement) > cfg.slip_epsilon;
    if (!run.result.slipped) {
        run.result.slip_force.reset();
        run.result.slip_time.reset();
    }
    return run;
}

struct SlipSearch {
    double slip_force = 0.0;
    double commanded_tension = 0.0;
    int trials = 0;
};

inline constexpr int kMaxSlipTrials = 1000;

/// Repeats run_trial at tension_step, 2 tension_step, ... until a trial slips.
/// Gives up once the commanded tension passes 10 mu_static N or after
/// kMaxSlipTrials trials.
inline SlipSearch find_slip_force(const RigConfig& cfg) {
    validate(cfg);
    const double cap = 10.0 * cfg.static_limit();
    for (int k = 1; k <= kMaxSlipTrials; ++k) {
        const double commanded = k * cfg.tension_step;
        if (commanded > cap) break;
        const TrialRun run = run_trial(cfg, commanded);
        if (run.result.slipped) return {*run.result.slip_force, commanded, k};
    }
    throw Error(Errc::no_slip_below_cap, "no slip before the safety cap; check mu_static and clamp_normal");
}

struct LabeledSequence {
    std::vector<GelImage> frames;
    std::vector<bool> slip;
    std::vector<double> tension;
    std::vector<RigState> telemetry;
};

/// Renders one gel frame per rig step. Spring tension loads the gel as shear
/// along +y; on a slip step the gel relaxes by 1 - mu_kinetic / mu_static,
/// and that frame is labeled as slipping.
inline LabeledSequence generate_labeled_sequence(const RigConfig& rig, const GelConfig& gel, double commanded_tension) {
    const TrialRun run = run_trial(rig, commanded_tension);
    const double fraction = 1.0 - rig.mu_kinetic / rig.mu_static;
    LabeledSequence seq;
    GelState state = make_gel(gel);
    for (std::size_t i = 0; i < run.telemetry.size(); ++i) {
        const RigState& r = run.telemetry[i];
        if (r.regime == Regime::slipping) {
            state = snap_back(apply_wrench(std::move(state), {0.0, run.peak_tension[i], 0.0, 0.0}), fraction);
        } else {
            state = apply_wrench(std::move(state), {0.0, r.tension, 0.0, 0.0});
        }
        seq.frames.push_back(render(state));
        seq.slip.push_back(r.regime == Regime::slipping);
        seq.tension.push_back(r.tension);
    }
    seq.telemetry = run.telemetry;
    return seq;
}

inline void write_telemetry_csv(std::ostream& os, const std::vector<RigState>& telemetry) {
    os << "time,motor_pos,object_pos,tension,normal,regime\n";
    for (const auto& s : telemetry)
        os << s.time << ',' << s.motor_pos << ',' << s.object_pos << ',' << s.tension << ',' << s.normal_reading << ','
           << to_string(s.regime) << '\n';
}

inline void write_labels_csv(std::ostream& os, const LabeledSequence& seq) {
    os << "frame,slip,tension\n";
    for (std::size_t i = 0; i < seq.slip.size(); ++i) os << i << ',' << (seq.slip[i] ? 1 : 0) << ',' << seq.tension[i] << '\n';
}

}  // namespace tactile
