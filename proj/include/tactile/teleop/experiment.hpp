#pragma once

// Scripted gentle-grasp trials. Both controllers approach the ball quickly,
// close slowly, lift, and hold:
//   naive     closes to a fixed aperture (a fraction of the rest diameter)
//   feedback  closes until the haptic intensity it receives reaches i_target,
//             then holds the aperture it has reached

#include <algorithm>
#include <cmath>
#include <string_view>
#include <vector>

#include "tactile/rng.hpp"
#include "tactile/teleop/pipeline.hpp"
#include "tactile/teleop/session.hpp"

namespace tactile::teleop {

enum class ControllerMode { naive, feedback };

constexpr std::string_view to_string(ControllerMode m) noexcept { return m == ControllerMode::naive ? "naive" : "feedback"; }

/// Gap left between the jaws and the ball at the end of the fast approach.
inline constexpr double kApproachGap = 2.0;  // mm

inline SessionRecord run_controller_experiment(const PipelineConfig& cfg, ControllerMode mode) {
    Pipeline pipe(cfg);
    auto grip = pipe.take_grip_sender();
    auto haptic = pipe.haptic_out().subscribe();

    const ExperimentConfig& ex = cfg.experiment;
    const double d0 = cfg.ball.rest_diameter;
    const double full = cfg.max_aperture;
    const double slow = ex.close_rate / full;
    const double fast = cfg.gripper_speed / full;

    enum class Phase { approach, close, hold, done } phase = Phase::approach;
    const double approach_to = std::min(full, d0 + kApproachGap);
    const double naive_target = ex.naive_target_ratio * d0;
    grip.send({approach_to / full, fast});

    double hold_start = 0.0;
    double intensity = 0.0;
    const auto max_ticks = static_cast<std::uint64_t>(std::ceil(ex.timeout * cfg.tick_rate));
    for (std::uint64_t n = 0; n < max_ticks && phase != Phase::done; ++n) {
        const TickRecord rec = pipe.tick();
        while (auto h = haptic.try_recv()) {
            intensity = 0.0;
            for (auto v : h->value.message.intensity) intensity = std::max(intensity, wire::from_fixed(v));
        }

        switch (phase) {
            case Phase::approach:
                if (std::abs(pipe.aperture() - approach_to) < 1e-9) {
                    grip.send({mode == ControllerMode::naive ? naive_target / full : 0.0, slow});
                    phase = Phase::close;
                }
                break;
            case Phase::close: {
                const bool reached = mode == ControllerMode::naive ? std::abs(pipe.aperture() - naive_target) < 1e-9
                                                                   : intensity >= ex.i_target;
                if (reached) {
                    if (mode == ControllerMode::feedback) grip.send({pipe.aperture() / full, slow});
                    pipe.lift();
                    hold_start = rec.time;
                    phase = Phase::hold;
                }
                break;
            }
            case Phase::hold:
                if (rec.time - hold_start >= ex.hold_time) phase = Phase::done;
                break;
            case Phase::done:
                break;
        }
    }
    return pipe.record(std::string(to_string(mode)));
}

/// Re-runs a recorded session by feeding back its grip commands, control
/// codes, and lift events on the ticks where they were consumed.
inline SessionRecord replay_session(const SessionRecord& original) {
    Pipeline pipe(original.config);
    auto grip = pipe.take_grip_sender();
    auto control = pipe.take_control_sender();
    for (const auto& t : original.ticks) {
        for (const auto& g : t.grip) grip.send(g);
        for (const auto& e : t.events) {
            if (e == "lift") {
                pipe.lift();
            } else if (e.rfind("control:", 0) == 0) {
                if (auto code = control_from_string(std::string_view(e).substr(8))) control.send({*code});
            }
        }
        pipe.tick();
    }
    return pipe.record("replay");
}

inline BallParams draw_ball(Rng& rng, const BallRanges& r) {
    auto pick = [&](const Range& range) { return rng.uniform(range.lo, range.hi); };
    BallParams p;
    p.rest_diameter = pick(r.rest_diameter);
    p.stiffness = pick(r.stiffness);
    p.yield_force = pick(r.yield_force);
    p.plastic_rate = pick(r.plastic_rate);
    p.hold_min = pick(r.hold_min);
    return p;
}

struct PairedOutcome {
    BallParams ball;
    SessionSummary naive;
    SessionSummary feedback;

    bool feedback_gentler() const noexcept { return feedback.final_deformation_ratio < naive.final_deformation_ratio; }
};

/// Paired naive/feedback runs over randomized balls drawn from cfg.ball_ranges
/// with a generator seeded by cfg.seed.
inline std::vector<PairedOutcome> run_robustness(const PipelineConfig& cfg, int draws) {
    Rng rng(cfg.seed);
    std::vector<PairedOutcome> out;
    for (int i = 0; i < draws; ++i) {
        PipelineConfig c = cfg;
        c.ball = draw_ball(rng, cfg.ball_ranges);
        PairedOutcome o;
        o.ball = c.ball;
        o.naive = run_controller_experiment(c, ControllerMode::naive).summary;
        o.feedback = run_controller_experiment(c, ControllerMode::feedback).summary;
        out.push_back(o);
    }
    return out;
}

}  // namespace tactile::teleop
