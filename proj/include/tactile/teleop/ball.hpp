#pragma once

// Plasticine ball for the gentle-grasp task: a linear spring in contact with
// the gripper jaws, flowing plastically at a constant rate per newton of
// force above the yield force. Plastic deformation never recovers.

#include <algorithm>

#include "tactile/error.hpp"

namespace tactile::teleop {

struct BallParams {
    double rest_diameter = 40.0;  // mm
    double stiffness = 2.0;       // N / mm
    double yield_force = 1.2;     // N
    double plastic_rate = 0.5;    // mm / (N s)
    double hold_min = 0.5;        // N, below this a lifted ball slips out
};

inline void validate(const BallParams& p) {
    if (!(p.rest_diameter > 0.0)) throw Error(Errc::invalid_config, "ball rest_diameter must be > 0");
    if (!(p.stiffness > 0.0)) throw Error(Errc::invalid_config, "ball stiffness must be > 0");
    if (!(p.yield_force >= 0.0)) throw Error(Errc::invalid_config, "ball yield_force must be >= 0");
    if (!(p.plastic_rate >= 0.0)) throw Error(Errc::invalid_config, "ball plastic_rate must be >= 0");
    if (!(p.hold_min >= 0.0)) throw Error(Errc::invalid_config, "ball hold_min must be >= 0");
}

struct BallState {
    double rest_diameter = 40.0;
    double current_diameter = 40.0;
    double stiffness = 2.0;
    double yield_force = 1.2;
    double plastic_rate = 0.5;
    double hold_min = 0.5;
    bool lifted = false;
    bool dropped = false;

    double deformation_ratio() const noexcept { return (rest_diameter - current_diameter) / rest_diameter; }
};

inline BallState make_ball(const BallParams& p) {
    validate(p);
    return {p.rest_diameter, p.rest_diameter, p.stiffness, p.yield_force, p.plastic_rate, p.hold_min, false, false};
}

struct BallStep {
    BallState ball;
    double contact_force = 0.0;  // N
};

/// Contact force is the spring force at the start of the step; plastic flow
/// then shrinks the diameter, floored just above a tenth of the rest size.
/// A dropped ball is out of the gripper and feels no force.
inline BallStep step_ball(BallState ball, double aperture, double dt) {
    if (!(aperture >= 0.0)) throw Error(Errc::invalid_config, "aperture must be >= 0");
    if (ball.dropped) return {ball, 0.0};
    const double overlap = std::max(0.0, ball.current_diameter - aperture);
    const double force = ball.stiffness * overlap;
    if (force > ball.yield_force) {
        const double floor = 0.1 * ball.rest_diameter * (1.0 + 1e-9);
        ball.current_diameter =
            std::max(floor, ball.current_diameter - ball.plastic_rate * (force - ball.yield_force) * dt);
    }
    if (ball.lifted && force < ball.hold_min) ball.dropped = true;
    return {ball, force};
}

}  // namespace tactile::teleop
