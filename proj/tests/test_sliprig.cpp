#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "tactile/sliprig.hpp"

using namespace tactile;

namespace {

RigConfig rig(double mu_s, double mu_k, double normal) {
    RigConfig c;
    c.mu_static = mu_s;
    c.mu_kinetic = mu_k;
    c.clamp_normal = normal;
    return c;
}

}  // namespace

TEST(StepRig, ZeroVelocityOnlyTime) {
    const RigConfig c;
    RigState s = rig_at_rest(c);
    const RigState t = step_rig(s, 0.0, c);
    EXPECT_EQ(t.motor_pos, s.motor_pos);
    EXPECT_EQ(t.object_pos, s.object_pos);
    EXPECT_EQ(t.tension, s.tension);
    EXPECT_EQ(t.regime, Regime::stuck);
    EXPECT_DOUBLE_EQ(t.time, c.dt);
}

TEST(StepRig, SlipOnsetAtStaticLimit) {
    const RigConfig c = rig(0.8, 0.6, 5.0);
    RigState s = rig_at_rest(c);
    double last_stuck = 0.0;
    for (int i = 0; i < 1000 && s.regime == Regime::stuck; ++i) {
        last_stuck = s.tension;
        s = step_rig(s, c.motor_speed, c);
    }
    ASSERT_EQ(s.regime, Regime::slipping);
    EXPECT_LE(last_stuck, 4.0 + 1e-9);
    EXPECT_GT(last_stuck + c.tension_quantum(), 4.0 - 1e-9);
    // kinetic equilibrium after the slip step
    EXPECT_NEAR(s.tension, 3.0, 1e-12);
    s = step_rig(s, 0.0, c);
    EXPECT_EQ(s.regime, Regime::stuck);
    EXPECT_NEAR(s.tension, 3.0, 1e-12);
}

TEST(StepRig, TensionNeverNegative) {
    RigConfig c;
    c.wire_slack_len = 2.0;
    RigState s = rig_at_rest(c);
    for (int i = 0; i < 200; ++i) {
        s = step_rig(s, -c.motor_speed, c);
        EXPECT_GE(s.tension, 0.0);
    }
}

TEST(StepRig, ObjectNeverMovesBackward) {
    const RigConfig c = rig(0.5, 0.3, 2.0);
    RigState s = rig_at_rest(c);
    for (int i = 0; i < 2000; ++i) {
        const double before = s.object_pos;
        s = step_rig(s, c.motor_speed, c);
        EXPECT_GE(s.object_pos, before);
        if (s.regime == Regime::stuck) EXPECT_LE(s.tension, c.static_limit() + 1e-9);
    }
}

TEST(RunTrial, ZeroCommand) {
    const TrialRun r = run_trial(RigConfig{}, 0.0);
    EXPECT_FALSE(r.result.slipped);
    EXPECT_EQ(r.result.object_displacement, 0.0);
    EXPECT_FALSE(r.result.slip_force.has_value());
}

TEST(RunTrial, BelowAndAboveThreshold) {
    const RigConfig c = rig(0.8, 0.5, 5.0);
    EXPECT_FALSE(run_trial(c, 3.9).result.slipped);
    const TrialRun r = run_trial(c, 4.1);
    ASSERT_TRUE(r.result.slipped);
    EXPECT_NEAR(*r.result.slip_force, 4.0, c.spring_k * c.motor_speed * c.dt + 1e-9);
    EXPECT_GT(*r.result.slip_time, 0.0);
    EXPECT_NEAR(r.telemetry.back().tension, 0.0, 1e-12);
}

TEST(RunTrial, MonotoneProtocol) {
    const RigConfig c = rig(1.2, 0.7, 5.0);
    for (double t = 0.0; t < c.static_limit(); t += 0.37) EXPECT_FALSE(run_trial(c, t).result.slipped) << t;
}

TEST(FindSlipForce, WorkedExample) {
    const RigConfig c = rig(0.8, 0.5, 5.0);
    const SlipSearch s = find_slip_force(c);
    EXPECT_EQ(s.trials, 9);
    EXPECT_DOUBLE_EQ(s.commanded_tension, 4.5);
    EXPECT_NEAR(s.slip_force, 4.0, std::max(0.02 * 4.0, c.tension_quantum()));
}

TEST(FindSlipForce, FirstTrialWhenBelowStep) {
    const SlipSearch s = find_slip_force(rig(0.3, 0.2, 1.0));
    EXPECT_EQ(s.trials, 1);
}

TEST(FindSlipForce, CapTriggers) {
    try {
        find_slip_force(rig(1e9, 0.5, 5.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::no_slip_below_cap);
    }
}

TEST(RigConfig, Validation) {
    EXPECT_THROW(validate(rig(0.5, 0.8, 5.0)), Error);
    EXPECT_THROW(validate(rig(0.5, 0.3, 0.0)), Error);
}

TEST(LabeledSequence, SubThresholdNoLabels) {
    const RigConfig c = rig(0.8, 0.5, 5.0);
    const LabeledSequence seq = generate_labeled_sequence(c, GelConfig{}, 3.0);
    for (bool s : seq.slip) EXPECT_FALSE(s);
    EXPECT_EQ(seq.frames.size(), seq.telemetry.size());
}

TEST(LabeledSequence, LabelsMatchRegime) {
    const RigConfig c = rig(0.8, 0.5, 5.0);
    const LabeledSequence seq = generate_labeled_sequence(c, GelConfig{}, 4.5);
    std::size_t slips = 0;
    for (std::size_t i = 0; i < seq.slip.size(); ++i) {
        EXPECT_EQ(seq.slip[i], seq.telemetry[i].regime == Regime::slipping);
        slips += seq.slip[i] ? 1 : 0;
    }
    EXPECT_GE(slips, 1u);
}

TEST(LabeledSequence, ZeroTensionConstantFrames) {
    const LabeledSequence seq = generate_labeled_sequence(RigConfig{}, GelConfig{}, 0.0);
    for (const auto& f : seq.frames) EXPECT_EQ(f.pixels, seq.frames.front().pixels);
}

TEST(Csv, TelemetryAndLabels) {
    const LabeledSequence seq = generate_labeled_sequence(RigConfig{}, GelConfig{}, 1.0);
    std::ostringstream tel, lab;
    write_telemetry_csv(tel, seq.telemetry);
    write_labels_csv(lab, seq);
    EXPECT_EQ(tel.str().rfind("time,motor_pos,object_pos,tension,normal,regime\n", 0), 0u);
    EXPECT_EQ(lab.str().rfind("frame,slip,tension\n", 0), 0u);
}
