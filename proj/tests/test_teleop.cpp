#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tactile/teleop/ball.hpp"
#include "tactile/teleop/config.hpp"
#include "tactile/teleop/experiment.hpp"
#include "tactile/teleop/pipeline.hpp"
#include "tactile/teleop/session.hpp"

using namespace tactile;
using namespace tactile::teleop;

namespace {

/// Deterministic fake clock: 1 ms per reading.
Pipeline::Clock fake_clock() {
    auto t = std::make_shared<std::uint64_t>(0);
    return [t] { return *t += 1'000'000; };
}

}  // namespace

TEST(StepBall, NoContact) {
    const BallState b = make_ball(BallParams{});
    const BallStep s = step_ball(b, 45.0, 0.04);
    EXPECT_EQ(s.contact_force, 0.0);
    EXPECT_EQ(s.ball.current_diameter, 40.0);
}

TEST(StepBall, LinearSpring) {
    BallParams p;
    p.yield_force = 10.0;
    const BallStep s = step_ball(make_ball(p), 39.0, 0.04);
    EXPECT_DOUBLE_EQ(s.contact_force, 2.0);
    EXPECT_EQ(s.ball.current_diameter, 40.0);
}

TEST(StepBall, PlasticFlowIntegrates) {
    BallParams p;
    BallState b = make_ball(p);
    const double dt = 0.001;
    const double target = p.yield_force + 1.0;
    for (int i = 0; i < 1000; ++i) {
        const double aperture = b.current_diameter - target / p.stiffness;
        const BallStep s = step_ball(b, aperture, dt);
        EXPECT_NEAR(s.contact_force, target, 1e-9);
        b = s.ball;
    }
    EXPECT_NEAR(40.0 - b.current_diameter, 0.5, 1e-9);
}

TEST(StepBall, DiameterFloor) {
    BallParams p;
    p.plastic_rate = 1000.0;
    const BallStep s = step_ball(make_ball(p), 0.0, 1.0);
    EXPECT_GT(s.ball.current_diameter, 0.1 * p.rest_diameter);
    EXPECT_LT(s.ball.deformation_ratio(), 1.0);
}

TEST(StepBall, DropWhenLiftedLoosely) {
    BallState b = make_ball(BallParams{});
    b.lifted = true;
    const BallStep s = step_ball(b, 39.9, 0.04);  // 0.2 N < hold_min
    EXPECT_TRUE(s.ball.dropped);
    EXPECT_EQ(step_ball(s.ball, 30.0, 0.04).contact_force, 0.0);
}

TEST(StepBall, NegativeApertureRejected) { EXPECT_THROW(step_ball(make_ball(BallParams{}), -1.0, 0.04), Error); }

TEST(Config, JsonRoundTrip) {
    PipelineConfig c;
    c.tick_rate = 30.0;
    c.gel.rows = 5;
    c.haptic.finger_mask = {true, false, true, false, true};
    c.ball.stiffness = 2.5;
    c.experiment.i_target = 0.4;
    c.seed = 77;
    const PipelineConfig back = parse_config(nlohmann::json(c).dump());
    EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
}

TEST(Config, PartialDocumentUsesDefaults) {
    const PipelineConfig c = parse_config(R"({"gel": {"k_s": 3.0}, "tick_rate": 20})");
    EXPECT_EQ(c.tick_rate, 20.0);
    EXPECT_EQ(c.gel.k_s, 3.0);
    EXPECT_EQ(c.gel.rows, 7);
    EXPECT_EQ(c.calibration.k_s, 3.0);  // follows the gel when absent
}

TEST(Config, Invalid) {
    EXPECT_THROW(parse_config(R"({"tick_rate": 0})"), Error);
    EXPECT_THROW(parse_config("{not json"), Error);
    EXPECT_THROW(parse_config(R"({"haptic": {"threshold": 20}})"), Error);
}

TEST(Pipeline, OpenGripperPublishesZero) {
    Pipeline p(PipelineConfig{}, fake_clock());
    auto force = p.force_out().subscribe();
    auto haptic = p.haptic_out().subscribe();
    const TickRecord t = p.tick();
    EXPECT_EQ(t.contact_force, 0.0);
    EXPECT_EQ(force.recv().value.message.total, 0.0f);
    for (auto v : haptic.recv().value.message.intensity) EXPECT_EQ(v, 0);
}

TEST(Pipeline, ClosedOnBallMatchesTruth) {
    PipelineConfig cfg;
    cfg.ball.yield_force = 10.0;  // stay elastic
    Pipeline p(cfg, fake_clock());
    auto grip = p.take_grip_sender();
    auto force = p.force_out().subscribe();
    grip.send({39.0 / cfg.max_aperture, 100.0});
    const TickRecord t = p.tick();
    EXPECT_DOUBLE_EQ(t.contact_force, 2.0);
    const double truth = std::hypot(2.0, cfg.shear_fraction * 2.0);
    const auto f = force.recv().value;
    EXPECT_NEAR(f.message.total, truth, 0.05 * truth);
    EXPECT_EQ(f.seq, 0u);
    EXPECT_EQ(f.message.quality_percent, 100);
}

TEST(Pipeline, FeedbackOffZeroesHapticOnly) {
    PipelineConfig cfg;
    cfg.ball.yield_force = 10.0;
    Pipeline p(cfg, fake_clock());
    auto grip = p.take_grip_sender();
    auto control = p.take_control_sender();
    auto force = p.force_out().subscribe();
    auto haptic = p.haptic_out().subscribe();
    grip.send({38.0 / cfg.max_aperture, 100.0});
    control.send({wire::ControlCode::feedback_off});
    const TickRecord t = p.tick();
    EXPECT_GT(force.recv().value.message.total, 1.0f);
    for (auto v : haptic.recv().value.message.intensity) EXPECT_EQ(v, 0);
    ASSERT_FALSE(t.events.empty());
    EXPECT_EQ(t.events[0], "control:feedback_off");
}

TEST(Pipeline, TimestampsPreserved) {
    Pipeline p(PipelineConfig{}, fake_clock());
    auto force = p.force_out().subscribe();
    auto sensor = p.sensor_out().subscribe();
    const TickRecord t = p.tick();
    EXPECT_EQ(force.recv().value.timestamp_ns, t.timestamp_ns);
    const auto s = sensor.recv().value;
    EXPECT_EQ(s.timestamp_ns, t.timestamp_ns);
    EXPECT_EQ(s.message.width, 320);
    EXPECT_EQ(s.message.pixels.size(), 320u * 240u);
}

TEST(Pipeline, FaultPublishesNothing) {
    PipelineConfig cfg;
    cfg.gel_force_limit = 100.0;  // let the gel be driven out of the image
    cfg.ball.yield_force = 100.0;
    Pipeline p(cfg, fake_clock());
    auto grip = p.take_grip_sender();
    auto force = p.force_out().subscribe();
    grip.send({0.0, 100.0});
    const TickRecord t = p.tick();
    ASSERT_FALSE(t.events.empty());
    EXPECT_EQ(t.events.back().rfind("fault:", 0), 0u);
    EXPECT_FALSE(force.try_recv().has_value());
    EXPECT_EQ(p.record("x").summary.faults, 1u);
}

TEST(Pipeline, StopHaltsSimulation) {
    Pipeline p(PipelineConfig{}, fake_clock());
    auto control = p.take_control_sender();
    auto force = p.force_out().subscribe();
    control.send({wire::ControlCode::stop});
    p.tick();
    EXPECT_FALSE(force.try_recv().has_value());
    control.send({wire::ControlCode::start});
    p.tick();
    EXPECT_TRUE(force.try_recv().has_value());
}

TEST(Experiment, FeedbackGentlerThanNaive) {
    const PipelineConfig cfg;
    const SessionRecord naive = run_controller_experiment(cfg, ControllerMode::naive);
    const SessionRecord fb = run_controller_experiment(cfg, ControllerMode::feedback);
    EXPECT_FALSE(naive.summary.dropped);
    EXPECT_FALSE(fb.summary.dropped);
    EXPECT_GT(naive.summary.final_deformation_ratio, 0.0);
    EXPECT_LE(fb.summary.final_deformation_ratio, 0.6 * naive.summary.final_deformation_ratio);
}

TEST(Experiment, DeformationMonotone) {
    const SessionRecord r = run_controller_experiment(PipelineConfig{}, ControllerMode::naive);
    for (std::size_t i = 1; i < r.ticks.size(); ++i) {
        EXPECT_GE(r.ticks[i].deformation_ratio, r.ticks[i - 1].deformation_ratio);
        EXPECT_GT(r.ticks[i].time, r.ticks[i - 1].time);
    }
}

TEST(Experiment, TinyTargetDropsBall) {
    PipelineConfig cfg;
    cfg.experiment.i_target = 1e-6;
    cfg.ball.hold_min = 1.0;
    const SessionRecord r = run_controller_experiment(cfg, ControllerMode::feedback);
    EXPECT_TRUE(r.summary.dropped);
}

TEST(Experiment, DeepNaiveTargetDeformsWithoutDrop) {
    PipelineConfig cfg;
    cfg.experiment.naive_target_ratio = 0.5;
    cfg.gel_force_limit = 6.0;
    const SessionRecord r = run_controller_experiment(cfg, ControllerMode::naive);
    EXPECT_FALSE(r.summary.dropped);
    EXPECT_GT(r.summary.final_deformation_ratio, 0.1);
}

TEST(Session, WriteReadAndReplay) {
    const SessionRecord r = run_controller_experiment(PipelineConfig{}, ControllerMode::feedback);
    const auto path = std::filesystem::temp_directory_path() / "tactile_session.jsonl";
    write_session(path, r);
    const SessionRecord back = read_session(path);
    EXPECT_EQ(back.mode, "feedback");
    EXPECT_EQ(back.ticks.size(), r.ticks.size());
    EXPECT_TRUE(back.summary.same_outcome(r.summary));
    const SessionRecord again = replay_session(back);
    EXPECT_TRUE(again.summary.same_outcome(r.summary));
    ASSERT_EQ(again.ticks.size(), r.ticks.size());
    for (std::size_t i = 0; i < r.ticks.size(); ++i) {
        EXPECT_EQ(again.ticks[i].aperture, r.ticks[i].aperture);
        EXPECT_EQ(again.ticks[i].ball_diameter, r.ticks[i].ball_diameter);
        EXPECT_EQ(again.ticks[i].intensities, r.ticks[i].intensities);
    }
    std::filesystem::remove(path);
}

TEST(Session, RecorderWritesLines) {
    const auto path = std::filesystem::temp_directory_path() / "tactile_recorder.jsonl";
    {
        SessionRecorder rec(path);
        rec.write(config_line(PipelineConfig{}, "serve"));
        TickRecord t;
        t.tick = 3;
        rec.write(tick_line(t));
    }
    const SessionRecord back = read_session(path);
    EXPECT_EQ(back.mode, "serve");
    ASSERT_EQ(back.ticks.size(), 1u);
    EXPECT_EQ(back.ticks[0].tick, 3u);
    std::filesystem::remove(path);
}

TEST(Robustness, MostDrawsFavourFeedback) {
    const auto outcomes = run_robustness(PipelineConfig{}, 5);
    int wins = 0;
    for (const auto& o : outcomes) wins += o.feedback_gentler() ? 1 : 0;
    EXPECT_GE(wins, 4);
}
