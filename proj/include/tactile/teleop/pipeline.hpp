#pragma once

// One pipeline tick: grip command -> ball contact -> gel deformation ->
// rendered frame -> marker flow against the reference frame -> force
// estimate -> haptic command -> latest-wins publication.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tactile/error.hpp"
#include "tactile/flowtrack.hpp"
#include "tactile/forceest.hpp"
#include "tactile/gelsim.hpp"
#include "tactile/hapticmap.hpp"
#include "tactile/teleop/ball.hpp"
#include "tactile/teleop/config.hpp"
#include "tactile/teleop/session.hpp"
#include "tactile/wire/channel.hpp"
#include "tactile/wire/codec.hpp"

namespace tactile::teleop {

inline std::uint64_t wall_clock_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch()).count());
}

template <typename T>
struct Stamped {
    T message;
    std::uint32_t seq = 0;
    std::uint64_t timestamp_ns = 0;
};

/// Publishes each value to every subscriber's own latest-wins channel.
template <typename T>
class Fanout {
public:
    wire::Receiver<T> subscribe() {
        auto [tx, rx] = wire::make_channel<T>(wire::ChannelPolicy::latest_wins);
        std::lock_guard lock(mutex_);
        subscribers_.push_back(std::move(tx));
        return std::move(rx);
    }

    void publish(const T& value) {
        std::lock_guard lock(mutex_);
        for (auto it = subscribers_.begin(); it != subscribers_.end();) {
            try {
                it->send(value);
                ++it;
            } catch (const Error&) {
                it = subscribers_.erase(it);
            }
        }
    }

    std::size_t subscriber_count() const {
        std::lock_guard lock(mutex_);
        return subscribers_.size();
    }

private:
    mutable std::mutex mutex_;
    std::vector<wire::Sender<T>> subscribers_;
};

inline std::string_view to_string(wire::ControlCode c) {
    switch (c) {
        case wire::ControlCode::start: return "start";
        case wire::ControlCode::stop: return "stop";
        case wire::ControlCode::feedback_on: return "feedback_on";
        case wire::ControlCode::feedback_off: return "feedback_off";
    }
    return "unknown";
}

inline std::optional<wire::ControlCode> control_from_string(std::string_view s) {
    for (auto c : {wire::ControlCode::start, wire::ControlCode::stop, wire::ControlCode::feedback_on,
                   wire::ControlCode::feedback_off})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

inline wire::FlowFieldMsg to_message(const FlowField& flow) {
    wire::FlowFieldMsg m;
    m.vectors.reserve(flow.entries.size());
    for (const auto& e : flow.entries)
        m.vectors.push_back({static_cast<float>(e.base.x), static_cast<float>(e.base.y), static_cast<float>(e.delta.x),
                             static_cast<float>(e.delta.y), static_cast<std::uint8_t>(e.valid ? 1 : 0)});
    return m;
}

inline wire::ForceMsg to_message(const ForceEstimate& e) {
    return {static_cast<float>(e.wrench.fx), static_cast<float>(e.wrench.fy), static_cast<float>(e.wrench.fn),
            static_cast<float>(e.wrench.tau), static_cast<float>(e.total),
            static_cast<std::uint8_t>(std::lround(std::clamp(e.quality, 0.0, 1.0) * 100.0))};
}

inline wire::HapticCmd to_message(const HapticCommand& c) {
    wire::HapticCmd m;
    for (std::size_t i = 0; i < kFingerCount; ++i) m.intensity[i] = wire::to_fixed(c.intensities[i]);
    return m;
}

inline wire::SensorFrame to_message(const GelImage& img) {
    return {static_cast<std::uint16_t>(img.width), static_cast<std::uint16_t>(img.height), 0, img.pixels};
}

class Pipeline {
public:
    using Clock = std::function<std::uint64_t()>;

    explicit Pipeline(PipelineConfig cfg, Clock clock = wall_clock_ns)
        : cfg_(std::move(cfg)), clock_(std::move(clock)) {
        validate(cfg_);
        gel_ = apply_wrench(make_gel(cfg_.gel), Wrench{});
        reference_ = render(gel_);
        markers_ = detect_markers(reference_, cfg_.gel.marker_count());
        reference_pyramid_ = build_pyramid(reference_, cfg_.track.pyramid_levels);
        ball_ = make_ball(cfg_.ball);
        aperture_ = target_ = cfg_.max_aperture;
        speed_ = cfg_.gripper_speed;

        auto [gtx, grx] = wire::make_channel<GripInput>(wire::ChannelPolicy::fifo, 1024);
        grip_tx_ = std::move(gtx);
        grip_rx_ = std::move(grx);
        auto [ctx, crx] = wire::make_channel<wire::Control>(wire::ChannelPolicy::fifo, 64);
        control_tx_ = std::move(ctx);
        control_rx_ = std::move(crx);
    }

    /// Producer ends of the command fifos; each can be taken once.
    wire::Sender<GripInput> take_grip_sender() { return std::move(grip_tx_); }
    wire::Sender<wire::Control> take_control_sender() { return std::move(control_tx_); }

    Fanout<Stamped<wire::ForceMsg>>& force_out() { return force_out_; }
    Fanout<Stamped<wire::HapticCmd>>& haptic_out() { return haptic_out_; }
    Fanout<Stamped<wire::SensorFrame>>& sensor_out() { return sensor_out_; }
    Fanout<Stamped<wire::FlowFieldMsg>>& flow_out() { return flow_out_; }

    /// Marks the ball as lifted from the next tick on.
    void lift() { pending_events_.emplace_back("lift"); }

    /// Called with every finished tick, on the pipeline thread.
    void on_tick(std::function<void(const TickRecord&)> fn) { tick_listener_ = std::move(fn); }

    TickRecord tick() {
        TickRecord rec;
        rec.tick = tick_count_;
        rec.time = static_cast<double>(tick_count_) * cfg_.dt();
        ++tick_count_;

        drain_grip(rec);
        drain_control(rec);
        for (auto& e : pending_events_) {
            if (e == "lift") ball_.lifted = true;
            rec.events.push_back(std::move(e));
        }
        pending_events_.clear();

        if (running_) simulate(rec);

        rec.aperture = aperture_;
        rec.ball_diameter = ball_.current_diameter;
        rec.deformation_ratio = ball_.deformation_ratio();
        rec.lifted = ball_.lifted;
        rec.dropped = ball_.dropped;
        if (ball_.dropped && !drop_logged_) {
            rec.events.emplace_back("dropped");
            drop_logged_ = true;
        }
        ticks_.push_back(rec);
        if (tick_listener_) tick_listener_(rec);
        return rec;
    }

    const PipelineConfig& config() const noexcept { return cfg_; }
    const BallState& ball() const noexcept { return ball_; }
    double aperture() const noexcept { return aperture_; }
    bool feedback_enabled() const noexcept { return feedback_; }
    bool running() const noexcept { return running_; }
    const std::optional<ForceEstimate>& last_estimate() const noexcept { return last_estimate_; }
    const std::optional<HapticCommand>& last_haptic() const noexcept { return last_haptic_; }
    const std::optional<FlowField>& last_flow() const noexcept { return last_flow_; }
    const Wrench& last_truth() const noexcept { return last_truth_; }
    const std::vector<TickRecord>& ticks() const noexcept { return ticks_; }
    const MarkerSet& markers() const noexcept { return markers_; }

    SessionRecord record(std::string mode) const {
        return {cfg_, std::move(mode), ticks_, summarize(ticks_)};
    }

private:
    void drain_grip(TickRecord& rec) {
        if (!grip_rx_) return;
        try {
            while (auto g = grip_rx_.try_recv()) {
                rec.grip.push_back(g->value);
                target_ = std::clamp(g->value.aperture, 0.0, 1.0) * cfg_.max_aperture;
                speed_ = g->value.max_rate > 0.0 ? g->value.max_rate * cfg_.max_aperture : cfg_.gripper_speed;
            }
        } catch (const Error&) {
            grip_rx_.close();
        }
    }

    void drain_control(TickRecord& rec) {
        if (!control_rx_) return;
        try {
            while (auto c = control_rx_.try_recv()) {
                switch (c->value.code) {
                    case wire::ControlCode::start: running_ = true; break;
                    case wire::ControlCode::stop: running_ = false; break;
                    case wire::ControlCode::feedback_on: feedback_ = true; break;
                    case wire::ControlCode::feedback_off: feedback_ = false; break;
                }
                rec.events.push_back("control:" + std::string(to_string(c->value.code)));
            }
        } catch (const Error&) {
            control_rx_.close();
        }
    }

    void simulate(TickRecord& rec) {
        const double dt = cfg_.dt();
        const std::uint64_t ts = clock_();
        rec.timestamp_ns = ts;

        const double step = speed_ * dt;
        aperture_ = aperture_ + std::clamp(target_ - aperture_, -step, step);
        const BallStep bs = step_ball(ball_, aperture_, dt);
        ball_ = bs.ball;
        rec.contact_force = bs.contact_force;

        const double fn = std::min(bs.contact_force, cfg_.gel_force_limit);
        last_truth_ = {0.0, cfg_.shear_fraction * fn, fn, 0.0};
        try {
            gel_ = apply_wrench(std::move(gel_), last_truth_);
            const GelImage frame = render(gel_);
            FlowField flow = lk_flow(reference_pyramid_, build_pyramid(frame, cfg_.track.pyramid_levels),
                                     markers_.centroids, cfg_.track);
            const ForceEstimate est = estimate_from_flow(flow, cfg_.calibration);

            HapticCommand cmd = make_command(est.total, last_haptic_, cfg_.haptic, ts);
            if (!feedback_) cmd.intensities.fill(0.0);

            const auto seq = static_cast<std::uint32_t>(rec.tick);
            force_out_.publish({to_message(est), seq, ts});
            haptic_out_.publish({to_message(cmd), seq, ts});
            rec.latency_ms = static_cast<double>(clock_() - ts) * 1e-6;
            flow_out_.publish({to_message(flow), seq, ts});
            sensor_out_.publish({to_message(frame), seq, ts});

            rec.total_estimate = est.total;
            rec.intensities = cmd.intensities;
            last_estimate_ = est;
            last_haptic_ = cmd;
            last_flow_ = std::move(flow);
        } catch (const Error& e) {
            rec.events.push_back(std::string("fault:") + e.what());
            std::cerr << "tick " << rec.tick << " fault: " << e.what() << '\n';
        }
    }

    PipelineConfig cfg_;
    Clock clock_;

    GelState gel_;
    GelImage reference_;
    MarkerSet markers_;
    Pyramid reference_pyramid_;
    BallState ball_;
    double aperture_ = 0.0;
    double target_ = 0.0;
    double speed_ = 0.0;
    bool running_ = true;
    bool feedback_ = true;
    bool drop_logged_ = false;
    std::uint64_t tick_count_ = 0;
    std::vector<std::string> pending_events_;

    wire::Sender<GripInput> grip_tx_;
    wire::Receiver<GripInput> grip_rx_;
    wire::Sender<wire::Control> control_tx_;
    wire::Receiver<wire::Control> control_rx_;

    Fanout<Stamped<wire::ForceMsg>> force_out_;
    Fanout<Stamped<wire::HapticCmd>> haptic_out_;
    Fanout<Stamped<wire::SensorFrame>> sensor_out_;
    Fanout<Stamped<wire::FlowFieldMsg>> flow_out_;

    std::optional<ForceEstimate> last_estimate_;
    std::optional<HapticCommand> last_haptic_;
    std::optional<FlowField> last_flow_;
    Wrench last_truth_;
    std::vector<TickRecord> ticks_;
    std::function<void(const TickRecord&)> tick_listener_;
};

}  // namespace tactile::teleop
