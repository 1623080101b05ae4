#pragma once

// Session logs: one JSON object per line. The first line is the config
// snapshot, then one "tick" line per pipeline tick, then the summary.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tactile/error.hpp"
#include "tactile/hapticmap.hpp"
#include "tactile/teleop/config.hpp"
#include "tactile/wire/channel.hpp"

namespace tactile::teleop {

struct GripInput {
    double aperture = 0.0;  // normalized [0, 1]
    double max_rate = 0.0;  // fraction of full aperture per second, <= 0 for the default speed

    friend bool operator==(const GripInput&, const GripInput&) = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GripInput, aperture, max_rate)

struct TickRecord {
    std::uint64_t tick = 0;
    double time = 0.0;                 // s of simulated time
    std::uint64_t timestamp_ns = 0;    // wall clock of the sensor frame
    std::vector<GripInput> grip;       // GRIP_CMDs consumed this tick, in order
    std::vector<std::string> events;   // lift, control:<code>, dropped, fault:<what>
    double aperture = 0.0;             // mm
    double contact_force = 0.0;        // N, ground truth from the ball
    double total_estimate = 0.0;       // N, from the tracked gel
    std::array<double, kFingerCount> intensities{};
    double ball_diameter = 0.0;        // mm
    double deformation_ratio = 0.0;
    bool lifted = false;
    bool dropped = false;
    double latency_ms = 0.0;           // sensor timestamp to haptic publish
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TickRecord, tick, time, timestamp_ns, grip, events, aperture, contact_force,
                                                total_estimate, intensities, ball_diameter, deformation_ratio, lifted,
                                                dropped, latency_ms)

struct SessionSummary {
    double peak_force = 0.0;
    double final_deformation_ratio = 0.0;
    bool dropped = false;
    double mean_latency_ms = 0.0;
    std::uint64_t ticks = 0;
    std::uint64_t faults = 0;
    std::uint64_t grip_commands = 0;

    /// Fields that depend only on the simulation, not on wall-clock timing.
    bool same_outcome(const SessionSummary& o) const noexcept {
        return peak_force == o.peak_force && final_deformation_ratio == o.final_deformation_ratio &&
               dropped == o.dropped && ticks == o.ticks && faults == o.faults && grip_commands == o.grip_commands;
    }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SessionSummary, peak_force, final_deformation_ratio, dropped,
                                                mean_latency_ms, ticks, faults, grip_commands)

struct SessionRecord {
    PipelineConfig config;
    std::string mode;  // naive, feedback, serve, replay
    std::vector<TickRecord> ticks;
    SessionSummary summary;
};

inline SessionSummary summarize(const std::vector<TickRecord>& ticks) {
    SessionSummary s;
    double latency = 0.0;
    std::uint64_t timed = 0;
    for (const auto& t : ticks) {
        s.peak_force = std::max(s.peak_force, t.contact_force);
        s.final_deformation_ratio = t.deformation_ratio;
        s.dropped = s.dropped || t.dropped;
        s.grip_commands += t.grip.size();
        bool fault = false;
        for (const auto& e : t.events) fault = fault || e.rfind("fault", 0) == 0;
        if (fault) {
            ++s.faults;
        } else {
            latency += t.latency_ms;
            ++timed;
        }
    }
    s.ticks = ticks.size();
    s.mean_latency_ms = timed == 0 ? 0.0 : latency / static_cast<double>(timed);
    return s;
}

inline std::string config_line(const PipelineConfig& c, const std::string& mode) {
    return nlohmann::json{{"type", "config"}, {"mode", mode}, {"config", c}}.dump();
}

inline std::string tick_line(const TickRecord& t) {
    nlohmann::json j = t;
    j["type"] = "tick";
    return j.dump();
}

inline std::string summary_line(const SessionSummary& s) {
    nlohmann::json j = s;
    j["type"] = "summary";
    return j.dump();
}

inline void write_session(const std::filesystem::path& path, const SessionRecord& rec) {
    std::ofstream f(path);
    if (!f) throw Error(Errc::io_error, "cannot open " + path.string());
    f << config_line(rec.config, rec.mode) << '\n';
    for (const auto& t : rec.ticks) f << tick_line(t) << '\n';
    f << summary_line(rec.summary) << '\n';
    if (!f) throw Error(Errc::io_error, "write failed: " + path.string());
}

/// Reads a session log. A log cut short (no summary line) is accepted and
/// summarized from its ticks.
inline SessionRecord read_session(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error(Errc::io_error, "cannot open " + path.string());
    SessionRecord rec;
    bool have_config = false, have_summary = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto type = j.at("type").get<std::string>();
            if (type == "config") {
                rec.config = j.at("config").get<PipelineConfig>();
                rec.mode = j.value("mode", "");
                have_config = true;
            } else if (type == "tick") {
                rec.ticks.push_back(j.get<TickRecord>());
            } else if (type == "summary") {
                rec.summary = j.get<SessionSummary>();
                have_summary = true;
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse_error, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_config) throw Error(Errc::parse_error, path.string() + ": missing config line");
    if (!have_summary) rec.summary = summarize(rec.ticks);
    return rec;
}

/// Sole writer of a session file. Lines arrive over a fifo channel and are
/// written and flushed by a dedicated thread, so a crash loses at most the
/// lines still in flight.
class SessionRecorder {
public:
    explicit SessionRecorder(const std::filesystem::path& path, std::size_t capacity = 4096) : out_(path) {
        if (!out_) throw Error(Errc::io_error, "cannot open " + path.string());
        auto [tx, rx] = wire::make_channel<std::string>(wire::ChannelPolicy::fifo, capacity);
        tx_ = std::move(tx);
        writer_ = std::thread([this, rx = std::move(rx)]() mutable {
            try {
                for (;;) {
                    auto line = rx.recv();
                    out_ << line.value << '\n';
                    out_.flush();
                }
            } catch (const Error&) {
                // sender closed
            }
        });
    }

    SessionRecorder(const SessionRecorder&) = delete;
    SessionRecorder& operator=(const SessionRecorder&) = delete;

    ~SessionRecorder() { close(); }

    void write(std::string line) { tx_.send(std::move(line)); }

    void close() {
        tx_.close();
        if (writer_.joinable()) writer_.join();
    }

private:
    std::ofstream out_;
    wire::Sender<std::string> tx_;
    std::thread writer_;
};

}  // namespace tactile::teleop
