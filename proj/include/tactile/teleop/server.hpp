#pragma once

// Real-time host for the pipeline. One thread ticks the pipeline at the
// configured rate; each client connection (raw TCP or web socket) gets a
// reader thread that feeds GRIP_CMD/CONTROL into the pipeline's fifos and a
// writer thread that forwards the latest HAPTIC_CMD, FORCE, FLOW_FIELD and
// SENSOR_FRAME after every tick.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tactile/teleop/pipeline.hpp"
#include "tactile/teleop/session.hpp"
#include "tactile/wire/codec.hpp"
#include "tactile/wire/socket.hpp"
#include "tactile/wire/websocket.hpp"

namespace tactile::teleop {

struct ServerOptions {
    std::string host = "127.0.0.1";
    int tcp_port = 7455;  // 0 picks a free port, negative disables
    int ws_port = 7456;
    std::filesystem::path session_path;  // empty: no session log
    std::filesystem::path static_dir;    // served to plain HTTP GETs on the web-socket port
};

struct ServerStats {
    std::uint64_t ticks = 0;
    std::uint64_t grip_received = 0;
    std::uint64_t grip_consumed = 0;
    std::uint64_t sensor_frames_sent = 0;
    std::uint64_t max_sensor_lag = 0;
    std::uint64_t clients = 0;
    double mean_latency_ms = 0.0;
};

class Server {
public:
    Server(PipelineConfig cfg, ServerOptions opts) : opts_(std::move(opts)), pipe_(std::move(cfg)) {
        grip_tx_ = pipe_.take_grip_sender();
        control_tx_ = pipe_.take_control_sender();
    }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;
    ~Server() { stop(); }

    void start() {
        if (opts_.tcp_port >= 0) {
            tcp_listener_ = wire::listen_tcp(opts_.host, opts_.tcp_port);
            tcp_port_ = wire::bound_port(tcp_listener_);
            threads_.emplace_back([this] { accept_loop(tcp_listener_, false); });
        }
        if (opts_.ws_port >= 0) {
            ws_listener_ = wire::listen_tcp(opts_.host, opts_.ws_port);
            ws_port_ = wire::bound_port(ws_listener_);
            threads_.emplace_back([this] { accept_loop(ws_listener_, true); });
        }
        if (!opts_.session_path.empty()) {
            recorder_ = std::make_unique<SessionRecorder>(opts_.session_path);
            recorder_->write(config_line(pipe_.config(), "serve"));
        }
        pipe_.on_tick([this](const TickRecord& t) {
            grip_consumed_ += t.grip.size();
            if (recorder_) recorder_->write(tick_line(t));
        });
        threads_.emplace_back([this] { tick_loop(); });
    }

    /// Stops ticking, disconnects clients, and finalizes the session log.
    void stop() {
        if (stopping_.exchange(true)) return;
        for (auto& t : threads_)
            if (t.joinable()) t.join();
        threads_.clear();
        {
            std::lock_guard lock(clients_mutex_);
            for (auto& c : clients_) c->sock.shutdown();
        }
        std::list<std::shared_ptr<Client>> clients;
        {
            std::lock_guard lock(clients_mutex_);
            clients.swap(clients_);
        }
        for (auto& c : clients) c->join();
        if (recorder_) {
            recorder_->write(summary_line(summarize(pipe_.ticks())));
            recorder_->close();
        }
    }

    int tcp_port() const noexcept { return tcp_port_; }
    int ws_port() const noexcept { return ws_port_; }

    ServerStats stats() const {
        ServerStats s;
        s.ticks = ticks_.load();
        s.grip_received = grip_received_.load();
        s.grip_consumed = grip_consumed_.load();
        s.sensor_frames_sent = sensor_sent_.load();
        s.max_sensor_lag = max_sensor_lag_.load();
        s.clients = clients_seen_.load();
        std::lock_guard lock(latency_mutex_);
        s.mean_latency_ms = latency_count_ == 0 ? 0.0 : latency_sum_ / static_cast<double>(latency_count_);
        return s;
    }

    /// Only valid after stop().
    SessionRecord record() const { return pipe_.record("serve"); }

private:
    struct Client {
        wire::Socket sock;
        bool websocket = false;
        std::mutex write_mutex;
        std::atomic<bool> open{true};
        std::thread reader;
        std::thread writer;

        bool send(std::span<const std::uint8_t> frame) {
            std::lock_guard lock(write_mutex);
            if (!open) return false;
            const bool ok = websocket ? sock.write_all(wire::ws::frame(wire::ws::Opcode::binary, frame)) : sock.write_all(frame);
            if (!ok) open = false;
            return ok;
        }

        void join() {
            if (reader.joinable()) reader.join();
            if (writer.joinable()) writer.join();
        }
    };

    void tick_loop() {
        const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(pipe_.config().dt()));
        auto next = std::chrono::steady_clock::now();
        while (!stopping_) {
            const TickRecord t = pipe_.tick();
            ++ticks_;
            if (t.timestamp_ns != 0) {
                std::lock_guard lock(latency_mutex_);
                latency_sum_ += t.latency_ms;
                ++latency_count_;
            }
            next += period;
            const auto now = std::chrono::steady_clock::now();
            if (next < now) next = now;
            std::this_thread::sleep_until(next);
        }
    }

    void accept_loop(wire::Socket& listener, bool websocket) {
        while (!stopping_) {
            auto sock = wire::accept_for(listener, 50);
            if (!sock) continue;
            auto client = std::make_shared<Client>();
            client->sock = std::move(*sock);
            client->websocket = websocket;
            if (websocket && !upgrade(*client)) continue;
            ++clients_seen_;
            client->reader = std::thread([this, client] { read_loop(*client); });
            client->writer = std::thread([this, client] { write_loop(*client); });
            std::lock_guard lock(clients_mutex_);
            clients_.push_back(std::move(client));
        }
    }

    bool upgrade(Client& c) {
        auto req = wire::ws::read_http_request(c.sock);
        if (!req) return false;
        if (wire::ws::is_upgrade(*req)) return wire::ws::complete_handshake(c.sock, *req);
        serve_static(c.sock, *req);
        return false;
    }

    void serve_static(wire::Socket& s, const wire::ws::HttpRequest& req) {
        auto not_found = [&] {
            const std::string body = "not found\n";
            wire::ws::write_http(s, 404, "Not Found", "text/plain",
                                 std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
        };
        if (opts_.static_dir.empty() || req.method != "GET" || req.target.find("..") != std::string::npos) return not_found();
        std::string rel = req.target.substr(0, req.target.find('?'));
        if (rel.empty() || rel == "/") rel = "/index.html";
        const auto path = opts_.static_dir / rel.substr(1);
        std::ifstream f(path, std::ios::binary);
        if (!f) return not_found();
        const std::vector<std::uint8_t> body((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        const auto ext = path.extension().string();
        const std::string type = ext == ".html" ? "text/html"
                                 : ext == ".js"  ? "text/javascript"
                                 : ext == ".css" ? "text/css"
                                                 : "application/octet-stream";
        wire::ws::write_http(s, 200, "OK", type, body);
    }

    void handle_frame(Client& c, std::span<const std::uint8_t> bytes) {
        const auto r = wire::try_decode(bytes);
        if (!r) return;
        const auto& d = *r.value;
        if (const auto* g = std::get_if<wire::GripCmd>(&d.message)) {
            ++grip_received_;
            std::lock_guard lock(input_mutex_);
            grip_tx_.send({g->aperture, g->max_rate});
        } else if (const auto* ctl = std::get_if<wire::Control>(&d.message)) {
            std::lock_guard lock(input_mutex_);
            control_tx_.send(*ctl);
        } else if (std::holds_alternative<wire::Heartbeat>(d.message)) {
            c.send(wire::encode(wire::Heartbeat{}, d.seq, wall_clock_ns()));
        }
    }

    void read_loop(Client& c) {
        try {
            while (!stopping_ && c.open) {
                if (!c.sock.wait_readable(50)) continue;
                if (c.websocket) {
                    auto m = wire::ws::read_message(c.sock, true);
                    if (!m || m->opcode == wire::ws::Opcode::close) break;
                    if (m->opcode == wire::ws::Opcode::ping) {
                        std::lock_guard lock(c.write_mutex);
                        c.sock.write_all(wire::ws::frame(wire::ws::Opcode::pong, m->payload));
                    } else if (m->opcode == wire::ws::Opcode::binary) {
                        handle_frame(c, m->payload);
                    }
                } else {
                    auto f = wire::read_frame(c.sock);
                    if (f.closed || f.error) break;
                    handle_frame(c, f.frame);
                }
            }
        } catch (const Error&) {
        }
        // a framing error leaves the stream unsynchronized; hang up so the peer sees EOF
        c.open = false;
        c.sock.shutdown();
    }

    void write_loop(Client& c) {
        auto sensor = pipe_.sensor_out().subscribe();
        auto force = pipe_.force_out().subscribe();
        auto haptic = pipe_.haptic_out().subscribe();
        auto flow = pipe_.flow_out().subscribe();
        try {
            while (!stopping_ && c.open) {
                auto frame = sensor.recv_for(std::chrono::milliseconds(50));
                if (!frame) continue;
                if (auto h = haptic.try_recv()) c.send(wire::encode(h->value.message, h->value.seq, h->value.timestamp_ns));
                if (auto f = force.try_recv()) c.send(wire::encode(f->value.message, f->value.seq, f->value.timestamp_ns));
                if (auto f = flow.try_recv()) c.send(wire::encode(f->value.message, f->value.seq, f->value.timestamp_ns));
                if (c.send(wire::encode(frame->value.message, frame->value.seq, frame->value.timestamp_ns))) {
                    ++sensor_sent_;
                    std::uint64_t prev = max_sensor_lag_.load();
                    while (frame->lag > prev && !max_sensor_lag_.compare_exchange_weak(prev, frame->lag)) {
                    }
                }
            }
        } catch (const Error&) {
        }
        c.open = false;
    }

    ServerOptions opts_;
    Pipeline pipe_;
    wire::Sender<GripInput> grip_tx_;
    wire::Sender<wire::Control> control_tx_;
    std::mutex input_mutex_;

    wire::Socket tcp_listener_;
    wire::Socket ws_listener_;
    int tcp_port_ = -1;
    int ws_port_ = -1;

    std::unique_ptr<SessionRecorder> recorder_;
    std::vector<std::thread> threads_;
    std::mutex clients_mutex_;
    std::list<std::shared_ptr<Client>> clients_;
    std::atomic<bool> stopping_{false};

    std::atomic<std::uint64_t> ticks_{0};
    std::atomic<std::uint64_t> grip_received_{0};
    std::atomic<std::uint64_t> grip_consumed_{0};
    std::atomic<std::uint64_t> sensor_sent_{0};
    std::atomic<std::uint64_t> max_sensor_lag_{0};
    std::atomic<std::uint64_t> clients_seen_{0};
    mutable std::mutex latency_mutex_;
    double latency_sum_ = 0.0;
    std::uint64_t latency_count_ = 0;
};

}  // namespace tactile::teleop
