#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "tactile/teleop/server.hpp"

using namespace tactile;
using namespace tactile::teleop;
using namespace std::chrono_literals;

namespace {

ServerOptions ephemeral() {
    ServerOptions o;
    o.tcp_port = 0;
    o.ws_port = 0;
    return o;
}

std::vector<std::uint8_t> as_bytes(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(Server, TcpStreamsAndAcceptsGrip) {
    Server server(PipelineConfig{}, ephemeral());
    server.start();
    wire::Socket s = wire::connect_tcp("127.0.0.1", server.tcp_port());
    ASSERT_TRUE(s.write_all(wire::encode(wire::GripCmd{0.5f, 1.0f}, 1, 0)));
    ASSERT_TRUE(s.write_all(wire::encode(wire::Heartbeat{}, 42, 0)));
    bool saw_sensor = false, saw_haptic = false, saw_heartbeat = false;
    const auto deadline = std::chrono::steady_clock::now() + 5s;
    while (std::chrono::steady_clock::now() < deadline && !(saw_sensor && saw_haptic && saw_heartbeat)) {
        if (!s.wait_readable(100)) continue;
        const auto f = wire::read_frame(s);
        ASSERT_FALSE(f.closed);
        ASSERT_FALSE(f.error.has_value());
        const auto d = wire::decode(f.frame);
        saw_sensor |= std::holds_alternative<wire::SensorFrame>(d.message);
        saw_haptic |= std::holds_alternative<wire::HapticCmd>(d.message);
        saw_heartbeat |= std::holds_alternative<wire::Heartbeat>(d.message) && d.seq == 42;
    }
    EXPECT_TRUE(saw_sensor);
    EXPECT_TRUE(saw_haptic);
    EXPECT_TRUE(saw_heartbeat);
    // the grip is consumed on the next tick
    for (int i = 0; i < 100 && server.stats().grip_consumed == 0; ++i) std::this_thread::sleep_for(10ms);
    s.close();
    server.stop();
    const ServerStats st = server.stats();
    EXPECT_EQ(st.grip_received, 1u);
    EXPECT_EQ(st.grip_consumed, 1u);
    EXPECT_GT(st.ticks, 0u);
}

TEST(Server, WebSocketCarriesFrames) {
    Server server(PipelineConfig{}, ephemeral());
    server.start();
    wire::Socket s = wire::ws::connect("127.0.0.1", server.ws_port());
    const auto grip = wire::encode(wire::GripCmd{0.4f, 0.5f}, 7, 0);
    ASSERT_TRUE(s.write_all(wire::ws::frame(wire::ws::Opcode::binary, grip, true)));
    bool saw_force = false;
    const auto deadline = std::chrono::steady_clock::now() + 5s;
    while (std::chrono::steady_clock::now() < deadline && !saw_force) {
        if (!s.wait_readable(100)) continue;
        const auto m = wire::ws::read_message(s, false);
        ASSERT_TRUE(m.has_value());
        ASSERT_EQ(m->opcode, wire::ws::Opcode::binary);
        const auto d = wire::decode(m->payload);
        EXPECT_EQ(d.consumed, m->payload.size());  // one frame per message
        saw_force |= std::holds_alternative<wire::ForceMsg>(d.message);
    }
    EXPECT_TRUE(saw_force);
    s.close();
    server.stop();
    EXPECT_EQ(server.stats().grip_received, 1u);
}

TEST(Server, ServesStaticFiles) {
    const auto dir = std::filesystem::temp_directory_path() / "tactile_static";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "index.html") << "<html>console</html>";
    ServerOptions o = ephemeral();
    o.static_dir = dir;
    Server server(PipelineConfig{}, o);
    server.start();

    auto get = [&](const std::string& target) {
        wire::Socket s = wire::connect_tcp("127.0.0.1", server.ws_port());
        const auto req = as_bytes("GET " + target + " HTTP/1.1\r\nHost: x\r\n\r\n");
        EXPECT_TRUE(s.write_all(req));
        std::string resp;
        std::uint8_t c = 0;
        while (s.read_exact(std::span(&c, 1))) resp.push_back(static_cast<char>(c));
        return resp;
    };
    const std::string ok = get("/");
    EXPECT_EQ(ok.rfind("HTTP/1.1 200", 0), 0u);
    EXPECT_NE(ok.find("<html>console</html>"), std::string::npos);
    EXPECT_NE(ok.find("text/html"), std::string::npos);
    EXPECT_EQ(get("/missing.js").rfind("HTTP/1.1 404", 0), 0u);
    EXPECT_EQ(get("/../etc/passwd").rfind("HTTP/1.1 404", 0), 0u);
    server.stop();
    std::filesystem::remove_all(dir);
}

TEST(Server, SessionLogWritten) {
    const auto path = std::filesystem::temp_directory_path() / "tactile_serve.jsonl";
    ServerOptions o = ephemeral();
    o.session_path = path;
    {
        Server server(PipelineConfig{}, o);
        server.start();
        std::this_thread::sleep_for(300ms);
        server.stop();
    }
    const SessionRecord r = read_session(path);
    EXPECT_EQ(r.mode, "serve");
    EXPECT_GT(r.ticks.size(), 2u);
    EXPECT_EQ(r.summary.ticks, r.ticks.size());
    std::filesystem::remove(path);
}

TEST(Server, BadMagicClosesConnection) {
    Server server(PipelineConfig{}, ephemeral());
    server.start();
    wire::Socket s = wire::connect_tcp("127.0.0.1", server.tcp_port());
    std::vector<std::uint8_t> junk(32, 0xAB);
    ASSERT_TRUE(s.write_all(junk));
    // the server drops the connection; reads eventually hit EOF
    bool closed = false;
    const auto deadline = std::chrono::steady_clock::now() + 3s;
    while (std::chrono::steady_clock::now() < deadline && !closed) {
        if (!s.wait_readable(100)) continue;
        const auto f = wire::read_frame(s);
        closed = f.closed;
    }
    EXPECT_TRUE(closed);
    server.stop();
}
