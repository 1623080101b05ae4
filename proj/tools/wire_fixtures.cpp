// Writes one golden frame per message type; the console codec checks its
// encoder against these byte for byte.
//
//   wire_fixtures <dir>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "tactile/wire/codec.hpp"

using namespace tactile::wire;

namespace {

std::vector<std::pair<std::string, Message>> fixtures() {
    SensorFrame sensor{4, 3, 0, {}};
    for (int i = 0; i < 12; ++i) sensor.pixels.push_back(static_cast<std::uint8_t>(i * 20));

    FlowFieldMsg flow;
    flow.vectors.push_back({30.0f, 30.0f, 1.5f, -0.25f, 1});
    flow.vectors.push_back({62.5f, 30.0f, 0.0f, 0.0f, 0});

    HapticCmd haptic;
    const double levels[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int i = 0; i < 5; ++i) haptic.intensity[i] = to_fixed(levels[i]);

    return {
        {"sensor_frame", sensor},
        {"flow_field", flow},
        {"force", ForceMsg{0.5f, -1.25f, 2.0f, 40.0f, 2.5f, 97}},
        {"haptic_cmd", haptic},
        {"grip_cmd", GripCmd{0.375f, 0.0625f}},
        {"rig_telemetry", RigTelemetry{{0.004f, 1.0f, 0.0f, 1.0f, 5.0f, 0.0f}}},
        {"control", Control{ControlCode::feedback_off}},
        {"heartbeat", Heartbeat{}},
    };
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: wire_fixtures <dir>\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    std::filesystem::create_directories(dir);
    std::uint32_t seq = 0;
    for (const auto& [name, msg] : fixtures()) {
        for (bool crc : {false, true}) {
            // HEARTBEAT golden: seq 0, ts 0, no CRC.
            const bool golden = name == "heartbeat" && !crc;
            const auto bytes = encode(msg, golden ? 0 : seq, golden ? 0 : 1'700'000'000'000'000'000ull + seq, crc);
            std::ofstream f(dir / (name + (crc ? "_crc" : "") + ".bin"), std::ios::binary);
            f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
            if (!f) {
                std::cerr << "write failed: " << name << '\n';
                return 1;
            }
        }
        ++seq;
    }
    return 0;
}
