#pragma once

// Random wire messages for round-trip and fuzz tests.

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tactile/rng.hpp"
#include "tactile/wire/codec.hpp"

namespace tactile::testutil {

/// Any finite float, drawn from raw bits so every exponent shows up.
inline float random_float(Rng& rng) {
    for (;;) {
        const float f = std::bit_cast<float>(static_cast<std::uint32_t>(rng.bits()));
        if (std::isfinite(f)) return f;
    }
}

inline wire::Message random_message(Rng& rng, int type) {
    using namespace wire;
    switch (type) {
        case 1: {
            SensorFrame m;
            m.width = static_cast<std::uint16_t>(rng.below(40));
            m.height = static_cast<std::uint16_t>(rng.below(40));
            m.pixels.resize(static_cast<std::size_t>(m.width) * m.height);
            for (auto& p : m.pixels) p = static_cast<std::uint8_t>(rng.bits());
            return m;
        }
        case 2: {
            FlowFieldMsg m;
            m.vectors.resize(rng.below(80));
            for (auto& v : m.vectors)
                v = {random_float(rng), random_float(rng), random_float(rng), random_float(rng),
                     static_cast<std::uint8_t>(rng.below(2))};
            return m;
        }
        case 3:
            return ForceMsg{random_float(rng), random_float(rng), random_float(rng), random_float(rng),
                            random_float(rng), static_cast<std::uint8_t>(rng.below(101))};
        case 4: {
            HapticCmd m;
            for (auto& v : m.intensity) v = static_cast<std::uint16_t>(rng.bits());
            return m;
        }
        case 5:
            return GripCmd{static_cast<float>(rng.uniform()), random_float(rng)};
        case 6: {
            RigTelemetry m;
            for (auto& v : m.values) v = random_float(rng);
            return m;
        }
        case 7:
            return Control{static_cast<ControlCode>(rng.below(4))};
        case 8:
            return Heartbeat{};
        default: {
            Unknown m;
            m.msg_type = static_cast<std::uint8_t>(9 + rng.below(247));
            m.payload.resize(rng.below(64));
            for (auto& b : m.payload) b = static_cast<std::uint8_t>(rng.bits());
            return m;
        }
    }
}

}  // namespace tactile::testutil
