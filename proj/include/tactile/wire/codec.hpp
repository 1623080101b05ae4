#pragma once

// Length-prefixed binary framing. All integers and floats little-endian.
//
//   offset size field
//   0      2    magic 0x54 0x54
//   2      1    version (1)
//   3      1    msg_type
//   4      1    flags (bit0: CRC32 of payload follows the payload)
//   5      4    seq
//   9      8    timestamp_ns
//   17     4    payload_len (payload only, excluding CRC)
//   21     n    payload
//   21+n   4    CRC32 (IEEE) of payload, when flagged

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tactile/error.hpp"

namespace tactile::wire {

inline constexpr std::uint8_t kMagic0 = 0x54;
inline constexpr std::uint8_t kMagic1 = 0x54;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 21;
inline constexpr std::size_t kCrcSize = 4;
inline constexpr std::uint32_t kMaxPayload = 16u * 1024u * 1024u;
inline constexpr std::uint8_t kFlagCrc = 0x01;

enum class MsgType : std::uint8_t {
    sensor_frame = 0x01,
    flow_field = 0x02,
    force = 0x03,
    haptic_cmd = 0x04,
    grip_cmd = 0x05,
    rig_telemetry = 0x06,
    control = 0x07,
    heartbeat = 0x08,
};

struct SensorFrame {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::uint8_t format = 0;  // 0: gray8
    std::vector<std::uint8_t> pixels;
    friend bool operator==(const SensorFrame&, const SensorFrame&) = default;
};

struct FlowVector {
    float bx = 0, by = 0, dx = 0, dy = 0;
    std::uint8_t valid = 0;
    friend bool operator==(const FlowVector&, const FlowVector&) = default;
};

struct FlowFieldMsg {
    std::vector<FlowVector> vectors;
    friend bool operator==(const FlowFieldMsg&, const FlowFieldMsg&) = default;
};

struct ForceMsg {
    float fx = 0, fy = 0, fn = 0, tau = 0, total = 0;
    std::uint8_t quality_percent = 0;
    friend bool operator==(const ForceMsg&, const ForceMsg&) = default;
};

struct HapticCmd {
    std::array<std::uint16_t, 5> intensity{};  // round(intensity * 65535)
    friend bool operator==(const HapticCmd&, const HapticCmd&) = default;
};

struct GripCmd {
    float aperture = 0;  // [0, 1]
    float max_rate = 0;
    friend bool operator==(const GripCmd&, const GripCmd&) = default;
};

/// time, motor_pos, object_pos, tension, normal, regime (0 stuck, 1 slipping)
struct RigTelemetry {
    std::array<float, 6> values{};
    friend bool operator==(const RigTelemetry&, const RigTelemetry&) = default;
};

enum class ControlCode : std::uint8_t { start = 0, stop = 1, feedback_on = 2, feedback_off = 3 };

struct Control {
    ControlCode code = ControlCode::start;
    friend bool operator==(const Control&, const Control&) = default;
};

struct Heartbeat {
    friend bool operator==(const Heartbeat&, const Heartbeat&) = default;
};

/// A frame whose msg_type this build does not know; kept raw so it can be
/// skipped or forwarded.
struct Unknown {
    std::uint8_t msg_type = 0;
    std::vector<std::uint8_t> payload;
    friend bool operator==(const Unknown&, const Unknown&) = default;
};

using Message = std::variant<SensorFrame, FlowFieldMsg, ForceMsg, HapticCmd, GripCmd, RigTelemetry, Control, Heartbeat, Unknown>;

inline std::uint16_t to_fixed(double intensity) noexcept {
    const double c = intensity < 0.0 ? 0.0 : (intensity > 1.0 ? 1.0 : intensity);
    return static_cast<std::uint16_t>(c * 65535.0 + 0.5);
}

inline double from_fixed(std::uint16_t v) noexcept { return v / 65535.0; }

inline std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes) noexcept {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        crc = ::crc32(crc, bytes.data() + off, chunk);
        off += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

namespace detail {

class Writer {
public:
    explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t>& out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
    bool has(std::size_t n) const noexcept { return in_.size() - pos_ >= n; }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }
    std::uint8_t u8() { return in_[pos_++]; }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::span<const std::uint8_t> take(std::size_t n) {
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::uint64_t le(int n) {
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

struct PayloadVisitor {
    Writer& w;
    std::uint8_t& type;

    void operator()(const SensorFrame& m) const {
        type = static_cast<std::uint8_t>(MsgType::sensor_frame);
        w.u16(m.width);
        w.u16(m.height);
        w.u8(m.format);
        w.bytes(m.pixels);
    }
    void operator()(const FlowFieldMsg& m) const {
        type = static_cast<std::uint8_t>(MsgType::flow_field);
        w.u16(static_cast<std::uint16_t>(m.vectors.size()));
        for (const auto& v : m.vectors) {
            w.f32(v.bx);
            w.f32(v.by);
            w.f32(v.dx);
            w.f32(v.dy);
            w.u8(v.valid);
        }
    }
    void operator()(const ForceMsg& m) const {
        type = static_cast<std::uint8_t>(MsgType::force);
        for (float f : {m.fx, m.fy, m.fn, m.tau, m.total}) w.f32(f);
        w.u8(m.quality_percent);
    }
    void operator()(const HapticCmd& m) const {
        type = static_cast<std::uint8_t>(MsgType::haptic_cmd);
        w.u8(5);
        for (auto v : m.intensity) w.u16(v);
    }
    void operator()(const GripCmd& m) const {
        type = static_cast<std::uint8_t>(MsgType::grip_cmd);
        w.f32(m.aperture);
        w.f32(m.max_rate);
    }
    void operator()(const RigTelemetry& m) const {
        type = static_cast<std::uint8_t>(MsgType::rig_telemetry);
        for (float f : m.values) w.f32(f);
    }
    void operator()(const Control& m) const {
        type = static_cast<std::uint8_t>(MsgType::control);
        w.u8(static_cast<std::uint8_t>(m.code));
    }
    void operator()(const Heartbeat&) const { type = static_cast<std::uint8_t>(MsgType::heartbeat); }
    void operator()(const Unknown& m) const {
        type = m.msg_type;
        w.bytes(m.payload);
    }
};

inline void check_encodable(const Message& msg) {
    if (const auto* f = std::get_if<SensorFrame>(&msg)) {
        if (f->pixels.size() != static_cast<std::size_t>(f->width) * f->height)
            throw Error(Errc::shape_mismatch, "sensor frame pixel count does not match width x height");
        if (5 + f->pixels.size() > kMaxPayload) throw Error(Errc::oversize_payload, "sensor frame exceeds 16 MiB");
    } else if (const auto* fl = std::get_if<FlowFieldMsg>(&msg)) {
        if (fl->vectors.size() > 0xFFFF) throw Error(Errc::oversize_payload, "flow field holds more than 65535 vectors");
    } else if (const auto* u = std::get_if<Unknown>(&msg)) {
        if (u->msg_type >= 0x01 && u->msg_type <= 0x08)
            throw Error(Errc::shape_mismatch, "unknown-message wrapper carries a known msg_type");
        if (u->payload.size() > kMaxPayload) throw Error(Errc::oversize_payload, "payload exceeds 16 MiB");
    }
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const Message& msg, std::uint32_t seq, std::uint64_t timestamp_ns, bool with_crc = false) {
    detail::check_encodable(msg);
    std::vector<std::uint8_t> payload;
    std::uint8_t type = 0;
    detail::Writer pw(payload);
    std::visit(detail::PayloadVisitor{pw, type}, msg);
    if (payload.size() > kMaxPayload) throw Error(Errc::oversize_payload, "payload exceeds 16 MiB");

    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + payload.size() + (with_crc ? kCrcSize : 0));
    detail::Writer w(out);
    w.u8(kMagic0);
    w.u8(kMagic1);
    w.u8(kVersion);
    w.u8(type);
    w.u8(with_crc ? kFlagCrc : 0);
    w.u32(seq);
    w.u64(timestamp_ns);
    w.u32(static_cast<std::uint32_t>(payload.size()));
    w.bytes(payload);
    if (with_crc) w.u32(crc32_ieee(payload));
    return out;
}

struct FrameHeader {
    std::uint8_t version = kVersion;
    std::uint8_t msg_type = 0;
    std::uint8_t flags = 0;
    std::uint32_t seq = 0;
    std::uint64_t timestamp_ns = 0;
    std::uint32_t payload_len = 0;

    bool has_crc() const noexcept { return (flags & kFlagCrc) != 0; }
    std::size_t frame_size() const noexcept { return kHeaderSize + payload_len + (has_crc() ? kCrcSize : 0); }
};

struct Decoded {
    Message message;
    std::uint32_t seq = 0;
    std::uint64_t timestamp_ns = 0;
    std::size_t consumed = 0;  // bytes of the frame, header and CRC included
};

/// Error code or value; never throws and never allocates beyond payload_len.
struct DecodeOutcome {
    std::optional<Decoded> value;
    Errc error = Errc::truncated;

    explicit operator bool() const noexcept { return value.has_value(); }
};

/// Validates the fixed header. Needs kHeaderSize bytes.
inline std::optional<Errc> parse_header(std::span<const std::uint8_t> bytes, FrameHeader& h) noexcept {
    if (bytes.size() >= 1 && bytes[0] != kMagic0) return Errc::bad_magic;
    if (bytes.size() >= 2 && bytes[1] != kMagic1) return Errc::bad_magic;
    if (bytes.size() >= 3 && bytes[2] != kVersion) return Errc::bad_version;
    if (bytes.size() < kHeaderSize) return Errc::truncated;
    detail::Reader r(bytes);
    r.take(2);
    h.version = r.u8();
    h.msg_type = r.u8();
    h.flags = r.u8();
    h.seq = r.u32();
    h.timestamp_ns = r.u64();
    h.payload_len = r.u32();
    if (h.payload_len > kMaxPayload) return Errc::oversize;
    return std::nullopt;
}

namespace detail {

inline std::optional<Message> parse_payload(std::uint8_t type, std::span<const std::uint8_t> p) {
    Reader r(p);
    auto done = [&](Message m) -> std::optional<Message> {
        if (r.remaining() != 0) return std::nullopt;
        return m;
    };
    switch (static_cast<MsgType>(type)) {
        case MsgType::sensor_frame: {
            if (!r.has(5)) return std::nullopt;
            SensorFrame f;
            f.width = r.u16();
            f.height = r.u16();
            f.format = r.u8();
            const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
            if (f.format != 0 || r.remaining() != n) return std::nullopt;
            const auto px = r.take(n);
            f.pixels.assign(px.begin(), px.end());
            return done(std::move(f));
        }
        case MsgType::flow_field: {
            if (!r.has(2)) return std::nullopt;
            const std::size_t n = r.u16();
            if (r.remaining() != n * 17) return std::nullopt;
            FlowFieldMsg m;
            m.vectors.resize(n);
            for (auto& v : m.vectors) {
                v.bx = r.f32();
                v.by = r.f32();
                v.dx = r.f32();
                v.dy = r.f32();
                v.valid = r.u8();
            }
            return done(std::move(m));
        }
        case MsgType::force: {
            if (r.remaining() != 21) return std::nullopt;
            ForceMsg m;
            m.fx = r.f32();
            m.fy = r.f32();
            m.fn = r.f32();
            m.tau = r.f32();
            m.total = r.f32();
            m.quality_percent = r.u8();
            return done(m);
        }
        case MsgType::haptic_cmd: {
            if (r.remaining() != 11 || r.u8() != 5) return std::nullopt;
            HapticCmd m;
            for (auto& v : m.intensity) v = r.u16();
            return done(m);
        }
        case MsgType::grip_cmd: {
            if (r.remaining() != 8) return std::nullopt;
            GripCmd m;
            m.aperture = r.f32();
            m.max_rate = r.f32();
            return done(m);
        }
        case MsgType::rig_telemetry: {
            if (r.remaining() != 24) return std::nullopt;
            RigTelemetry m;
            for (auto& v : m.values) v = r.f32();
            return done(m);
        }
        case MsgType::control: {
            if (r.remaining() != 1) return std::nullopt;
            const std::uint8_t code = r.u8();
            if (code > static_cast<std::uint8_t>(ControlCode::feedback_off)) return std::nullopt;
            return done(Control{static_cast<ControlCode>(code)});
        }
        case MsgType::heartbeat:
            return done(Heartbeat{});
    }
    return Message{Unknown{type, std::vector<std::uint8_t>(p.begin(), p.end())}};
}

}  // namespace detail

/// Decodes the frame at the start of bytes; trailing bytes are left for the
/// caller (see Decoded::consumed).
inline DecodeOutcome try_decode(std::span<const std::uint8_t> bytes) noexcept {
    DecodeOutcome out;
    FrameHeader h;
    if (auto err = parse_header(bytes, h)) {
        out.error = *err;
        return out;
    }
    if (bytes.size() < h.frame_size()) {
        out.error = Errc::truncated;
        return out;
    }
    const auto payload = bytes.subspan(kHeaderSize, h.payload_len);
    if (h.has_crc()) {
        detail::Reader r(bytes.subspan(kHeaderSize + h.payload_len, kCrcSize));
        if (r.u32() != crc32_ieee(payload)) {
            out.error = Errc::crc_mismatch;
            return out;
        }
    }
    try {
        auto msg = detail::parse_payload(h.msg_type, payload);
        if (!msg) {
            out.error = Errc::malformed_payload;
            return out;
        }
        out.value = Decoded{std::move(*msg), h.seq, h.timestamp_ns, h.frame_size()};
    } catch (...) {  // allocation failure only
        out.error = Errc::oversize;
    }
    return out;
}

inline Decoded decode(std::span<const std::uint8_t> bytes) {
    auto r = try_decode(bytes);
    if (!r) throw Error(r.error, "frame decode failed");
    return std::move(*r.value);
}

inline MsgType type_of(const Message& m) {
    return std::visit(
        [](const auto& v) -> MsgType {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, SensorFrame>) return MsgType::sensor_frame;
            else if constexpr (std::is_same_v<T, FlowFieldMsg>) return MsgType::flow_field;
            else if constexpr (std::is_same_v<T, ForceMsg>) return MsgType::force;
            else if constexpr (std::is_same_v<T, HapticCmd>) return MsgType::haptic_cmd;
            else if constexpr (std::is_same_v<T, GripCmd>) return MsgType::grip_cmd;
            else if constexpr (std::is_same_v<T, RigTelemetry>) return MsgType::rig_telemetry;
            else if constexpr (std::is_same_v<T, Control>) return MsgType::control;
            else if constexpr (std::is_same_v<T, Heartbeat>) return MsgType::heartbeat;
            else return static_cast<MsgType>(v.msg_type);
        },
        m);
}

}  // namespace tactile::wire
