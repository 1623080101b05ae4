#pragma once

// RFC 6455 subset for carrying wire frames to the browser console: the
// opening handshake, binary/close/ping/pong frames, and fragmented message
// reassembly. One binary message carries exactly one wire frame.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tactile/error.hpp"
#include "tactile/wire/codec.hpp"
#include "tactile/wire/socket.hpp"

namespace tactile::wire::ws {

enum class Opcode : std::uint8_t { continuation = 0x0, text = 0x1, binary = 0x2, close = 0x8, ping = 0x9, pong = 0xA };

inline constexpr std::size_t kMaxMessage = kMaxPayload + kHeaderSize + kCrcSize;
inline constexpr std::size_t kMaxRequest = 8192;

inline std::string base64(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = ::EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

/// Sec-WebSocket-Accept for a client key.
inline std::string accept_key(const std::string& client_key) {
    const std::string src = client_key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
    std::array<std::uint8_t, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (::EVP_Digest(src.data(), src.size(), digest.data(), &len, ::EVP_sha1(), nullptr) != 1)
        throw Error(Errc::io_error, "SHA-1 digest failed");
    return base64(std::span(digest.data(), len));
}

struct HttpRequest {
    std::string method;
    std::string target;
    std::map<std::string, std::string> headers;  // lower-case names

    std::string header(const std::string& name) const {
        auto it = headers.find(name);
        return it == headers.end() ? std::string() : it->second;
    }
};

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline std::optional<HttpRequest> read_http_request(Socket& s) {
    std::string raw;
    std::uint8_t c = 0;
    while (raw.size() < kMaxRequest) {
        if (!s.read_exact(std::span(&c, 1))) return std::nullopt;
        raw.push_back(static_cast<char>(c));
        if (raw.size() >= 4 && raw.compare(raw.size() - 4, 4, "\r\n\r\n") == 0) break;
    }
    if (raw.size() >= kMaxRequest) return std::nullopt;
    std::istringstream in(raw);
    HttpRequest req;
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    std::istringstream first(line);
    first >> req.method >> req.target;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) break;
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string value = line.substr(colon + 1);
        value.erase(0, value.find_first_not_of(" \t"));
        req.headers[lower(line.substr(0, colon))] = value;
    }
    return req;
}

inline bool is_upgrade(const HttpRequest& r) {
    return lower(r.header("upgrade")) == "websocket" && !r.header("sec-websocket-key").empty();
}

inline bool complete_handshake(Socket& s, const HttpRequest& r) {
    const std::string resp =
        "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: " +
        accept_key(r.header("sec-websocket-key")) + "\r\n\r\n";
    return s.write_all(std::span(reinterpret_cast<const std::uint8_t*>(resp.data()), resp.size()));
}

inline bool write_http(Socket& s, int status, const std::string& reason, const std::string& content_type,
                       std::span<const std::uint8_t> body) {
    const std::string head = "HTTP/1.1 " + std::to_string(status) + " " + reason + "\r\nContent-Type: " + content_type +
                             "\r\nContent-Length: " + std::to_string(body.size()) + "\r\nConnection: close\r\n\r\n";
    return s.write_all(std::span(reinterpret_cast<const std::uint8_t*>(head.data()), head.size())) && s.write_all(body);
}

inline std::vector<std::uint8_t> frame(Opcode op, std::span<const std::uint8_t> payload, bool mask = false) {
    std::vector<std::uint8_t> out;
    out.reserve(payload.size() + 14);
    out.push_back(static_cast<std::uint8_t>(0x80 | static_cast<std::uint8_t>(op)));
    const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
    if (payload.size() < 126) {
        out.push_back(static_cast<std::uint8_t>(mask_bit | payload.size()));
    } else if (payload.size() <= 0xFFFF) {
        out.push_back(mask_bit | 126);
        out.push_back(static_cast<std::uint8_t>(payload.size() >> 8));
        out.push_back(static_cast<std::uint8_t>(payload.size()));
    } else {
        out.push_back(mask_bit | 127);
        for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(payload.size()) >> (8 * i)));
    }
    if (!mask) {
        out.insert(out.end(), payload.begin(), payload.end());
        return out;
    }
    static thread_local std::mt19937 gen{std::random_device{}()};
    std::array<std::uint8_t, 4> key{};
    for (auto& k : key) k = static_cast<std::uint8_t>(gen());
    out.insert(out.end(), key.begin(), key.end());
    for (std::size_t i = 0; i < payload.size(); ++i) out.push_back(payload[i] ^ key[i % 4]);
    return out;
}

struct Message {
    Opcode opcode = Opcode::binary;
    std::vector<std::uint8_t> payload;
};

/// Reads one complete message, reassembling fragments. Control frames that
/// arrive between fragments are returned on their own. require_mask is set
/// on the server side, where unmasked client frames are a protocol error.
inline std::optional<Message> read_message(Socket& s, bool require_mask) {
    Message msg;
    bool in_fragment = false;
    for (;;) {
        std::array<std::uint8_t, 2> h{};
        if (!s.read_exact(h)) return std::nullopt;
        const bool fin = (h[0] & 0x80) != 0;
        const auto op = static_cast<Opcode>(h[0] & 0x0F);
        const bool masked = (h[1] & 0x80) != 0;
        if (require_mask && !masked) return std::nullopt;
        std::uint64_t len = h[1] & 0x7F;
        if (len == 126) {
            std::array<std::uint8_t, 2> e{};
            if (!s.read_exact(e)) return std::nullopt;
            len = (std::uint64_t{e[0]} << 8) | e[1];
        } else if (len == 127) {
            std::array<std::uint8_t, 8> e{};
            if (!s.read_exact(e)) return std::nullopt;
            len = 0;
            for (auto b : e) len = (len << 8) | b;
        }
        const bool control = (static_cast<std::uint8_t>(op) & 0x08) != 0;
        if (control && (len > 125 || !fin)) return std::nullopt;
        if (len > kMaxMessage || (!control && msg.payload.size() + len > kMaxMessage)) return std::nullopt;
        std::array<std::uint8_t, 4> key{};
        if (masked && !s.read_exact(key)) return std::nullopt;
        std::vector<std::uint8_t> data(static_cast<std::size_t>(len));
        if (!s.read_exact(data)) return std::nullopt;
        if (masked)
            for (std::size_t i = 0; i < data.size(); ++i) data[i] ^= key[i % 4];

        if (control) return Message{op, std::move(data)};
        if (op == Opcode::continuation) {
            if (!in_fragment) return std::nullopt;
        } else {
            if (in_fragment) return std::nullopt;
            msg.opcode = op;
            in_fragment = true;
        }
        msg.payload.insert(msg.payload.end(), data.begin(), data.end());
        if (fin) return msg;
    }
}

/// Client side of the opening handshake (used by tests and tools).
inline Socket connect(const std::string& host, int port, const std::string& path = "/") {
    Socket s = connect_tcp(host, port);
    const std::string key = "dGhlIHNhbXBsZSBub25jZQ==";
    const std::string req = "GET " + path + " HTTP/1.1\r\nHost: " + host + "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n" +
                            "Sec-WebSocket-Key: " + key + "\r\nSec-WebSocket-Version: 13\r\n\r\n";
    if (!s.write_all(std::span(reinterpret_cast<const std::uint8_t*>(req.data()), req.size())))
        throw Error(Errc::disconnected, "websocket handshake write failed");
    std::string resp;
    std::uint8_t c = 0;
    while (resp.size() < kMaxRequest && !(resp.size() >= 4 && resp.compare(resp.size() - 4, 4, "\r\n\r\n") == 0)) {
        if (!s.read_exact(std::span(&c, 1))) throw Error(Errc::disconnected, "websocket handshake read failed");
        resp.push_back(static_cast<char>(c));
    }
    if (resp.rfind("HTTP/1.1 101", 0) != 0 || resp.find(accept_key(key)) == std::string::npos)
        throw Error(Errc::disconnected, "websocket handshake rejected");
    return s;
}

}  // namespace tactile::wire::ws
