#pragma once

// Minimal blocking POSIX TCP helpers.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tactile/error.hpp"
#include "tactile/wire/codec.hpp"

namespace tactile::wire {

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            close();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close(); }

    int fd() const noexcept { return fd_; }
    bool is_open() const noexcept { return fd_ >= 0; }

    void close() noexcept {
        if (fd_ >= 0) ::close(std::exchange(fd_, -1));
    }

    /// Wakes any thread blocked in read on this socket.
    void shutdown() noexcept {
        if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
    }

    bool read_exact(std::span<std::uint8_t> buf) {
        std::size_t got = 0;
        while (got < buf.size()) {
            const ssize_t n = ::recv(fd_, buf.data() + got, buf.size() - got, 0);
            if (n == 0) return false;
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            got += static_cast<std::size_t>(n);
        }
        return true;
    }

    bool write_all(std::span<const std::uint8_t> buf) {
        std::size_t sent = 0;
        while (sent < buf.size()) {
            const ssize_t n = ::send(fd_, buf.data() + sent, buf.size() - sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                return false;
            }
            sent += static_cast<std::size_t>(n);
        }
        return true;
    }

    /// True when data (or EOF) is ready within timeout_ms.
    bool wait_readable(int timeout_ms) const {
        pollfd p{fd_, POLLIN, 0};
        return ::poll(&p, 1, timeout_ms) > 0;
    }

private:
    int fd_ = -1;
};

inline sockaddr_in make_addr(const std::string& host, int port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (host.empty() || host == "0.0.0.0") {
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
    } else if (host == "localhost") {
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    } else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw Error(Errc::invalid_config, "not an IPv4 address: " + host);
    }
    return addr;
}

/// Listening socket; port 0 picks an ephemeral port (see bound_port).
inline Socket listen_tcp(const std::string& host, int port, int backlog = 16) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.is_open()) throw Error(Errc::io_error, std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const sockaddr_in addr = make_addr(host, port);
    if (::bind(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
        throw Error(Errc::io_error, "bind " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    if (::listen(s.fd(), backlog) != 0) throw Error(Errc::io_error, std::string("listen: ") + std::strerror(errno));
    return s;
}

inline int bound_port(const Socket& s) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) return -1;
    return ntohs(addr.sin_port);
}

/// Accepts one connection, giving up after timeout_ms.
inline std::optional<Socket> accept_for(const Socket& listener, int timeout_ms) {
    if (!listener.wait_readable(timeout_ms)) return std::nullopt;
    const int fd = ::accept(listener.fd(), nullptr, nullptr);
    if (fd < 0) return std::nullopt;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return Socket(fd);
}

inline Socket connect_tcp(const std::string& host, int port) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.is_open()) throw Error(Errc::io_error, std::string("socket: ") + std::strerror(errno));
    const sockaddr_in addr = make_addr(host, port);
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
        throw Error(Errc::disconnected, "connect " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    const int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return s;
}

/// Reads one raw frame from a byte stream. Returns the header error when the
/// stream is not positioned on a valid frame; the caller should drop the
/// connection since the stream cannot be resynchronized.
struct StreamRead {
    std::vector<std::uint8_t> frame;
    std::optional<Errc> error;
    bool closed = false;
};

inline StreamRead read_frame(Socket& s) {
    StreamRead r;
    r.frame.resize(kHeaderSize);
    if (!s.read_exact(r.frame)) {
        r.closed = true;
        return r;
    }
    FrameHeader h;
    if (auto err = parse_header(r.frame, h)) {
        r.error = err;
        return r;
    }
    r.frame.resize(h.frame_size());
    if (!s.read_exact(std::span(r.frame).subspan(kHeaderSize))) r.closed = true;
    return r;
}

}  // namespace tactile::wire
