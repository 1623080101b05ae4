#pragma once

// Single-producer single-consumer hand-off with two policies:
//   latest_wins  one slot, send never blocks, the consumer sees the newest
//                value and intermediate values may be dropped
//   fifo         bounded queue, send blocks while full, nothing is lost

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>

#include "tactile/error.hpp"

namespace tactile::wire {

enum class ChannelPolicy { latest_wins, fifo };

namespace detail {

template <typename T>
struct ChannelState {
    ChannelPolicy policy;
    std::size_t capacity;

    std::mutex mutex;
    std::condition_variable readable;
    std::condition_variable writable;
    std::deque<std::pair<T, std::uint64_t>> items;  // value, 1-based send index
    std::uint64_t sent = 0;
    std::uint64_t dropped = 0;
    bool sender_alive = true;
    bool receiver_alive = true;

    ChannelState(ChannelPolicy p, std::size_t cap) : policy(p), capacity(cap) {}
};

}  // namespace detail

template <typename T>
struct Received {
    T value;
    std::uint64_t index = 0;  // 1-based position in the send order
    std::uint64_t lag = 0;    // sends that happened after this one at receive time
};

template <typename T>
class Sender {
public:
    Sender() = default;
    explicit Sender(std::shared_ptr<detail::ChannelState<T>> s) : state_(std::move(s)) {}
    Sender(Sender&&) noexcept = default;
    Sender& operator=(Sender&& o) noexcept {
        if (this != &o) {
            close();
            state_ = std::move(o.state_);
        }
        return *this;
    }
    Sender(const Sender&) = delete;
    Sender& operator=(const Sender&) = delete;
    ~Sender() { close(); }

    /// latest_wins replaces the slot; fifo waits for room.
    void send(T value) {
        auto& s = checked();
        std::unique_lock lock(s.mutex);
        if (!s.receiver_alive) throw Error(Errc::disconnected, "receiver dropped");
        if (s.policy == ChannelPolicy::latest_wins) {
            if (!s.items.empty()) {
                s.items.clear();
                ++s.dropped;
            }
        } else {
            s.writable.wait(lock, [&] { return s.items.size() < s.capacity || !s.receiver_alive; });
            if (!s.receiver_alive) throw Error(Errc::disconnected, "receiver dropped");
        }
        s.items.emplace_back(std::move(value), ++s.sent);
        lock.unlock();
        s.readable.notify_one();
    }

    /// Non-blocking send. Returns false when a fifo is full.
    bool try_send(T value) {
        auto& s = checked();
        {
            std::lock_guard lock(s.mutex);
            if (!s.receiver_alive) throw Error(Errc::disconnected, "receiver dropped");
            if (s.policy == ChannelPolicy::fifo && s.items.size() >= s.capacity) return false;
            if (s.policy == ChannelPolicy::latest_wins && !s.items.empty()) {
                s.items.clear();
                ++s.dropped;
            }
            s.items.emplace_back(std::move(value), ++s.sent);
        }
        s.readable.notify_one();
        return true;
    }

    void close() noexcept {
        if (!state_) return;
        {
            std::lock_guard lock(state_->mutex);
            state_->sender_alive = false;
        }
        state_->readable.notify_all();
        state_.reset();
    }

    explicit operator bool() const noexcept { return static_cast<bool>(state_); }

private:
    detail::ChannelState<T>& checked() {
        if (!state_) throw Error(Errc::disconnected, "sender is closed");
        return *state_;
    }
    std::shared_ptr<detail::ChannelState<T>> state_;
};

template <typename T>
class Receiver {
public:
    Receiver() = default;
    explicit Receiver(std::shared_ptr<detail::ChannelState<T>> s) : state_(std::move(s)) {}
    Receiver(Receiver&&) noexcept = default;
    Receiver& operator=(Receiver&& o) noexcept {
        if (this != &o) {
            close();
            state_ = std::move(o.state_);
        }
        return *this;
    }
    Receiver(const Receiver&) = delete;
    Receiver& operator=(const Receiver&) = delete;
    ~Receiver() { close(); }

    /// Blocks until a value arrives. Throws disconnected once the sender is
    /// gone and nothing is buffered.
    Received<T> recv() {
        auto& s = checked();
        std::unique_lock lock(s.mutex);
        s.readable.wait(lock, [&] { return !s.items.empty() || !s.sender_alive; });
        return pop(s, lock);
    }

    template <class Rep, class Period>
    std::optional<Received<T>> recv_for(std::chrono::duration<Rep, Period> timeout) {
        auto& s = checked();
        std::unique_lock lock(s.mutex);
        if (!s.readable.wait_for(lock, timeout, [&] { return !s.items.empty() || !s.sender_alive; })) return std::nullopt;
        return pop(s, lock);
    }

    /// Non-blocking. Empty optional when nothing is buffered and the sender is
    /// still connected.
    std::optional<Received<T>> try_recv() {
        auto& s = checked();
        std::unique_lock lock(s.mutex);
        if (s.items.empty() && s.sender_alive) return std::nullopt;
        return pop(s, lock);
    }

    std::uint64_t sent_count() const {
        std::lock_guard lock(state_->mutex);
        return state_->sent;
    }

    std::uint64_t dropped_count() const {
        std::lock_guard lock(state_->mutex);
        return state_->dropped;
    }

    void close() noexcept {
        if (!state_) return;
        {
            std::lock_guard lock(state_->mutex);
            state_->receiver_alive = false;
            state_->items.clear();
        }
        state_->writable.notify_all();
        state_.reset();
    }

    explicit operator bool() const noexcept { return static_cast<bool>(state_); }

private:
    detail::ChannelState<T>& checked() {
        if (!state_) throw Error(Errc::disconnected, "receiver is closed");
        return *state_;
    }

    static Received<T> pop(detail::ChannelState<T>& s, std::unique_lock<std::mutex>& lock) {
        if (s.items.empty()) throw Error(Errc::disconnected, "sender dropped");
        auto [value, index] = std::move(s.items.front());
        s.items.pop_front();
        const std::uint64_t lag = s.sent - index;
        lock.unlock();
        s.writable.notify_one();
        return {std::move(value), index, lag};
    }

    std::shared_ptr<detail::ChannelState<T>> state_;
};

template <typename T>
std::pair<Sender<T>, Receiver<T>> make_channel(ChannelPolicy policy, std::size_t capacity = 1) {
    if (capacity < 1) throw Error(Errc::invalid_config, "channel capacity must be >= 1");
    auto state = std::make_shared<detail::ChannelState<T>>(policy, policy == ChannelPolicy::latest_wins ? 1 : capacity);
    return {Sender<T>(state), Receiver<T>(state)};
}

}  // namespace tactile::wire
