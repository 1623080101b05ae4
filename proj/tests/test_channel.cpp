#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "tactile/teleop/pipeline.hpp"
#include "tactile/wire/channel.hpp"

using namespace tactile;
using namespace tactile::wire;
using namespace std::chrono_literals;

TEST(LatestWins, KeepsNewest) {
    auto [tx, rx] = make_channel<int>(ChannelPolicy::latest_wins);
    for (int v = 1; v <= 100; ++v) tx.send(v);
    const auto r = rx.recv();
    EXPECT_EQ(r.value, 100);
    EXPECT_EQ(r.index, 100u);
    EXPECT_EQ(r.lag, 0u);
    EXPECT_EQ(rx.dropped_count(), 99u);
    EXPECT_FALSE(rx.try_recv().has_value());
}

TEST(Fifo, OrderPreserved) {
    auto [tx, rx] = make_channel<char>(ChannelPolicy::fifo, 2);
    tx.send('a');
    tx.send('b');
    EXPECT_FALSE(tx.try_send('c'));
    EXPECT_EQ(rx.recv().value, 'a');
    EXPECT_EQ(rx.recv().value, 'b');
}

TEST(Fifo, BackpressureBlocksProducer) {
    auto [tx, rx] = make_channel<int>(ChannelPolicy::fifo, 1);
    tx.send(1);
    std::atomic<bool> sent{false};
    std::thread producer([&, tx = std::move(tx)]() mutable {
        tx.send(2);
        sent = true;
    });
    std::this_thread::sleep_for(50ms);
    EXPECT_FALSE(sent.load());
    EXPECT_EQ(rx.recv().value, 1);
    producer.join();
    EXPECT_TRUE(sent.load());
    EXPECT_EQ(rx.recv().value, 2);
}

TEST(Fifo, NoLossUnderLoad) {
    auto [tx, rx] = make_channel<int>(ChannelPolicy::fifo, 8);
    constexpr int n = 20000;
    std::thread producer([tx = std::move(tx)]() mutable {
        for (int i = 0; i < n; ++i) tx.send(i);
    });
    for (int i = 0; i < n; ++i) ASSERT_EQ(rx.recv().value, i);
    producer.join();
}

TEST(Channel, DisconnectedAfterSenderDrops) {
    auto [tx, rx] = make_channel<int>(ChannelPolicy::fifo, 4);
    tx.send(7);
    tx.close();
    EXPECT_EQ(rx.recv().value, 7);  // buffered values still arrive
    try {
        rx.recv();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::disconnected);
    }
    EXPECT_THROW(rx.try_recv(), Error);
}

TEST(Channel, DisconnectedAfterReceiverDrops) {
    auto [tx, rx] = make_channel<int>(ChannelPolicy::latest_wins);
    rx.close();
    EXPECT_THROW(tx.send(1), Error);
}

TEST(Channel, RecvForTimesOut) {
    auto [tx, rx] = make_channel<int>(ChannelPolicy::latest_wins);
    EXPECT_FALSE(rx.recv_for(10ms).has_value());
    tx.send(3);
    EXPECT_EQ(rx.recv_for(10ms)->value, 3);
}

TEST(LatestWins, StalenessBoundWithFastConsumer) {
    // Producer at rate r, consumer waiting on every value: lag stays <= 1.
    auto [tx, rx] = make_channel<int>(ChannelPolicy::latest_wins);
    std::thread producer([tx = std::move(tx)]() mutable {
        for (int i = 0; i < 200; ++i) {
            tx.send(i);
            std::this_thread::sleep_for(1ms);
        }
    });
    std::uint64_t max_lag = 0;
    try {
        for (;;) max_lag = std::max(max_lag, rx.recv().lag);
    } catch (const Error&) {
    }
    producer.join();
    EXPECT_LE(max_lag, 1u);
}

TEST(Fanout, EverySubscriberSeesLatest) {
    teleop::Fanout<int> out;
    auto a = out.subscribe();
    auto b = out.subscribe();
    out.publish(1);
    out.publish(2);
    EXPECT_EQ(a.recv().value, 2);
    EXPECT_EQ(b.recv().value, 2);
    b.close();
    out.publish(3);  // dead subscriber is pruned
    EXPECT_EQ(out.subscriber_count(), 1u);
    EXPECT_EQ(a.recv().value, 3);
}
