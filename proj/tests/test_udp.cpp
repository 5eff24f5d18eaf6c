#include <doctest.h>

#include "btsleuth/udp.hpp"

#include <thread>

using namespace btsleuth;

TEST_CASE("loopback datagram round-trip") {
    UdpSocket a(Endpoint6{{127, 0, 0, 1}, 0});
    UdpSocket b(Endpoint6{{127, 0, 0, 1}, 0});
    Bytes msg = bytes_of("hello");
    a.send_to(msg, b.local_endpoint());
    auto got = b.recv_from(2000);
    REQUIRE(got.has_value());
    CHECK(got->first == msg);
    CHECK(got->second == a.local_endpoint());
}

TEST_CASE("recv timeout returns nullopt") {
    UdpSocket a(Endpoint6{{127, 0, 0, 1}, 0});
    auto got = a.recv_from(50);
    CHECK_FALSE(got.has_value());
}

TEST_CASE("whole loopback block is bindable") {
    UdpSocket a(Endpoint6{{127, 31, 0, 1}, 0});
    UdpSocket b(Endpoint6{{127, 31, 0, 2}, 0});
    CHECK(a.local_endpoint().ip == std::array<std::uint8_t, 4>{127, 31, 0, 1});
    Bytes msg = bytes_of("cross-address");
    a.send_to(msg, b.local_endpoint());
    auto got = b.recv_from(2000);
    REQUIRE(got.has_value());
    CHECK(got->second.ip == std::array<std::uint8_t, 4>{127, 31, 0, 1});
}

TEST_CASE("bind failure raises socket_unavailable") {
    CHECK_THROWS_AS(UdpSocket(Endpoint6{{203, 0, 113, 1}, 1}), Error);
}

TEST_CASE("multicast delivery reaches every joined listener") {
    Endpoint6 group{{239, 192, 11, 1}, 43838};
    std::array<std::uint8_t, 4> lo{127, 0, 0, 1};
    UdpSocket l1 = multicast_listener(group, lo);
    UdpSocket l2 = multicast_listener(group, lo);

    UdpSocket sender(Endpoint6{{127, 0, 0, 1}, 0});
    sender.setup_multicast_send(lo, true);
    Bytes msg = bytes_of("ping-all");
    sender.send_to(msg, group);

    auto r1 = l1.recv_from(2000);
    auto r2 = l2.recv_from(2000);
    REQUIRE(r1.has_value());
    REQUIRE(r2.has_value());
    CHECK(r1->first == msg);
    CHECK(r2->first == msg);
    CHECK(r1->second == sender.local_endpoint());
}

TEST_CASE("shutdown wakes a blocked receiver") {
    UdpSocket a(Endpoint6{{127, 0, 0, 1}, 0});
    std::thread waker([&a] {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        a.shutdown();
    });
    auto got = a.recv_from(5000);
    waker.join();
    CHECK_FALSE(got.has_value());
}
