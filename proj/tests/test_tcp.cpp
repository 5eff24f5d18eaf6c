#include <doctest.h>

#include "btsleuth/tcp.hpp"

#include <thread>

using namespace btsleuth;

TEST_CASE("unit framing round-trips over loopback") {
    TcpListener listener(Endpoint6{{127, 0, 0, 1}, 0});
    TcpSocket client = TcpSocket::connect(listener.local_endpoint());
    auto server = listener.accept(2000);
    REQUIRE(server.has_value());

    Bytes msg = bytes_of("framed unit");
    client.send_unit(msg);
    auto got = server->recv_unit(2000);
    REQUIRE(got.has_value());
    CHECK(*got == msg);

    // Empty units are legal and keep the stream aligned.
    client.send_unit(Bytes{});
    client.send_unit(bytes_of("after empty"));
    CHECK(server->recv_unit(2000)->empty());
    CHECK(*server->recv_unit(2000) == bytes_of("after empty"));
}

TEST_CASE("several units in one burst stay separated") {
    TcpListener listener(Endpoint6{{127, 0, 0, 1}, 0});
    TcpSocket client = TcpSocket::connect(listener.local_endpoint());
    auto server = listener.accept(2000);
    REQUIRE(server.has_value());

    Bytes burst;
    for (int i = 0; i < 5; ++i) {
        Bytes unit(17 * (i + 1), static_cast<std::uint8_t>(i));
        Bytes framed;
        auto len = static_cast<std::uint32_t>(unit.size());
        framed.push_back(static_cast<std::uint8_t>(len >> 24));
        framed.push_back(static_cast<std::uint8_t>(len >> 16));
        framed.push_back(static_cast<std::uint8_t>(len >> 8));
        framed.push_back(static_cast<std::uint8_t>(len));
        append(framed, unit);
        append(burst, framed);
    }
    client.send_all(burst);

    for (int i = 0; i < 5; ++i) {
        auto unit = server->recv_unit(2000);
        REQUIRE(unit.has_value());
        CHECK(unit->size() == 17u * (i + 1));
        CHECK((*unit)[0] == static_cast<std::uint8_t>(i));
    }
}

TEST_CASE("recv_unit times out quietly") {
    TcpListener listener(Endpoint6{{127, 0, 0, 1}, 0});
    TcpSocket client = TcpSocket::connect(listener.local_endpoint());
    auto server = listener.accept(2000);
    REQUIRE(server.has_value());
    CHECK_FALSE(server->recv_unit(50).has_value());
}

TEST_CASE("a closed connection surfaces as an error, not a timeout") {
    TcpListener listener(Endpoint6{{127, 0, 0, 1}, 0});
    auto client = std::make_unique<TcpSocket>(TcpSocket::connect(listener.local_endpoint()));
    auto server = listener.accept(2000);
    REQUIRE(server.has_value());

    client.reset();
    try {
        server->recv_unit(2000);
        FAIL("recv_unit returned after the peer closed");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::io_error);
    }
}

TEST_CASE("an oversized length word is rejected before allocation") {
    TcpListener listener(Endpoint6{{127, 0, 0, 1}, 0});
    TcpSocket client = TcpSocket::connect(listener.local_endpoint());
    auto server = listener.accept(2000);
    REQUIRE(server.has_value());

    Bytes header{0xff, 0xff, 0xff, 0xff};
    client.send_all(header);
    try {
        server->recv_unit(2000);
        FAIL("oversized unit was accepted");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::protocol_error);
    }

    CHECK_THROWS_AS(client.send_unit(Bytes(kMaxUnitLength + 1)), Error);
}

TEST_CASE("a large unit arrives intact") {
    TcpListener listener(Endpoint6{{127, 0, 0, 1}, 0});
    TcpSocket client = TcpSocket::connect(listener.local_endpoint());
    auto server = listener.accept(2000);
    REQUIRE(server.has_value());

    Bytes big(1u << 20);
    Rng rng(6001);
    rng.fill(big);
    std::thread sender([&] { client.send_unit(big); });
    auto got = server->recv_unit(5000);
    sender.join();
    REQUIRE(got.has_value());
    CHECK(*got == big);
}

TEST_CASE("shutdown wakes a blocked unit read") {
    TcpListener listener(Endpoint6{{127, 0, 0, 1}, 0});
    TcpSocket client = TcpSocket::connect(listener.local_endpoint());
    auto server = listener.accept(2000);
    REQUIRE(server.has_value());

    std::thread waker([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        server->shutdown();
    });
    CHECK_THROWS_AS(server->recv_unit(5000), Error);
    waker.join();
}

TEST_CASE("connecting to a closed port fails loudly") {
    Endpoint6 nowhere{{127, 0, 0, 1}, 1};
    CHECK_THROWS_AS(TcpSocket::connect(nowhere), Error);
}
