#pragma once

#include <optional>

#include "btsleuth/bytes.hpp"
#include "btsleuth/errors.hpp"
#include "btsleuth/identity.hpp"

namespace btsleuth {

// Hard cap on one length-prefixed unit; anything larger is a protocol error
// rather than an allocation request.
inline constexpr std::size_t kMaxUnitLength = 8u * 1024 * 1024;

// RAII wrapper over a stream socket. Relay traffic rides on these as units:
// a 4-octet big-endian length followed by that many payload octets.
class TcpSocket {
public:
    TcpSocket() = default;
    static TcpSocket connect(const Endpoint6& dst);

    ~TcpSocket();
    TcpSocket(TcpSocket&& other) noexcept;
    TcpSocket& operator=(TcpSocket&& other) noexcept;
    TcpSocket(const TcpSocket&) = delete;
    TcpSocket& operator=(const TcpSocket&) = delete;

    Endpoint6 local_endpoint() const;
    Endpoint6 remote_endpoint() const;

    void send_all(std::span<const std::uint8_t> data);
    void send_unit(std::span<const std::uint8_t> payload);

    // Waits up to timeout_ms for the start of a unit; nullopt on timeout.
    // A clean close at a unit boundary, a close or stall inside a unit, and
    // an oversized length all throw.
    std::optional<Bytes> recv_unit(int timeout_ms);

    // Wakes any blocked recv_unit, which then reports the connection closed.
    void shutdown();

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }

private:
    explicit TcpSocket(int fd) : fd_(fd) {}
    friend class TcpListener;

    bool wait_readable(int timeout_ms);
    int fd_ = -1;
};

class TcpListener {
public:
    explicit TcpListener(const Endpoint6& bind_addr, int backlog = 64);

    ~TcpListener();
    TcpListener(TcpListener&& other) noexcept;
    TcpListener& operator=(TcpListener&&) = delete;
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    Endpoint6 local_endpoint() const;

    // nullopt on timeout.
    std::optional<TcpSocket> accept(int timeout_ms);

private:
    int fd_ = -1;
};

}  // namespace btsleuth
