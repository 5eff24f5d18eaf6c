#pragma once

#include <optional>
#include <utility>

#include "btsleuth/bytes.hpp"
#include "btsleuth/errors.hpp"
#include "btsleuth/identity.hpp"

namespace btsleuth {

// Thin RAII wrapper over a datagram socket. All failures throw
// Error{socket_unavailable} except receive timeouts, which are a normal
// outcome and surface as nullopt.
class UdpSocket {
public:
    UdpSocket();
    explicit UdpSocket(const Endpoint6& bind_addr);
    ~UdpSocket();

    UdpSocket(UdpSocket&& other) noexcept;
    UdpSocket& operator=(UdpSocket&& other) noexcept;
    UdpSocket(const UdpSocket&) = delete;
    UdpSocket& operator=(const UdpSocket&) = delete;

    Endpoint6 local_endpoint() const;

    void send_to(std::span<const std::uint8_t> data, const Endpoint6& dst);

    // Blocks up to timeout_ms; nullopt on timeout. 0 polls, negative waits
    // forever.
    std::optional<std::pair<Bytes, Endpoint6>> recv_from(int timeout_ms);

    // Multicast reception on a specific interface address. The socket should
    // be bound to the wildcard address with the group's port first.
    void join_multicast(const std::array<std::uint8_t, 4>& group,
                        const std::array<std::uint8_t, 4>& interface_ip);
    // Outbound multicast interface + loopback delivery for same-host tests.
    void setup_multicast_send(const std::array<std::uint8_t, 4>& interface_ip, bool loop);

    // Wakes any blocked recv_from with nullopt; used for shutdown.
    void shutdown();

    int fd() const { return fd_; }

private:
    void open();
    int fd_ = -1;
};

// Binds the wildcard address on the group's port with address reuse, joins
// the group on interface_ip, and enables loopback delivery.
UdpSocket multicast_listener(const Endpoint6& group,
                             const std::array<std::uint8_t, 4>& interface_ip);

}  // namespace btsleuth
