#include "btsleuth/udp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace btsleuth {

namespace {

[[noreturn]] void raise(const std::string& what) {
    throw Error(Errc::socket_unavailable, what + ": " + std::strerror(errno));
}

sockaddr_in to_sockaddr(const Endpoint6& e) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(e.port);
    std::memcpy(&sa.sin_addr.s_addr, e.ip.data(), 4);
    return sa;
}

Endpoint6 from_sockaddr(const sockaddr_in& sa) {
    Endpoint6 e;
    std::memcpy(e.ip.data(), &sa.sin_addr.s_addr, 4);
    e.port = ntohs(sa.sin_port);
    return e;
}

in_addr to_in_addr(const std::array<std::uint8_t, 4>& ip) {
    in_addr a{};
    std::memcpy(&a.s_addr, ip.data(), 4);
    return a;
}

}  // namespace

void UdpSocket::open() {
    fd_ = ::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) raise("socket");
}

UdpSocket::UdpSocket() { open(); }

UdpSocket::UdpSocket(const Endpoint6& bind_addr) {
    open();
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in sa = to_sockaddr(bind_addr);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
        int err = errno;
        ::close(fd_);
        fd_ = -1;
        errno = err;
        raise("bind " + bind_addr.str());
    }
}

UdpSocket::~UdpSocket() {
    if (fd_ >= 0) ::close(fd_);
}

UdpSocket::UdpSocket(UdpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

Endpoint6 UdpSocket::local_endpoint() const {
    sockaddr_in sa{};
    socklen_t len = sizeof(sa);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len) != 0) raise("getsockname");
    return from_sockaddr(sa);
}

void UdpSocket::send_to(std::span<const std::uint8_t> data, const Endpoint6& dst) {
    sockaddr_in sa = to_sockaddr(dst);
    ssize_t n = ::sendto(fd_, data.data(), data.size(), 0, reinterpret_cast<sockaddr*>(&sa),
                         sizeof(sa));
    if (n < 0 || static_cast<std::size_t>(n) != data.size()) raise("sendto " + dst.str());
}

std::optional<std::pair<Bytes, Endpoint6>> UdpSocket::recv_from(int timeout_ms) {
    pollfd pfd{fd_, POLLIN, 0};
    int ready = ::poll(&pfd, 1, timeout_ms);
    if (ready < 0) raise("poll");
    if (ready == 0) return std::nullopt;

    Bytes buf(65536);
    sockaddr_in sa{};
    socklen_t len = sizeof(sa);
    ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&sa), &len);
    if (n < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) return std::nullopt;
        raise("recvfrom");
    }
    // A shutdown wakeup reads as zero bytes with the source left unfilled,
    // unlike a genuine empty datagram which still names its sender.
    if (sa.sin_family != AF_INET) return std::nullopt;
    buf.resize(static_cast<std::size_t>(n));
    return std::make_pair(std::move(buf), from_sockaddr(sa));
}

void UdpSocket::join_multicast(const std::array<std::uint8_t, 4>& group,
                               const std::array<std::uint8_t, 4>& interface_ip) {
    ip_mreq req{};
    req.imr_multiaddr = to_in_addr(group);
    req.imr_interface = to_in_addr(interface_ip);
    if (::setsockopt(fd_, IPPROTO_IP, IP_ADD_MEMBERSHIP, &req, sizeof(req)) != 0) {
        raise("IP_ADD_MEMBERSHIP");
    }
}

void UdpSocket::setup_multicast_send(const std::array<std::uint8_t, 4>& interface_ip, bool loop) {
    in_addr ifa = to_in_addr(interface_ip);
    if (::setsockopt(fd_, IPPROTO_IP, IP_MULTICAST_IF, &ifa, sizeof(ifa)) != 0) {
        raise("IP_MULTICAST_IF");
    }
    unsigned char value = loop ? 1 : 0;
    if (::setsockopt(fd_, IPPROTO_IP, IP_MULTICAST_LOOP, &value, sizeof(value)) != 0) {
        raise("IP_MULTICAST_LOOP");
    }
}

void UdpSocket::shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

UdpSocket multicast_listener(const Endpoint6& group,
                             const std::array<std::uint8_t, 4>& interface_ip) {
    UdpSocket sock(Endpoint6{{0, 0, 0, 0}, group.port});
    sock.join_multicast(group.ip, interface_ip);
    return sock;
}

}  // namespace btsleuth
