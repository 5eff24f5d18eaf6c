#include "btsleuth/tcp.hpp"

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

Endpoint6 name_of(int fd, int (*getter)(int, sockaddr*, socklen_t*), const char* what) {
    sockaddr_in sa{};
    socklen_t len = sizeof(sa);
    if (getter(fd, reinterpret_cast<sockaddr*>(&sa), &len) != 0) raise(what);
    return from_sockaddr(sa);
}

}  // namespace

TcpSocket TcpSocket::connect(const Endpoint6& dst) {
    int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) raise("socket");
    sockaddr_in sa = to_sockaddr(dst);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
        int err = errno;
        ::close(fd);
        errno = err;
        raise("connect " + dst.str());
    }
    return TcpSocket(fd);
}

TcpSocket::~TcpSocket() {
    if (fd_ >= 0) ::close(fd_);
}

TcpSocket::TcpSocket(TcpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

TcpSocket& TcpSocket::operator=(TcpSocket&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

Endpoint6 TcpSocket::local_endpoint() const { return name_of(fd_, ::getsockname, "getsockname"); }

Endpoint6 TcpSocket::remote_endpoint() const { return name_of(fd_, ::getpeername, "getpeername"); }

void TcpSocket::send_all(std::span<const std::uint8_t> data) {
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            raise("send");
        }
        off += static_cast<std::size_t>(n);
    }
}

void TcpSocket::send_unit(std::span<const std::uint8_t> payload) {
    if (payload.size() > kMaxUnitLength) {
        throw Error(Errc::invariant_violation, "unit exceeds the length cap");
    }
    auto len = static_cast<std::uint32_t>(payload.size());
    Bytes wire;
    wire.reserve(4 + payload.size());
    wire.push_back(static_cast<std::uint8_t>(len >> 24));
    wire.push_back(static_cast<std::uint8_t>(len >> 16));
    wire.push_back(static_cast<std::uint8_t>(len >> 8));
    wire.push_back(static_cast<std::uint8_t>(len));
    wire.insert(wire.end(), payload.begin(), payload.end());
    send_all(wire);
}

bool TcpSocket::wait_readable(int timeout_ms) {
    pollfd pfd{fd_, POLLIN, 0};
    int ready = ::poll(&pfd, 1, timeout_ms);
    if (ready < 0) raise("poll");
    return ready > 0;
}

std::optional<Bytes> TcpSocket::recv_unit(int timeout_ms) {
    std::array<std::uint8_t, 4> header{};
    std::size_t got = 0;
    while (got < header.size()) {
        if (!wait_readable(timeout_ms)) {
            if (got == 0) return std::nullopt;
            throw Error(Errc::io_error, "peer stalled inside a unit header");
        }
        ssize_t n = ::recv(fd_, header.data() + got, header.size() - got, 0);
        if (n == 0) {
            if (got == 0) throw Error(Errc::io_error, "connection closed");
            throw Error(Errc::io_error, "connection closed inside a unit header");
        }
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            raise("recv");
        }
        got += static_cast<std::size_t>(n);
    }

    std::size_t len = (std::size_t{header[0]} << 24) | (std::size_t{header[1]} << 16) |
                      (std::size_t{header[2]} << 8) | std::size_t{header[3]};
    if (len > kMaxUnitLength) {
        throw Error(Errc::protocol_error, "unit length " + std::to_string(len) +
                                              " exceeds the cap of " +
                                              std::to_string(kMaxUnitLength));
    }

    Bytes payload(len);
    std::size_t off = 0;
    while (off < len) {
        if (!wait_readable(timeout_ms)) {
            throw Error(Errc::io_error, "peer stalled inside a unit");
        }
        ssize_t n = ::recv(fd_, payload.data() + off, len - off, 0);
        if (n == 0) throw Error(Errc::io_error, "connection closed inside a unit");
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            raise("recv");
        }
        off += static_cast<std::size_t>(n);
    }
    return payload;
}

void TcpSocket::shutdown() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

TcpListener::TcpListener(const Endpoint6& bind_addr, int backlog) {
    fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) raise("socket");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in sa = to_sockaddr(bind_addr);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0 ||
        ::listen(fd_, backlog) != 0) {
        int err = errno;
        ::close(fd_);
        fd_ = -1;
        errno = err;
        raise("listen " + bind_addr.str());
    }
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

TcpListener::TcpListener(TcpListener&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

Endpoint6 TcpListener::local_endpoint() const {
    return name_of(fd_, ::getsockname, "getsockname");
}

std::optional<TcpSocket> TcpListener::accept(int timeout_ms) {
    pollfd pfd{fd_, POLLIN, 0};
    int ready = ::poll(&pfd, 1, timeout_ms);
    if (ready < 0) raise("poll");
    if (ready == 0) return std::nullopt;
    int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
        if (errno == EAGAIN || errno == EINTR || errno == ECONNABORTED) return std::nullopt;
        raise("accept");
    }
    return TcpSocket(fd);
}

}  // namespace btsleuth
