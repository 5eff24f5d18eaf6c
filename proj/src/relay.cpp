#include "btsleuth/relay.hpp"

#include <algorithm>

namespace btsleuth {

namespace {

enum class UnitKind { ping, opaque, offer, ack };

UnitKind classify(const Message& m) {
    if (std::holds_alternative<RelayPing>(m)) return UnitKind::ping;
    if (std::holds_alternative<RelayNonceOffer>(m)) return UnitKind::offer;
    if (std::holds_alternative<RelayNonceAck>(m)) return UnitKind::ack;
    return UnitKind::opaque;
}

const char* kind_name(UnitKind k) {
    switch (k) {
        case UnitKind::ping: return "ping";
        case UnitKind::opaque: return "hashmap";
        case UnitKind::offer: return "nonce offer";
        case UnitKind::ack: return "acknowledgement";
    }
    return "?";
}

}  // namespace

RelaySessionMachine::RelaySessionMachine(const PeerId& a, const PeerId& b) {
    a_.id = a;
    b_.id = b;
}

RelaySessionMachine::Side& RelaySessionMachine::side_of(const PeerId& id) {
    return id == a_.id ? a_ : b_;
}

RelaySessionMachine::Side& RelaySessionMachine::other_of(const PeerId& id) {
    return id == a_.id ? b_ : a_;
}

std::vector<RelaySessionMachine::Delivery> RelaySessionMachine::on_frame(const PeerId& from,
                                                                         const Frame& frame) {
    if (phase_ == Phase::established) {
        Frame fwd = Frame::relay(from, frame.payload);
        return {{other_of(from).id, encode_frame(fwd)}};
    }

    Message m = parse(frame);
    UnitKind kind = classify(m);
    UnitKind expected = phase_ == Phase::pings      ? UnitKind::ping
                        : phase_ == Phase::hashmaps ? UnitKind::opaque
                                                    : UnitKind::offer;
    if (kind != expected) {
        throw Error(Errc::session_order_violation,
                    std::string("the ") + relay_phase_name(phase_) + " phase expects a " +
                        kind_name(expected) + ", got a " + kind_name(kind));
    }
    if (const auto* ping = std::get_if<RelayPing>(&m); ping && ping->peer != from) {
        throw Error(Errc::protocol_error, "session ping names a different peer");
    }

    Side& s = side_of(from);
    if (s.done) {
        throw Error(Errc::session_order_violation,
                    std::string("side already sent its ") + kind_name(expected));
    }
    s.done = true;
    s.held = frame.payload;
    if (const auto* offer = std::get_if<RelayNonceOffer>(&m)) s.nonce = offer->nonce;

    Side& o = other_of(from);
    if (!o.done) return {};

    // Phase complete: release each side's held unit to the counterpart.
    std::vector<Delivery> out;
    out.push_back({a_.id, encode_frame(Frame::relay(b_.id, b_.held))});
    out.push_back({b_.id, encode_frame(Frame::relay(a_.id, a_.held))});

    if (phase_ == Phase::offers) {
        // Each side is acknowledged with the counterpart's nonce, proving
        // the relay delivered the offer.
        out.push_back({a_.id, encode_frame(build(RelayNonceAck{b_.nonce, "OK"}, b_.id))});
        out.push_back({b_.id, encode_frame(build(RelayNonceAck{a_.nonce, "OK"}, a_.id))});
        phase_ = Phase::established;
    } else {
        phase_ = phase_ == Phase::pings ? Phase::hashmaps : Phase::offers;
    }
    a_.done = b_.done = false;
    a_.held.clear();
    b_.held.clear();
    return out;
}

const char* relay_phase_name(RelaySessionMachine::Phase p) {
    switch (p) {
        case RelaySessionMachine::Phase::pings: return "ping";
        case RelaySessionMachine::Phase::hashmaps: return "hashmap";
        case RelaySessionMachine::Phase::offers: return "nonce offer";
        case RelaySessionMachine::Phase::established: return "established";
    }
    return "?";
}

Bytes error_notice_unit(Errc code, const std::string& text) {
    return encode_frame(build(ErrorNotice{errc_name(code), text}));
}

RelayEmulator::RelayEmulator(Options options)
    : options_(options), listener_(options.bind), self_ep_(listener_.local_endpoint()) {}

RelayEmulator::~RelayEmulator() { stop(); }

void RelayEmulator::start() {
    if (running_.exchange(true)) return;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void RelayEmulator::stop() {
    if (!running_.exchange(false)) return;
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::unique_ptr<Conn>> conns;
    {
        std::lock_guard lock(mu_);
        conns.swap(conns_);
        registry_.clear();
        sessions_.clear();
    }
    for (auto& conn : conns) {
        conn->sock.shutdown();
        if (conn->thread.joinable()) conn->thread.join();
    }
}

Endpoint6 RelayEmulator::endpoint() const { return self_ep_; }

std::size_t RelayEmulator::registered_count() const {
    std::lock_guard lock(mu_);
    return registry_.size();
}

std::size_t RelayEmulator::session_count() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

std::uint64_t RelayEmulator::established_count() const {
    std::lock_guard lock(mu_);
    return established_;
}

std::uint64_t RelayEmulator::forwarded_units() const {
    std::lock_guard lock(mu_);
    return forwarded_;
}

std::vector<std::string> RelayEmulator::notice_codes() const {
    std::lock_guard lock(mu_);
    return notice_codes_;
}

RelayEmulator::SessionKey RelayEmulator::key_of(const PeerId& x, const PeerId& y) {
    return x < y ? SessionKey{x, y} : SessionKey{y, x};
}

void RelayEmulator::accept_loop() {
    while (running_) {
        auto sock = listener_.accept(250);
        if (!sock) continue;
        std::lock_guard lock(mu_);
        auto conn = std::make_unique<Conn>();
        conn->remote = sock->remote_endpoint();
        conn->sock = std::move(*sock);
        Conn* raw = conn.get();
        conn->thread = std::thread([this, raw] { serve(raw); });
        conns_.push_back(std::move(conn));
    }
}

void RelayEmulator::serve(Conn* conn) {
    while (running_) {
        std::optional<Bytes> unit;
        try {
            unit = conn->sock.recv_unit(250);
        } catch (const Error& e) {
            std::lock_guard lock(mu_);
            if (e.code() == Errc::protocol_error && !conn->closed) {
                // Oversized length word; the sender is still connected.
                notice_locked(conn, e.code(), e.what());
            }
            disconnect_locked(conn);
            return;
        }
        if (!unit) continue;

        std::lock_guard lock(mu_);
        if (conn->closed) return;
        tap_locked(Direction::received, conn->remote, self_ep_, *unit);
        if (!process_locked(conn, *unit)) {
            disconnect_locked(conn);
            return;
        }
    }
    std::lock_guard lock(mu_);
    disconnect_locked(conn);
}

bool RelayEmulator::process_locked(Conn* conn, const Bytes& unit) {
    Frame frame;
    try {
        frame = decode_frame(unit);
    } catch (const Error& e) {
        notice_locked(conn, e.code(), e.what());
        return false;
    }

    if (frame.mode != Frame::Mode::relay) {
        notice_locked(conn, Errc::protocol_error, "only relay frames are accepted here");
        return false;
    }

    if (!conn->id || *frame.relay_target == *conn->id) {
        return register_locked(conn, frame);
    }
    return session_unit_locked(conn, frame);
}

bool RelayEmulator::register_locked(Conn* conn, const Frame& frame) {
    Message m;
    try {
        m = parse(frame);
    } catch (const Error& e) {
        notice_locked(conn, e.code(), e.what());
        return false;
    }
    const auto* ping = std::get_if<RelayPing>(&m);
    if (!ping || ping->peer != *frame.relay_target) {
        notice_locked(conn, Errc::protocol_error,
                      "a connection introduces itself with a self-addressed ping");
        return false;
    }
    if (conn->id) {
        if (*conn->id == ping->peer) return true;  // keepalive re-introduction
        notice_locked(conn, Errc::protocol_error, "connection is already registered");
        return false;
    }
    if (auto it = registry_.find(ping->peer); it != registry_.end() && it->second != conn) {
        notice_locked(conn, Errc::protocol_error,
                      "peer " + ping->peer.hex() + " is already registered");
        return false;
    }
    conn->id = ping->peer;
    registry_[ping->peer] = conn;
    return true;
}

bool RelayEmulator::session_unit_locked(Conn* conn, const Frame& frame) {
    const PeerId& from = *conn->id;
    const PeerId& target = *frame.relay_target;

    auto reg = registry_.find(target);
    if (reg == registry_.end()) {
        notice_locked(conn, Errc::unknown_target_peer,
                      "peer " + target.hex() + " is not registered");
        return true;  // addressing mistakes do not cost the connection
    }

    auto [it, created] = sessions_.try_emplace(key_of(from, target), from, target);
    RelaySessionMachine& session = it->second;
    bool was_established = session.phase() == RelaySessionMachine::Phase::established;

    std::vector<RelaySessionMachine::Delivery> deliveries;
    try {
        deliveries = session.on_frame(from, frame);
    } catch (const Error& e) {
        notice_locked(conn, e.code(), e.what());
        sessions_.erase(it);
        return false;
    }

    for (const auto& d : deliveries) deliver_locked(d);
    if (!was_established && session.phase() == RelaySessionMachine::Phase::established) {
        ++established_;
    }
    return true;
}

void RelayEmulator::notice_locked(Conn* conn, Errc code, const std::string& text) {
    Bytes unit = error_notice_unit(code, text);
    notice_codes_.push_back(errc_name(code));
    try {
        conn->sock.send_unit(unit);
        tap_locked(Direction::sent, self_ep_, conn->remote, unit);
    } catch (const Error&) {
        // The offender is already gone; the log entry is enough.
    }
}

void RelayEmulator::deliver_locked(const RelaySessionMachine::Delivery& d) {
    auto it = registry_.find(d.to);
    if (it == registry_.end()) return;
    Conn* conn = it->second;
    try {
        conn->sock.send_unit(d.unit);
        tap_locked(Direction::sent, self_ep_, conn->remote, d.unit);
        ++forwarded_;
    } catch (const Error&) {
        disconnect_locked(conn);
    }
}

void RelayEmulator::disconnect_locked(Conn* conn) {
    if (conn->closed) return;
    conn->closed = true;
    conn->sock.shutdown();
    if (conn->id) {
        registry_.erase(*conn->id);
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            if (it->first.first == *conn->id || it->first.second == *conn->id) {
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
        conn->id.reset();
    }
}

void RelayEmulator::tap_locked(Direction dir, const Endpoint6& src, const Endpoint6& dst,
                               const Bytes& unit) {
    if (options_.tap) {
        options_.tap->append(dir, Transport::tcp, src, dst, unit);
    }
}

RelayClient::RelayClient(const Endpoint6& relay, const PeerId& self, WireTap* tap, Clock& clock)
    : sock_(TcpSocket::connect(relay)),
      self_(self),
      tap_(tap),
      clock_(clock),
      local_(sock_.local_endpoint()),
      remote_(relay) {}

void RelayClient::register_self(const LanShare& share) {
    send_frame(build(RelayPing{self_, share}, self_));
}

void RelayClient::ping(const PeerId& target, const LanShare& share) {
    send_frame(build(RelayPing{self_, share}, target));
}

void RelayClient::hashmap(const PeerId& target, Bytes blob) {
    send_frame(build(RelayHashmap{std::move(blob)}, target));
}

void RelayClient::offer(const PeerId& target, const RelayNonceOffer& offer) {
    send_frame(build(offer, target));
}

void RelayClient::traffic(const PeerId& target, Bytes payload) {
    send_frame(Frame::relay(target, std::move(payload)));
}

void RelayClient::send_frame(const Frame& f) { send_raw(encode_frame(f)); }

void RelayClient::send_raw(std::span<const std::uint8_t> unit) {
    sock_.send_unit(unit);
    if (tap_) {
        tap_->append(Direction::sent, Transport::tcp, local_, remote_,
                     Bytes(unit.begin(), unit.end()));
    }
}

std::optional<Frame> RelayClient::recv_frame(int timeout_ms) {
    auto unit = sock_.recv_unit(timeout_ms);
    if (!unit) return std::nullopt;
    if (tap_) {
        tap_->append(Direction::received, Transport::tcp, remote_, local_, *unit);
    }
    return decode_frame(*unit);
}

}  // namespace btsleuth
