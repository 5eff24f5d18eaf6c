#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <utility>
#include <vector>

#include "btsleuth/clock.hpp"
#include "btsleuth/messages.hpp"
#include "btsleuth/tcp.hpp"
#include "btsleuth/wiretap.hpp"

namespace btsleuth {

// Sequencer for one relayed session between two registered peers. The
// handshake runs in three phases, each completed by both sides before the
// next may begin: pings, then hashmaps, then nonce offers. Completing the
// offer phase acknowledges both sides and opens blind forwarding. Any unit
// of the wrong kind for the current phase, a side repeating its unit, or a
// peer-sent acknowledgement throws Error{session_order_violation}.
class RelaySessionMachine {
public:
    enum class Phase { pings, hashmaps, offers, established };

    struct Delivery {
        PeerId to;
        Bytes unit;  // encoded frame, target rewritten to the sender
    };

    RelaySessionMachine(const PeerId& a, const PeerId& b);

    Phase phase() const { return phase_; }

    // Feeds one relay frame sent by `from` toward the counterpart and
    // returns the units the relay must deliver in order. Phase-completing
    // units release both held counterpart units; established traffic is
    // forwarded without inspection.
    std::vector<Delivery> on_frame(const PeerId& from, const Frame& frame);

private:
    struct Side {
        PeerId id;
        bool done = false;
        Bytes held;
        Nonce16 nonce{};
    };

    Side& side_of(const PeerId& id);
    Side& other_of(const PeerId& id);

    Phase phase_ = Phase::pings;
    Side a_;
    Side b_;
};

const char* relay_phase_name(RelaySessionMachine::Phase p);

// Encoded direct frame carrying an ErrorNotice; what the relay sends before
// dropping or refusing a unit.
Bytes error_notice_unit(Errc code, const std::string& text);

// Rendezvous server for peers that cannot reach each other directly. A
// connection registers by sending a relay-mode ping addressed to its own
// PeerID; afterwards every relay frame it sends is session traffic toward
// the frame's target. Order violations and malformed units earn an
// ErrorNotice naming the error code, then the offending connection is
// dropped; addressing an unknown peer earns a notice but keeps the
// connection. Established sessions forward units blindly with the header
// target rewritten to the sending peer.
class RelayEmulator {
public:
    struct Options {
        Endpoint6 bind{{127, 0, 0, 1}, 0};
        WireTap* tap = nullptr;
        Clock* clock = &SystemClock::instance();
    };

    RelayEmulator() : RelayEmulator(Options{}) {}
    explicit RelayEmulator(Options options);
    ~RelayEmulator();

    RelayEmulator(const RelayEmulator&) = delete;
    RelayEmulator& operator=(const RelayEmulator&) = delete;

    void start();
    void stop();

    Endpoint6 endpoint() const;

    std::size_t registered_count() const;
    std::size_t session_count() const;
    std::uint64_t established_count() const;
    std::uint64_t forwarded_units() const;
    std::vector<std::string> notice_codes() const;

private:
    struct Conn {
        TcpSocket sock;
        Endpoint6 remote;
        std::optional<PeerId> id;
        std::thread thread;
        bool closed = false;
    };

    using SessionKey = std::pair<PeerId, PeerId>;
    static SessionKey key_of(const PeerId& x, const PeerId& y);

    void accept_loop();
    void serve(Conn* conn);
    // The handlers below run with mu_ held. Those returning bool report
    // whether the connection survives.
    bool process_locked(Conn* conn, const Bytes& unit);
    bool register_locked(Conn* conn, const Frame& frame);
    bool session_unit_locked(Conn* conn, const Frame& frame);
    void notice_locked(Conn* conn, Errc code, const std::string& text);
    void deliver_locked(const RelaySessionMachine::Delivery& d);
    void disconnect_locked(Conn* conn);
    void tap_locked(Direction dir, const Endpoint6& src, const Endpoint6& dst,
                    const Bytes& unit);

    Options options_;
    TcpListener listener_;
    Endpoint6 self_ep_;
    std::thread accept_thread_;
    std::atomic<bool> running_{false};

    mutable std::mutex mu_;
    std::vector<std::unique_ptr<Conn>> conns_;
    std::map<PeerId, Conn*> registry_;
    std::map<SessionKey, RelaySessionMachine> sessions_;
    std::uint64_t established_ = 0;
    std::uint64_t forwarded_ = 0;
    std::vector<std::string> notice_codes_;
};

// Peer-side connection to a relay, used by emulated peers and tests. Framing
// and registration only; handshake choreography stays with the caller.
class RelayClient {
public:
    RelayClient(const Endpoint6& relay, const PeerId& self, WireTap* tap = nullptr,
                Clock& clock = SystemClock::instance());

    const PeerId& self() const { return self_; }

    void register_self(const LanShare& share);

    void ping(const PeerId& target, const LanShare& share);
    void hashmap(const PeerId& target, Bytes blob);
    void offer(const PeerId& target, const RelayNonceOffer& offer);
    void traffic(const PeerId& target, Bytes payload);

    void send_frame(const Frame& f);
    void send_raw(std::span<const std::uint8_t> unit);

    // nullopt on timeout; throws Error{io_error} once the relay drops us.
    std::optional<Frame> recv_frame(int timeout_ms);

    Endpoint6 local_endpoint() const { return sock_.local_endpoint(); }

private:
    TcpSocket sock_;
    PeerId self_;
    WireTap* tap_;
    Clock& clock_;
    Endpoint6 local_;
    Endpoint6 remote_;
};

}  // namespace btsleuth
