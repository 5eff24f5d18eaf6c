#include "btsleuth/discovery.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <mutex>

#include "btsleuth/frame.hpp"

namespace btsleuth {

namespace {

using MonoClock = std::chrono::steady_clock;

int remaining_ms(MonoClock::time_point deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - MonoClock::now());
    return static_cast<int>(std::max<std::int64_t>(0, left.count()));
}

CaptureStamp stamp_frame(WireTap* tap, Clock& clock, Direction direction, const Endpoint6& src,
                         const Endpoint6& dst, const Bytes& wire) {
    if (tap) return tap->append(direction, Transport::udp, src, dst, wire);
    return CaptureStamp{0, clock.now()};
}

}  // namespace

const char* discovery_kind_name(DiscoverySource::Kind k) {
    switch (k) {
        case DiscoverySource::Kind::tracker: return "tracker";
        case DiscoverySource::Kind::lan: return "lan";
        case DiscoverySource::Kind::known_peer: return "known_peer";
    }
    return "?";
}

std::vector<PeerRecord> records_from_response(const PeersResponse& response,
                                              const Endpoint6& tracker, Instant captured_at,
                                              std::uint64_t seq) {
    std::vector<PeerRecord> out;
    out.reserve(response.peers.size());
    for (const auto& entry : response.peers) {
        PeerRecord r;
        r.peer = entry.peer;
        r.external = entry.external;
        r.local = entry.local;
        r.source = DiscoverySource{DiscoverySource::Kind::tracker, tracker};
        r.first_seen = captured_at;
        r.last_seen = captured_at;
        r.seq = seq;
        out.push_back(std::move(r));
    }
    return out;
}

PeerRecord record_from_ping_reply(const PingReply& reply, const Endpoint6& reply_src,
                                  DiscoverySource::Kind kind, Instant captured_at,
                                  std::uint64_t seq) {
    PeerRecord r;
    r.peer = reply.peer;
    r.external = Endpoint6{reply_src.ip, reply.port};
    r.local = r.external;
    r.source = DiscoverySource{kind, reply_src};
    r.first_seen = captured_at;
    r.last_seen = captured_at;
    r.seq = seq;
    return r;
}

std::vector<PeerRecord> tracker_announce(UdpSocket& sock, const Endpoint6& tracker,
                                         const Endpoint6& self_local, const PeerId& self_peer,
                                         const ShareId& share, const AnnounceConfig& cfg,
                                         WireTap* tap, Clock& clock) {
    Bytes wire = encode_frame(build(GetPeers{self_local, self_peer, share}));
    Endpoint6 local = sock.local_endpoint();

    int timeout = cfg.timeout_ms;
    for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        sock.send_to(wire, tracker);
        stamp_frame(tap, clock, Direction::sent, local, tracker, wire);

        auto deadline = MonoClock::now() + std::chrono::milliseconds(timeout);
        while (true) {
            int left = remaining_ms(deadline);
            if (left <= 0) break;
            auto got = sock.recv_from(left);
            if (!got) break;
            auto& [payload, src] = *got;
            if (src != tracker) continue;  // stray datagram, not ours to judge
            CaptureStamp stamp =
                stamp_frame(tap, clock, Direction::received, src, local, payload);
            Message m;
            try {
                m = parse(decode_frame(payload));
            } catch (const Error&) {
                throw Error(Errc::protocol_error, "tracker response failed to parse");
            }
            const auto* resp = std::get_if<PeersResponse>(&m);
            if (!resp) {
                throw Error(Errc::protocol_error,
                            "tracker sent " + std::string(message_name(m)) +
                                " instead of a peer list");
            }
            if (resp->share != share) {
                throw Error(Errc::share_mismatch, "response share " + resp->share.hex() +
                                                      " does not match request " + share.hex());
            }
            return records_from_response(*resp, tracker, stamp.captured_at, stamp.seq);
        }
        timeout *= cfg.backoff_factor;
    }
    throw Error(Errc::timeout, "no tracker response from " + tracker.str());
}

AnnounceLoop::AnnounceLoop(UdpSocket& sock, Endpoint6 tracker, Endpoint6 self_local,
                           PeerId self_peer, std::vector<ShareId> shares, AnnounceSink sink,
                           AnnounceConfig cfg, WireTap* tap, Clock& clock)
    : sock_(sock),
      tracker_(tracker),
      self_local_(self_local),
      self_peer_(self_peer),
      shares_(std::move(shares)),
      sink_(std::move(sink)),
      cfg_(cfg),
      tap_(tap),
      clock_(clock) {}

AnnounceLoop::~AnnounceLoop() { stop(); }

void AnnounceLoop::run_once() {
    for (const ShareId& share : shares_) {
        AnnounceOutcome outcome;
        outcome.share = share;
        try {
            outcome.records =
                tracker_announce(sock_, tracker_, self_local_, self_peer_, share, cfg_, tap_,
                                 clock_);
        } catch (const Error& e) {
            outcome.error = e.what();
        }
        if (sink_) sink_(outcome);
    }
}

void AnnounceLoop::start(int period_ms) {
    if (running_.exchange(true)) return;
    thread_ = std::thread([this, period_ms] {
        while (running_) {
            run_once();
            std::unique_lock lock(loop_mu_);
            loop_cv_.wait_for(lock, std::chrono::milliseconds(period_ms),
                              [this] { return !running_.load(); });
        }
    });
}

void AnnounceLoop::stop() {
    if (!running_.exchange(false)) return;
    loop_cv_.notify_all();
    if (thread_.joinable()) thread_.join();
}

std::vector<PeerRecord> lan_probe(UdpSocket& sock, const ShareId& share, const PeerId& self_peer,
                                  Rng& suffix_rng, const LanProbeConfig& cfg, WireTap* tap,
                                  Clock& clock) {
    Endpoint6 local = sock.local_endpoint();
    Ping ping;
    ping.peer = self_peer;
    ping.port = local.port;
    Bytes suffix = suffix_rng.bytes(12);
    ping.share = make_lan_share(share, suffix);
    Bytes wire = encode_frame(build(ping));

    sock.send_to(wire, cfg.group);
    stamp_frame(tap, clock, Direction::sent, local, cfg.group, wire);

    std::vector<PeerRecord> records;
    auto deadline = MonoClock::now() + std::chrono::milliseconds(cfg.window_ms);
    while (true) {
        int left = remaining_ms(deadline);
        if (left <= 0) break;
        auto got = sock.recv_from(left);
        if (!got) break;
        auto& [payload, src] = *got;
        CaptureStamp stamp = stamp_frame(tap, clock, Direction::received, src, local, payload);
        try {
            Message m = parse(decode_frame(payload));
            const auto* reply = std::get_if<PingReply>(&m);
            if (!reply || reply->share != share) continue;
            if (reply->peer == self_peer) continue;  // our own claim looped back
            records.push_back(record_from_ping_reply(*reply, src, DiscoverySource::Kind::lan,
                                                     stamp.captured_at, stamp.seq));
        } catch (const Error&) {
            // junk on the multicast group is not an error for the prober
        }
    }
    return records;
}

std::optional<PeerRecord> known_peer_probe(UdpSocket& sock, const Endpoint6& host,
                                           const ShareId& share, const PeerId& self_peer,
                                           Rng& suffix_rng, int window_ms, WireTap* tap,
                                           Clock& clock) {
    Endpoint6 local = sock.local_endpoint();
    Ping ping;
    ping.peer = self_peer;
    ping.port = local.port;
    Bytes suffix = suffix_rng.bytes(12);
    ping.share = make_lan_share(share, suffix);
    Bytes wire = encode_frame(build(ping));

    sock.send_to(wire, host);
    stamp_frame(tap, clock, Direction::sent, local, host, wire);

    bool heard_host = false;
    auto deadline = MonoClock::now() + std::chrono::milliseconds(window_ms);
    while (true) {
        int left = remaining_ms(deadline);
        if (left <= 0) break;
        auto got = sock.recv_from(left);
        if (!got) break;
        auto& [payload, src] = *got;
        if (src != host) continue;
        heard_host = true;
        CaptureStamp stamp = stamp_frame(tap, clock, Direction::received, src, local, payload);
        try {
            Message m = parse(decode_frame(payload));
            const auto* reply = std::get_if<PingReply>(&m);
            if (!reply || reply->share != share) continue;
            return record_from_ping_reply(*reply, src, DiscoverySource::Kind::known_peer,
                                          stamp.captured_at, stamp.seq);
        } catch (const Error&) {
            // answered with junk; still counts as heard
        }
    }
    if (heard_host) return std::nullopt;
    throw Error(Errc::timeout, "no answer from " + host.str());
}

TrackerProvider::TrackerProvider(Endpoint6 tracker, Endpoint6 self_local, AnnounceConfig cfg,
                                 WireTap* tap, Clock& clock)
    : tracker_(tracker),
      self_local_(self_local),
      cfg_(cfg),
      tap_(tap),
      clock_(clock),
      sock_(Endpoint6{{127, 0, 0, 1}, 0}) {}

std::vector<PeerRecord> TrackerProvider::discover(const ShareId& share, const PeerId& self_peer) {
    Endpoint6 la = self_local_;
    if (la == Endpoint6{}) la = sock_.local_endpoint();
    return tracker_announce(sock_, tracker_, la, self_peer, share, cfg_, tap_, clock_);
}

LanProvider::LanProvider(std::uint64_t suffix_seed, LanProbeConfig cfg, WireTap* tap,
                         Clock& clock)
    : suffix_rng_(suffix_seed),
      cfg_(cfg),
      tap_(tap),
      clock_(clock),
      sock_(Endpoint6{cfg.interface_ip, 0}) {
    sock_.setup_multicast_send(cfg_.interface_ip, true);
}

std::vector<PeerRecord> LanProvider::discover(const ShareId& share, const PeerId& self_peer) {
    return lan_probe(sock_, share, self_peer, suffix_rng_, cfg_, tap_, clock_);
}

KnownPeerProvider::KnownPeerProvider(std::vector<Endpoint6> hosts, std::uint64_t suffix_seed,
                                     int window_ms, WireTap* tap, Clock& clock)
    : hosts_(std::move(hosts)),
      suffix_rng_(suffix_seed),
      window_ms_(window_ms),
      tap_(tap),
      clock_(clock),
      sock_(Endpoint6{{127, 0, 0, 1}, 0}) {}

std::vector<PeerRecord> KnownPeerProvider::discover(const ShareId& share,
                                                    const PeerId& self_peer) {
    std::vector<PeerRecord> records;
    std::size_t unreachable = 0;
    for (const Endpoint6& host : hosts_) {
        try {
            auto record = known_peer_probe(sock_, host, share, self_peer, suffix_rng_,
                                           window_ms_, tap_, clock_);
            if (record) records.push_back(std::move(*record));
        } catch (const Error& e) {
            if (e.code() != Errc::timeout) throw;
            ++unreachable;
        }
    }
    if (!hosts_.empty() && unreachable == hosts_.size()) {
        throw Error(Errc::timeout, "no configured host answered");
    }
    return records;
}

std::string KnownPeerProvider::origin() const {
    std::string out;
    for (const Endpoint6& host : hosts_) {
        if (!out.empty()) out += ',';
        out += host.str();
    }
    return out;
}

std::vector<PeerRecord> merge_records(std::vector<PeerRecord> records) {
    std::sort(records.begin(), records.end(), [](const PeerRecord& a, const PeerRecord& b) {
        auto ka = std::tie(a.peer, a.external, a.local);
        auto kb = std::tie(b.peer, b.external, b.local);
        if (ka != kb) return ka < kb;
        return a.seq < b.seq;
    });
    std::vector<PeerRecord> out;
    for (auto& r : records) {
        if (!out.empty() && out.back().peer == r.peer && out.back().external == r.external &&
            out.back().local == r.local) {
            PeerRecord& kept = out.back();
            kept.first_seen = std::min(kept.first_seen, r.first_seen);
            kept.last_seen = std::max(kept.last_seen, r.last_seen);
        } else {
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace btsleuth
