#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "btsleuth/clock.hpp"
#include "btsleuth/messages.hpp"
#include "btsleuth/udp.hpp"
#include "btsleuth/wiretap.hpp"

namespace btsleuth {

struct DiscoverySource {
    enum class Kind { tracker, lan, known_peer };

    Kind kind = Kind::tracker;
    Endpoint6 origin;  // the answering service

    auto operator<=>(const DiscoverySource&) const = default;
};

const char* discovery_kind_name(DiscoverySource::Kind k);

// One observation of a peer. `seq` is the capture sequence number of the
// frame the observation was decoded from, which makes merging reproducible
// from the evidence stream alone.
struct PeerRecord {
    PeerId peer;
    Endpoint6 external;
    Endpoint6 local;
    DiscoverySource source;
    Instant first_seen = 0;
    Instant last_seen = 0;
    std::uint64_t seq = 0;

    bool operator==(const PeerRecord&) const = default;
};

struct AnnounceConfig {
    int timeout_ms = 5000;
    int retries = 2;        // attempts after the first
    int backoff_factor = 2;
};

// Translates a parsed tracker response into observations. Shared by the live
// path and evidence replay so both derive identical records.
std::vector<PeerRecord> records_from_response(const PeersResponse& response,
                                              const Endpoint6& tracker, Instant captured_at,
                                              std::uint64_t seq);

// Same for a discovery reply (LAN multicast or predefined host): the record's
// endpoints derive from the reply's source address and advertised port.
PeerRecord record_from_ping_reply(const PingReply& reply, const Endpoint6& reply_src,
                                  DiscoverySource::Kind kind, Instant captured_at,
                                  std::uint64_t seq);

// One announce for one share: sends GetPeers from `sock` (so the tracker
// observes the service port), waits for the matching PeersResponse, retries
// with exponential backoff. The response always includes the requester.
std::vector<PeerRecord> tracker_announce(UdpSocket& sock, const Endpoint6& tracker,
                                         const Endpoint6& self_local, const PeerId& self_peer,
                                         const ShareId& share, const AnnounceConfig& cfg = {},
                                         WireTap* tap = nullptr,
                                         Clock& clock = SystemClock::instance());

struct AnnounceOutcome {
    ShareId share;
    std::vector<PeerRecord> records;
    std::optional<std::string> error;
};

using AnnounceSink = std::function<void(const AnnounceOutcome&)>;

// Periodic announcer: one GetPeers per share per period. Errors are delivered
// to the sink, never abort the loop. run_once drives a single round for
// deterministic tests; start/stop run it on a thread.
class AnnounceLoop {
public:
    AnnounceLoop(UdpSocket& sock, Endpoint6 tracker, Endpoint6 self_local, PeerId self_peer,
                 std::vector<ShareId> shares, AnnounceSink sink, AnnounceConfig cfg = {},
                 WireTap* tap = nullptr, Clock& clock = SystemClock::instance());
    ~AnnounceLoop();

    void run_once();

    void start(int period_ms = 1000);
    void stop();

private:
    UdpSocket& sock_;
    Endpoint6 tracker_;
    Endpoint6 self_local_;
    PeerId self_peer_;
    std::vector<ShareId> shares_;
    AnnounceSink sink_;
    AnnounceConfig cfg_;
    WireTap* tap_;
    Clock& clock_;
    std::thread thread_;
    std::atomic<bool> running_{false};
    std::mutex loop_mu_;
    std::condition_variable loop_cv_;
};

struct LanProbeConfig {
    Endpoint6 group{{239, 192, 0, 0}, 3838};
    std::array<std::uint8_t, 4> interface_ip{127, 0, 0, 1};
    int window_ms = 2000;
};

// Multicast Ping carrying ShareId + 12 random octets; collects unicast
// replies to `sock` for the window. The Ping advertises the socket's own
// port. The socket must have multicast sending set up for cfg.interface_ip.
std::vector<PeerRecord> lan_probe(UdpSocket& sock, const ShareId& share, const PeerId& self_peer,
                                  Rng& suffix_rng, const LanProbeConfig& cfg = {},
                                  WireTap* tap = nullptr,
                                  Clock& clock = SystemClock::instance());

// Direct Ping to a configured host. A matching reply yields a record; a
// non-matching reply yields nullopt; total silence for the window raises
// Timeout (indistinguishable from an unreachable host on datagram transport).
std::optional<PeerRecord> known_peer_probe(UdpSocket& sock, const Endpoint6& host,
                                           const ShareId& share, const PeerId& self_peer,
                                           Rng& suffix_rng, int window_ms = 2000,
                                           WireTap* tap = nullptr,
                                           Clock& clock = SystemClock::instance());

// Uniform face over the three discovery paths for the crawler. discover()
// throws on provider-level failure; the sweep downgrades individual failures
// to warnings.
class DiscoveryProvider {
public:
    virtual ~DiscoveryProvider() = default;
    virtual const char* name() const = 0;
    virtual DiscoverySource::Kind kind() const = 0;
    virtual std::vector<PeerRecord> discover(const ShareId& share, const PeerId& self_peer) = 0;
    // Local endpoint receiving this provider's replies; replay uses it to
    // attribute stream records to providers.
    virtual Endpoint6 local_endpoint() const = 0;
    // Where this provider points: tracker endpoint, multicast group, or the
    // probed host list. Recorded in sweep metadata.
    virtual std::string origin() const = 0;
};

class TrackerProvider final : public DiscoveryProvider {
public:
    TrackerProvider(Endpoint6 tracker, Endpoint6 self_local, AnnounceConfig cfg = {},
                    WireTap* tap = nullptr, Clock& clock = SystemClock::instance());

    const char* name() const override { return "tracker"; }
    DiscoverySource::Kind kind() const override { return DiscoverySource::Kind::tracker; }
    std::vector<PeerRecord> discover(const ShareId& share, const PeerId& self_peer) override;
    Endpoint6 local_endpoint() const override { return sock_.local_endpoint(); }
    std::string origin() const override { return tracker_.str(); }

private:
    Endpoint6 tracker_;
    Endpoint6 self_local_;
    AnnounceConfig cfg_;
    WireTap* tap_;
    Clock& clock_;
    UdpSocket sock_;
};

class LanProvider final : public DiscoveryProvider {
public:
    LanProvider(std::uint64_t suffix_seed, LanProbeConfig cfg = {}, WireTap* tap = nullptr,
                Clock& clock = SystemClock::instance());

    const char* name() const override { return "lan"; }
    DiscoverySource::Kind kind() const override { return DiscoverySource::Kind::lan; }
    std::vector<PeerRecord> discover(const ShareId& share, const PeerId& self_peer) override;
    Endpoint6 local_endpoint() const override { return sock_.local_endpoint(); }
    std::string origin() const override { return cfg_.group.str(); }

private:
    Rng suffix_rng_;
    LanProbeConfig cfg_;
    WireTap* tap_;
    Clock& clock_;
    UdpSocket sock_;
};

class KnownPeerProvider final : public DiscoveryProvider {
public:
    KnownPeerProvider(std::vector<Endpoint6> hosts, std::uint64_t suffix_seed,
                      int window_ms = 2000, WireTap* tap = nullptr,
                      Clock& clock = SystemClock::instance());

    const char* name() const override { return "known_peer"; }
    DiscoverySource::Kind kind() const override { return DiscoverySource::Kind::known_peer; }
    std::vector<PeerRecord> discover(const ShareId& share, const PeerId& self_peer) override;
    Endpoint6 local_endpoint() const override { return sock_.local_endpoint(); }
    std::string origin() const override;

private:
    std::vector<Endpoint6> hosts_;
    Rng suffix_rng_;
    int window_ms_;
    WireTap* tap_;
    Clock& clock_;
    UdpSocket sock_;
};

// Set union keyed on (peer, external, local): duplicate observations merge
// into one record with first_seen = min, last_seen = max, and the source and
// seq of the earliest observation. Output ordering follows the key.
std::vector<PeerRecord> merge_records(std::vector<PeerRecord> records);

}  // namespace btsleuth
