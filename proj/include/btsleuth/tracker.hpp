#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "btsleuth/clock.hpp"
#include "btsleuth/messages.hpp"
#include "btsleuth/udp.hpp"

namespace btsleuth {

// Datagram tracker: a GetPeers both registers the sender and asks for the
// peer list, so every response contains at least the requester. Entries
// expire after ttl; the clock is injectable so expiry is testable without
// waiting.
class TrackerEmulator {
public:
    struct Options {
        Endpoint6 bind{{127, 0, 0, 1}, 0};
        std::int64_t ttl_ms = 60000;
        Clock* clock = &SystemClock::instance();
    };

    struct Entry {
        PeerId peer;
        Endpoint6 external;
        Endpoint6 local;
        Instant last_announce = 0;
    };

    TrackerEmulator() : TrackerEmulator(Options{}) {}
    explicit TrackerEmulator(Options options);
    ~TrackerEmulator();

    TrackerEmulator(const TrackerEmulator&) = delete;
    TrackerEmulator& operator=(const TrackerEmulator&) = delete;

    void start();
    void stop();

    Endpoint6 endpoint() const;

    // Live (non-expired) entries for a share, for registry inspection.
    std::vector<Entry> entries(const ShareId& share) const;

    std::uint64_t malformed_count() const;
    std::uint64_t request_count() const;

private:
    void serve();
    void handle(const Bytes& payload, const Endpoint6& src);
    std::vector<Entry>& live_entries_locked(const ShareId& share, Instant now);

    Options options_;
    UdpSocket sock_;
    std::thread thread_;
    std::atomic<bool> running_{false};

    mutable std::mutex mu_;
    std::map<ShareId, std::vector<Entry>> registry_;
    std::uint64_t malformed_ = 0;
    std::uint64_t requests_ = 0;
};

}  // namespace btsleuth
