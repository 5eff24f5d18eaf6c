#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "btsleuth/discovery.hpp"
#include "btsleuth/messages.hpp"
#include "btsleuth/transfer.hpp"
#include "btsleuth/udp.hpp"
#include "btsleuth/wiretap.hpp"

namespace btsleuth {

// One file a peer offers under a share. `serve` limits which chunks the peer
// actually answers for; absent means all of them.
struct SharedFile {
    std::string path;
    Bytes content;
    FileManifest manifest;
    std::optional<std::vector<bool>> serve;
};

struct PeerShare {
    ShareId share;
    std::vector<SharedFile> files;
};

SharedFile shared_file(const std::string& path, Bytes content,
                       std::uint64_t chunk_size = kDefaultChunkSize);

// Builds a share from a directory tree; file paths become share-relative
// names with '/' separators. Throws IoError on unreadable files.
PeerShare share_from_directory(const ShareId& share, const std::filesystem::path& root,
                               std::uint64_t chunk_size = kDefaultChunkSize);

// A scriptable client instance: announces its shares to a tracker, answers
// LAN and known-peer pings, and serves chunk requests, all from one UDP
// endpoint. The bind address stands in for the host's address, so several
// instances on distinct loopback addresses model distinct machines.
class PeerEmulator {
public:
    struct Options {
        PeerId peer;
        Endpoint6 bind{{127, 0, 0, 1}, 0};
        // `la` value for announces; defaults to the resolved bind endpoint
        std::optional<Endpoint6> advertised_local;
        std::vector<PeerShare> shares;
        bool lan = true;
        Endpoint6 lan_group{{239, 192, 0, 0}, 3838};
        std::optional<Endpoint6> tracker;
        // every served chunk arrives damaged; for failover drills
        bool corrupt_chunks = false;
        WireTap* tap = nullptr;
    };

    PeerEmulator() : PeerEmulator(Options{}) {}
    explicit PeerEmulator(Options options);
    ~PeerEmulator();

    PeerEmulator(const PeerEmulator&) = delete;
    PeerEmulator& operator=(const PeerEmulator&) = delete;

    void start();
    void stop();

    // Moves the peer to a new address, as an ISP reallocation would; the
    // instance keeps its identity and shares. The peer does not re-announce
    // by itself.
    void rebind(const Endpoint6& new_bind);

    const PeerId& self() const { return options_.peer; }
    Endpoint6 endpoint() const;
    Endpoint6 advertised_local() const;

    // One registration round: a get_peers to the tracker for every share,
    // fire and forget. The responses feed peer_list() as they arrive.
    void announce_now();
    void start_announcing(std::int64_t period_ms);

    std::vector<PeerEntry> peer_list(const ShareId& share) const;

    std::uint64_t served_chunks() const { return served_chunks_; }
    std::uint64_t answered_pings() const { return answered_pings_; }
    std::uint64_t announces_sent() const { return announces_sent_; }

private:
    void serve_loop();
    void lan_loop();
    void announce_loop(std::int64_t period_ms);
    void handle(const Bytes& datagram, const Endpoint6& from, const Endpoint6& seen_at);
    void reply(const Frame& frame, const Endpoint6& to);
    const PeerShare* share_of(const ShareId& id) const;
    void answer_ping(const Ping& ping, const Endpoint6& from);
    void answer_get_chunk(const GetChunk& req, const Endpoint6& from);

    Options options_;
    std::optional<UdpSocket> sock_;
    std::optional<UdpSocket> lan_sock_;
    Endpoint6 local_;
    std::thread serve_thread_;
    std::thread lan_thread_;
    std::thread announce_thread_;
    std::atomic<bool> running_{false};
    std::atomic<bool> announcing_{false};
    std::int64_t announce_period_ms_ = 0;
    mutable std::mutex mu_;
    std::condition_variable announce_cv_;
    std::map<ShareId, std::vector<PeerEntry>> peer_lists_;
    std::atomic<std::uint64_t> served_chunks_{0};
    std::atomic<std::uint64_t> answered_pings_{0};
    std::atomic<std::uint64_t> announces_sent_{0};
};

}  // namespace btsleuth
