#include "btsleuth/tracker.hpp"

#include <algorithm>

#include "btsleuth/frame.hpp"

namespace btsleuth {

TrackerEmulator::TrackerEmulator(Options options)
    : options_(options), sock_(options.bind) {}

TrackerEmulator::~TrackerEmulator() { stop(); }

void TrackerEmulator::start() {
    if (running_.exchange(true)) return;
    thread_ = std::thread([this] { serve(); });
}

void TrackerEmulator::stop() {
    if (!running_.exchange(false)) return;
    sock_.shutdown();
    if (thread_.joinable()) thread_.join();
}

Endpoint6 TrackerEmulator::endpoint() const { return sock_.local_endpoint(); }

void TrackerEmulator::serve() {
    while (running_) {
        auto got = sock_.recv_from(250);
        if (!got) continue;
        handle(got->first, got->second);
    }
}

std::vector<TrackerEmulator::Entry>& TrackerEmulator::live_entries_locked(const ShareId& share,
                                                                          Instant now) {
    auto& entries = registry_[share];
    std::erase_if(entries, [&](const Entry& e) {
        return now - e.last_announce >= options_.ttl_ms;
    });
    return entries;
}

void TrackerEmulator::handle(const Bytes& payload, const Endpoint6& src) {
    GetPeers request;
    try {
        Message m = parse(decode_frame(payload));
        auto* gp = std::get_if<GetPeers>(&m);
        if (!gp) throw Error(Errc::unknown_message, "not a lookup");
        request = *gp;
    } catch (const Error&) {
        std::lock_guard lock(mu_);
        ++malformed_;
        return;
    }

    Instant now = options_.clock->now();
    PeersResponse response;
    response.ea = src;
    response.share = request.share;
    response.time = now / 1000;
    {
        std::lock_guard lock(mu_);
        ++requests_;
        auto& entries = live_entries_locked(request.share, now);
        auto it = std::find_if(entries.begin(), entries.end(), [&](const Entry& e) {
            return e.peer == request.peer && e.external == src && e.local == request.la;
        });
        if (it != entries.end()) {
            it->last_announce = now;
        } else {
            entries.push_back(Entry{request.peer, src, request.la, now});
        }
        for (const Entry& e : entries) {
            response.peers.push_back(PeerEntry{e.external, e.local, e.peer});
        }
    }

    Bytes wire = encode_frame(build(response));
    sock_.send_to(wire, src);
}

std::vector<TrackerEmulator::Entry> TrackerEmulator::entries(const ShareId& share) const {
    std::lock_guard lock(mu_);
    auto it = registry_.find(share);
    if (it == registry_.end()) return {};
    Instant now = options_.clock->now();
    std::vector<Entry> out;
    for (const Entry& e : it->second) {
        if (now - e.last_announce < options_.ttl_ms) out.push_back(e);
    }
    return out;
}

std::uint64_t TrackerEmulator::malformed_count() const {
    std::lock_guard lock(mu_);
    return malformed_;
}

std::uint64_t TrackerEmulator::request_count() const {
    std::lock_guard lock(mu_);
    return requests_;
}

}  // namespace btsleuth
