#include "btsleuth/peer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include "btsleuth/frame.hpp"

namespace btsleuth {

SharedFile shared_file(const std::string& path, Bytes content, std::uint64_t chunk_size) {
    SharedFile f;
    f.path = path;
    f.manifest = manifest_of_content(content, path, chunk_size);
    f.content = std::move(content);
    return f;
}

PeerShare share_from_directory(const ShareId& share, const std::filesystem::path& root,
                               std::uint64_t chunk_size) {
    PeerShare out;
    out.share = share;
    std::vector<std::filesystem::path> files;
    try {
        for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
    } catch (const std::filesystem::filesystem_error& e) {
        throw Error(Errc::io_error, std::string("cannot walk ") + root.string() + ": " + e.what());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw Error(Errc::io_error, "cannot read " + file.string());
        Bytes content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        out.files.push_back(shared_file(file.lexically_relative(root).generic_string(),
                                        std::move(content), chunk_size));
    }
    return out;
}

PeerEmulator::PeerEmulator(Options options) : options_(std::move(options)) {}

PeerEmulator::~PeerEmulator() { stop(); }

void PeerEmulator::start() {
    if (running_) return;
    sock_.emplace(options_.bind);
    local_ = sock_->local_endpoint();
    running_ = true;
    serve_thread_ = std::thread([this] { serve_loop(); });
    if (options_.lan) {
        lan_sock_.emplace(multicast_listener(options_.lan_group, {127, 0, 0, 1}));
        lan_thread_ = std::thread([this] { lan_loop(); });
    }
}

void PeerEmulator::stop() {
    if (!running_.exchange(false)) return;
    announcing_ = false;
    announce_cv_.notify_all();
    if (sock_) sock_->shutdown();
    if (lan_sock_) lan_sock_->shutdown();
    if (serve_thread_.joinable()) serve_thread_.join();
    if (lan_thread_.joinable()) lan_thread_.join();
    if (announce_thread_.joinable()) announce_thread_.join();
    lan_sock_.reset();
    sock_.reset();
}

void PeerEmulator::rebind(const Endpoint6& new_bind) {
    std::int64_t period = announcing_ ? announce_period_ms_ : 0;
    stop();
    options_.bind = new_bind;
    start();
    if (period > 0) start_announcing(period);
}

Endpoint6 PeerEmulator::endpoint() const { return running_ ? local_ : options_.bind; }

Endpoint6 PeerEmulator::advertised_local() const {
    return options_.advertised_local.value_or(endpoint());
}

void PeerEmulator::announce_now() {
    if (!running_ || !options_.tracker) return;
    Endpoint6 la = advertised_local();
    for (const PeerShare& share : options_.shares) {
        Bytes request = encode_frame(build(GetPeers{la, options_.peer, share.share}));
        sock_->send_to(request, *options_.tracker);
        if (options_.tap) {
            options_.tap->append(Direction::sent, Transport::udp, local_, *options_.tracker,
                                 request);
        }
        ++announces_sent_;
    }
}

void PeerEmulator::start_announcing(std::int64_t period_ms) {
    if (!running_ || announcing_.exchange(true)) return;
    announce_period_ms_ = period_ms;
    if (announce_thread_.joinable()) announce_thread_.join();
    announce_thread_ = std::thread([this, period_ms] { announce_loop(period_ms); });
}

void PeerEmulator::announce_loop(std::int64_t period_ms) {
    while (running_ && announcing_) {
        announce_now();
        std::unique_lock lock(mu_);
        announce_cv_.wait_for(lock, std::chrono::milliseconds(period_ms),
                              [this] { return !running_ || !announcing_; });
    }
}

std::vector<PeerEntry> PeerEmulator::peer_list(const ShareId& share) const {
    std::lock_guard lock(mu_);
    auto it = peer_lists_.find(share);
    return it == peer_lists_.end() ? std::vector<PeerEntry>{} : it->second;
}

void PeerEmulator::serve_loop() {
    while (running_) {
        auto got = sock_->recv_from(200);
        if (!got) continue;
        handle(got->first, got->second, local_);
    }
}

void PeerEmulator::lan_loop() {
    while (running_) {
        auto got = lan_sock_->recv_from(200);
        if (!got) continue;
        handle(got->first, got->second, options_.lan_group);
    }
}

void PeerEmulator::handle(const Bytes& datagram, const Endpoint6& from, const Endpoint6& seen_at) {
    if (options_.tap) {
        options_.tap->append(Direction::received, Transport::udp, from, seen_at, datagram);
    }
    Message m;
    try {
        m = parse(decode_frame(datagram));
    } catch (const Error&) {
        return;  // junk on the wire is not our problem
    }
    if (const auto* ping = std::get_if<Ping>(&m)) {
        answer_ping(*ping, from);
    } else if (const auto* req = std::get_if<GetChunk>(&m)) {
        answer_get_chunk(*req, from);
    } else if (const auto* resp = std::get_if<PeersResponse>(&m)) {
        std::lock_guard lock(mu_);
        peer_lists_[resp->share] = resp->peers;
    }
}

void PeerEmulator::reply(const Frame& frame, const Endpoint6& to) {
    Bytes wire = encode_frame(frame);
    try {
        sock_->send_to(wire, to);
    } catch (const Error&) {
        return;  // requester vanished between datagrams
    }
    if (options_.tap) {
        options_.tap->append(Direction::sent, Transport::udp, local_, to, wire);
    }
}

const PeerShare* PeerEmulator::share_of(const ShareId& id) const {
    for (const PeerShare& s : options_.shares) {
        if (s.share == id) return &s;
    }
    return nullptr;
}

void PeerEmulator::answer_ping(const Ping& ping, const Endpoint6& from) {
    const PeerShare* share = share_of(lan_share_prefix(ping.share));
    if (!share) return;  // not our share: stay silent, like a real client
    ++answered_pings_;
    reply(build(PingReply{options_.peer, local_.port, share->share}), from);
}

void PeerEmulator::answer_get_chunk(const GetChunk& req, const Endpoint6& from) {
    const PeerShare* share = share_of(req.share);
    const SharedFile* file = nullptr;
    if (share) {
        for (const SharedFile& f : share->files) {
            if (f.path == req.path) {
                file = &f;
                break;
            }
        }
    }
    auto index = static_cast<std::size_t>(req.index);
    if (!file || index >= file->manifest.chunk_count()) {
        reply(build(ErrorNotice{errc_name(Errc::unrecognized_input),
                                "no chunk " + std::to_string(req.index) + " under " + req.path}),
              from);
        return;
    }
    if (file->serve && !(*file->serve)[index]) {
        reply(build(ErrorNotice{errc_name(Errc::incomplete_coverage),
                                "chunk " + std::to_string(req.index) + " not held"}),
              from);
        return;
    }
    auto start = static_cast<std::ptrdiff_t>(index * file->manifest.chunk_size);
    auto len = static_cast<std::ptrdiff_t>(file->manifest.chunk_length(index));
    Bytes data(file->content.begin() + start, file->content.begin() + start + len);
    if (options_.corrupt_chunks && !data.empty()) data[0] ^= 0xff;
    ++served_chunks_;
    reply(build(Chunk{req.index, std::move(data)}), from);
}

}  // namespace btsleuth
