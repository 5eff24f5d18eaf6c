#include "btsleuth/jsonio.hpp"

#include "btsleuth/sha1.hpp"

namespace btsleuth {

namespace {

std::string hex_of(std::span<const std::uint8_t> b) { return to_hex(b); }

Json entry_json(const PeerEntry& e) {
    return Json{{"external", e.external.str()}, {"local", e.local.str()}, {"peer", e.peer.hex()}};
}

struct Describer {
    Json operator()(const GetPeers& m) const {
        return Json{{"type", "get_peers"},
                    {"peer", m.peer.hex()},
                    {"la", m.la.str()},
                    {"share", digest_hex(m.share.digest)}};
    }
    Json operator()(const PeersResponse& m) const {
        Json peers = Json::array();
        for (const PeerEntry& e : m.peers) peers.push_back(entry_json(e));
        return Json{{"type", "peers_response"},
                    {"share", digest_hex(m.share.digest)},
                    {"time", m.time},
                    {"ea", m.ea.str()},
                    {"peers", peers}};
    }
    Json operator()(const Ping& m) const {
        return Json{{"type", "ping"},
                    {"peer", m.peer.hex()},
                    {"port", m.port},
                    {"share", digest_hex(lan_share_prefix(m.share).digest)},
                    {"suffix", hex_of(std::span(m.share).subspan(20))}};
    }
    Json operator()(const PingReply& m) const {
        return Json{{"type", "ping_reply"},
                    {"peer", m.peer.hex()},
                    {"port", m.port},
                    {"share", digest_hex(m.share.digest)}};
    }
    Json operator()(const RelayPing& m) const {
        return Json{{"type", "relay_ping"},
                    {"peer", m.peer.hex()},
                    {"share", digest_hex(lan_share_prefix(m.share).digest)},
                    {"suffix", hex_of(std::span(m.share).subspan(20))}};
    }
    Json operator()(const RelayHashmap& m) const {
        return Json{{"type", "relay_hashmap"},
                    {"length", m.blob.size()},
                    {"sha1", digest_hex(sha1(m.blob))}};
    }
    Json operator()(const RelayNonceOffer& m) const {
        return Json{{"type", "relay_nonce_offer"},
                    {"nonce", hex_of(m.nonce)},
                    {"share", digest_hex(lan_share_prefix(m.share).digest)},
                    {"suffix", hex_of(std::span(m.share).subspan(20))},
                    {"sid", hex_of(m.sid)}};
    }
    Json operator()(const RelayNonceAck& m) const {
        return Json{{"type", "relay_nonce_ack"}, {"nonce", hex_of(m.nonce)}, {"sid", m.sid_status}};
    }
    Json operator()(const ErrorNotice& m) const {
        return Json{{"type", "error_notice"}, {"code", m.code}, {"text", m.text}};
    }
    Json operator()(const GetChunk& m) const {
        return Json{{"type", "get_chunk"},
                    {"share", digest_hex(m.share.digest)},
                    {"path", m.path},
                    {"index", m.index}};
    }
    Json operator()(const Chunk& m) const {
        return Json{{"type", "chunk"},
                    {"index", m.index},
                    {"length", m.data.size()},
                    {"sha1", digest_hex(sha1(m.data))}};
    }
};

}  // namespace

std::string canonical_json(const Json& j) { return j.dump(); }

Json describe_message(const Message& m) { return std::visit(Describer{}, m); }

Json describe_frame(const Frame& f) {
    Json out{{"mode", f.mode == Frame::Mode::direct ? "direct" : "relay"},
             {"payload_length", f.payload.size()}};
    if (f.relay_target) out["relay_target"] = f.relay_target->hex();
    try {
        out["message"] = describe_message(parse(f));
    } catch (const UnknownMessageError&) {
        out["message"] = Json{{"type", "opaque"}, {"sha1", digest_hex(sha1(f.payload))}};
    }
    return out;
}

Json describe_wire(std::span<const std::uint8_t> wire) {
    try {
        return describe_frame(decode_frame(wire));
    } catch (const CodecError& e) {
        return Json{{"error", errc_name(e.code())}, {"offset", e.offset()}, {"detail", e.what()}};
    }
}

Json peer_record_json(const PeerRecord& r) {
    return Json{{"peer", r.peer.hex()},
                {"external", r.external.str()},
                {"local", r.local.str()},
                {"source",
                 Json{{"kind", discovery_kind_name(r.source.kind)}, {"origin", r.source.origin.str()}}},
                {"first_seen_ms", r.first_seen},
                {"first_seen", iso8601_ms(r.first_seen)},
                {"last_seen_ms", r.last_seen},
                {"last_seen", iso8601_ms(r.last_seen)},
                {"seq", r.seq}};
}

namespace {

DiscoverySource::Kind kind_from_name(const std::string& name) {
    if (name == "tracker") return DiscoverySource::Kind::tracker;
    if (name == "lan") return DiscoverySource::Kind::lan;
    if (name == "known_peer") return DiscoverySource::Kind::known_peer;
    throw Error(Errc::unrecognized_input, "unknown discovery source kind: " + name);
}

PeerId peer_from_hex(const std::string& hex) {
    auto raw = from_hex(hex);
    if (!raw || raw->size() != 20) {
        throw Error(Errc::unrecognized_input, "peer id is not 20 octets of hex");
    }
    PeerId p;
    std::copy(raw->begin(), raw->end(), p.id.begin());
    return p;
}

}  // namespace

PeerRecord peer_record_from_json(const Json& j) {
    PeerRecord r;
    r.peer = peer_from_hex(j.at("peer").get<std::string>());
    r.external = parse_endpoint(j.at("external").get<std::string>());
    r.local = parse_endpoint(j.at("local").get<std::string>());
    r.source.kind = kind_from_name(j.at("source").at("kind").get<std::string>());
    r.source.origin = parse_endpoint(j.at("source").at("origin").get<std::string>());
    r.first_seen = j.at("first_seen_ms").get<Instant>();
    r.last_seen = j.at("last_seen_ms").get<Instant>();
    r.seq = j.at("seq").get<std::uint64_t>();
    return r;
}

Json stream_record_head_json(const StreamRecord& r) {
    return Json{{"seq", r.seq},
                {"at", iso8601_ms(r.captured_at)},
                {"direction", direction_name(r.direction)},
                {"transport", transport_name(r.transport)},
                {"src", r.src.str()},
                {"dst", r.dst.str()},
                {"length", r.payload.size()},
                {"sha1", digest_hex(sha1(r.payload))}};
}

}  // namespace btsleuth
