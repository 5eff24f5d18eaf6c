#include "btsleuth/messages.hpp"

#include <algorithm>

namespace btsleuth {

namespace {

constexpr std::string_view kGetPeers = "get_peers";
constexpr std::string_view kPeers = "peers";
constexpr std::string_view kPing = "ping";
constexpr std::string_view kGetChunk = "get_chunk";
constexpr std::string_view kChunk = "chunk";

BValue endpoint_value(const Endpoint6& e) {
    auto wire = encode_endpoint(e);
    return BValue::string(std::span<const std::uint8_t>(wire));
}

template <std::size_t N>
BValue array_value(const std::array<std::uint8_t, N>& a) {
    return BValue::string(std::span<const std::uint8_t>(a));
}

template <std::size_t N>
std::optional<std::array<std::uint8_t, N>> fixed(const BValue* v) {
    if (!v || !v->is_string() || v->as_string().size() != N) return std::nullopt;
    std::array<std::uint8_t, N> out{};
    std::copy_n(v->as_string().begin(), N, out.begin());
    return out;
}

std::optional<Endpoint6> endpoint_field(const BValue* v) {
    auto raw = fixed<6>(v);
    if (!raw) return std::nullopt;
    return decode_endpoint(*raw);
}

std::optional<std::uint16_t> port_field(const BValue* v) {
    if (!v || !v->is_integer()) return std::nullopt;
    std::int64_t p = v->as_integer();
    if (p < 0 || p > 65535) return std::nullopt;
    return static_cast<std::uint16_t>(p);
}

[[noreturn]] void unknown(const std::string& what, BValue raw) {
    throw UnknownMessageError(what, std::move(raw));
}

BValue payload_of(const GetPeers& m) {
    BValue d = BValue::dict();
    d.set("la", endpoint_value(m.la));
    d.set("m", BValue::string(kGetPeers));
    d.set("peer", array_value(m.peer.id));
    d.set("share", array_value(m.share.digest));
    return d;
}

BValue payload_of(const PeersResponse& m) {
    if (m.peers.empty()) {
        throw Error(Errc::invariant_violation, "peer list will never be empty");
    }
    BValue peers = BValue::list();
    for (const auto& p : m.peers) {
        BValue entry = BValue::dict();
        entry.set("a", endpoint_value(p.external));
        entry.set("la", endpoint_value(p.local));
        entry.set("p", array_value(p.peer.id));
        peers.push_back(std::move(entry));
    }
    BValue d = BValue::dict();
    d.set("ea", endpoint_value(m.ea));
    d.set("m", BValue::string(kPeers));
    d.set("peers", std::move(peers));
    d.set("share", array_value(m.share.digest));
    d.set("time", BValue::integer(m.time));
    return d;
}

BValue ping_payload(const PeerId& peer, std::optional<std::uint16_t> port,
                    std::span<const std::uint8_t> share) {
    BValue d = BValue::dict();
    d.set("m", BValue::string(kPing));
    d.set("peer", array_value(peer.id));
    if (port) d.set("port", BValue::integer(*port));
    d.set("share", BValue::string(share));
    return d;
}

Message parse_direct(const BValue& body);
Message parse_relay(const Frame& f);

}  // namespace

LanShare make_lan_share(const ShareId& share, std::span<const std::uint8_t> suffix12) {
    if (suffix12.size() != 12) {
        throw Error(Errc::wrong_length, "lan share suffix must be 12 octets");
    }
    LanShare out{};
    std::copy_n(share.digest.begin(), 20, out.begin());
    std::copy_n(suffix12.begin(), 12, out.begin() + 20);
    return out;
}

ShareId lan_share_prefix(const LanShare& s) {
    ShareId out;
    std::copy_n(s.begin(), 20, out.digest.begin());
    return out;
}

const char* message_name(const Message& m) {
    struct Namer {
        const char* operator()(const GetPeers&) { return "get_peers"; }
        const char* operator()(const PeersResponse&) { return "peers"; }
        const char* operator()(const Ping&) { return "ping"; }
        const char* operator()(const PingReply&) { return "ping_reply"; }
        const char* operator()(const RelayPing&) { return "relay_ping"; }
        const char* operator()(const RelayHashmap&) { return "relay_hashmap"; }
        const char* operator()(const RelayNonceOffer&) { return "relay_nonce_offer"; }
        const char* operator()(const RelayNonceAck&) { return "relay_nonce_ack"; }
        const char* operator()(const ErrorNotice&) { return "error"; }
        const char* operator()(const GetChunk&) { return "get_chunk"; }
        const char* operator()(const Chunk&) { return "chunk"; }
    };
    return std::visit(Namer{}, m);
}

Frame build(const Message& m, const std::optional<PeerId>& relay_target) {
    struct Builder {
        const std::optional<PeerId>& target;

        Frame direct(BValue payload) const {
            if (target) {
                throw Error(Errc::invariant_violation,
                            "direct messages do not take a relay target");
            }
            return Frame::direct(encode_bvalue(payload));
        }
        Frame relay(Bytes payload) const {
            if (!target) {
                throw Error(Errc::invariant_violation, "relay messages require a target PeerID");
            }
            return Frame::relay(*target, std::move(payload));
        }

        Frame operator()(const GetPeers& m) const { return direct(payload_of(m)); }
        Frame operator()(const PeersResponse& m) const { return direct(payload_of(m)); }
        Frame operator()(const Ping& m) const {
            return direct(ping_payload(m.peer, m.port, m.share));
        }
        Frame operator()(const PingReply& m) const {
            return direct(ping_payload(m.peer, m.port, m.share.digest));
        }
        Frame operator()(const RelayPing& m) const {
            return relay(encode_bvalue(ping_payload(m.peer, std::nullopt, m.share)));
        }
        Frame operator()(const RelayHashmap& m) const { return relay(m.blob); }
        Frame operator()(const RelayNonceOffer& m) const {
            BValue d = BValue::dict();
            d.set("nonce", array_value(m.nonce));
            d.set("share", array_value(m.share));
            d.set("sid", array_value(m.sid));
            return relay(encode_bvalue(d));
        }
        Frame operator()(const RelayNonceAck& m) const {
            if (m.sid_status != "OK") {
                throw Error(Errc::invariant_violation, "sid status must be OK");
            }
            BValue d = BValue::dict();
            d.set("nonce", array_value(m.nonce));
            d.set("sid", BValue::string(m.sid_status));
            return relay(encode_bvalue(d));
        }
        Frame operator()(const ErrorNotice& m) const {
            BValue d = BValue::dict();
            d.set("error", BValue::string(m.code));
            d.set("text", BValue::string(m.text));
            return direct(d);
        }
        Frame operator()(const GetChunk& m) const {
            if (m.path.empty()) {
                throw Error(Errc::invariant_violation, "chunk request without a path");
            }
            if (m.index < 0) {
                throw Error(Errc::invariant_violation, "chunk index is never negative");
            }
            BValue d = BValue::dict();
            d.set("index", BValue::integer(m.index));
            d.set("m", BValue::string(kGetChunk));
            d.set("path", BValue::string(m.path));
            d.set("share", array_value(m.share.digest));
            return direct(d);
        }
        Frame operator()(const Chunk& m) const {
            if (m.index < 0) {
                throw Error(Errc::invariant_violation, "chunk index is never negative");
            }
            BValue d = BValue::dict();
            d.set("data", BValue::string(m.data));
            d.set("index", BValue::integer(m.index));
            d.set("m", BValue::string(kChunk));
            return direct(d);
        }
    };
    return std::visit(Builder{relay_target}, m);
}

namespace {

Message parse_direct(const BValue& body) {
    if (const BValue* code = body.find("error"); code && code->is_string()) {
        ErrorNotice notice;
        notice.code = to_string(code->as_string());
        if (const BValue* text = body.find("text"); text && text->is_string()) {
            notice.text = to_string(text->as_string());
        }
        return notice;
    }

    const BValue* m = body.find("m");
    if (!m || !m->is_string()) unknown("missing message label", body);
    const Bytes& label = m->as_string();

    if (label == bytes_of(kGetPeers)) {
        auto la = endpoint_field(body.find("la"));
        auto peer = fixed<20>(body.find("peer"));
        auto share = fixed<20>(body.find("share"));
        if (!la || !peer || !share) unknown("get_peers key set mismatch", body);
        return GetPeers{*la, PeerId{*peer}, ShareId{*share}};
    }

    if (label == bytes_of(kPeers)) {
        auto ea = endpoint_field(body.find("ea"));
        auto share = fixed<20>(body.find("share"));
        const BValue* time = body.find("time");
        const BValue* peers = body.find("peers");
        if (!ea || !share || !time || !time->is_integer() || !peers || !peers->is_list()) {
            unknown("peers key set mismatch", body);
        }
        PeersResponse out;
        out.ea = *ea;
        out.share = ShareId{*share};
        out.time = time->as_integer();
        for (const auto& item : peers->as_list()) {
            if (!item.is_dict()) unknown("peer entry is not a dictionary", body);
            auto a = endpoint_field(item.find("a"));
            auto la = endpoint_field(item.find("la"));
            auto p = fixed<20>(item.find("p"));
            if (!a || !la || !p) unknown("peer entry key set mismatch", body);
            out.peers.push_back(PeerEntry{*a, *la, PeerId{*p}});
        }
        if (out.peers.empty()) unknown("peers response with empty list", body);
        return out;
    }

    if (label == bytes_of(kGetChunk)) {
        auto share = fixed<20>(body.find("share"));
        const BValue* path = body.find("path");
        const BValue* index = body.find("index");
        if (!share || !path || !path->is_string() || path->as_string().empty() || !index ||
            !index->is_integer() || index->as_integer() < 0) {
            unknown("get_chunk key set mismatch", body);
        }
        return GetChunk{ShareId{*share}, to_string(path->as_string()), index->as_integer()};
    }

    if (label == bytes_of(kChunk)) {
        const BValue* data = body.find("data");
        const BValue* index = body.find("index");
        if (!data || !data->is_string() || !index || !index->is_integer() ||
            index->as_integer() < 0) {
            unknown("chunk key set mismatch", body);
        }
        return Chunk{index->as_integer(), data->as_string()};
    }

    if (label == bytes_of(kPing)) {
        auto peer = fixed<20>(body.find("peer"));
        auto port = port_field(body.find("port"));
        const BValue* share = body.find("share");
        if (!peer || !port || !share || !share->is_string()) {
            unknown("ping key set mismatch", body);
        }
        // share length distinguishes the multicast ping (32) from the reply (20)
        if (auto s32 = fixed<32>(share)) {
            return Ping{PeerId{*peer}, *port, *s32};
        }
        if (auto s20 = fixed<20>(share)) {
            return PingReply{PeerId{*peer}, *port, ShareId{*s20}};
        }
        unknown("ping share length is neither 32 nor 20", body);
    }

    unknown("unrecognized message label", body);
}

Message parse_relay(const Frame& f) {
    RelayPayload rp = split_relay_payload(f.payload);
    if (!rp.dict) {
        return RelayHashmap{f.payload};
    }
    const BValue& body = *rp.dict;

    if (const BValue* m = body.find("m"); m && m->is_string() && m->as_string() == bytes_of(kPing)) {
        auto peer = fixed<20>(body.find("peer"));
        auto share = fixed<32>(body.find("share"));
        if (!peer || !share) unknown("relay ping key set mismatch", body);
        return RelayPing{PeerId{*peer}, *share};
    }

    if (body.find("nonce")) {
        auto nonce = fixed<16>(body.find("nonce"));
        const BValue* sid = body.find("sid");
        if (!nonce || !sid) unknown("relay nonce key set mismatch", body);
        if (auto sid16 = fixed<16>(sid)) {
            auto share = fixed<32>(body.find("share"));
            if (!share) unknown("nonce offer without 32-octet share", body);
            return RelayNonceOffer{*nonce, *share, *sid16};
        }
        if (sid->is_string() && sid->as_string() == bytes_of("OK")) {
            return RelayNonceAck{*nonce, "OK"};
        }
        unknown("sid is neither a 16-octet value nor OK", body);
    }

    // A relay unit with an unrecognized trailing dict is still opaque relay
    // data from the session's point of view.
    return RelayHashmap{f.payload};
}

}  // namespace

Message parse(const Frame& f) {
    if (f.mode == Frame::Mode::relay) {
        return parse_relay(f);
    }
    BDecoded d = decode_bvalue(f.payload);
    if (d.consumed != f.payload.size()) {
        unknown("trailing octets after direct payload", d.value);
    }
    if (!d.value.is_dict()) {
        unknown("direct payload is not a dictionary", d.value);
    }
    return parse_direct(d.value);
}

}  // namespace btsleuth
