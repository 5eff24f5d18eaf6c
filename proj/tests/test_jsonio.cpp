#include <doctest.h>

#include "btsleuth/jsonio.hpp"

#include "btsleuth/sha1.hpp"
#include "support.hpp"

using namespace btsleuth;
using namespace btsleuth::testing;

TEST_CASE("canonical form sorts keys and drops whitespace") {
    Json j;
    j["zulu"] = 1;
    j["alpha"] = Json{{"nested", true}, {"also", "x"}};
    j["mike"] = Json::array({3, 2, 1});
    CHECK(canonical_json(j) == R"({"alpha":{"also":"x","nested":true},"mike":[3,2,1],"zulu":1})");

    CHECK(canonical_json(Json::parse(R"({ "b" : 2 , "a" : 1 })")) == R"({"a":1,"b":2})");
    CHECK(canonical_json(Json::object()) == "{}");
}

TEST_CASE("messages dissect to typed views") {
    Rng rng(1500);
    PeerId peer = peer_id_from(rng);
    ShareId share = share_id_from(rng);

    Json gp = describe_message(GetPeers{Endpoint6{{192, 168, 1, 5}, 3838}, peer, share});
    CHECK(gp["type"] == "get_peers");
    CHECK(gp["peer"] == peer.hex());
    CHECK(gp["la"] == "192.168.1.5:3838");
    CHECK(gp["share"] == digest_hex(share.digest));

    std::array<std::uint8_t, 12> suffix{};
    suffix.fill(0xab);
    Json ping = describe_message(Ping{peer, 40000, make_lan_share(share, suffix)});
    CHECK(ping["type"] == "ping");
    CHECK(ping["share"] == digest_hex(share.digest));
    CHECK(ping["suffix"] == "abababababababababababab");

    Json chunk = describe_message(Chunk{7, bytes_of("abc")});
    CHECK(chunk["type"] == "chunk");
    CHECK(chunk["index"] == 7);
    CHECK(chunk["length"] == 3);
    CHECK(chunk["sha1"] == "a9993e364706816aba3e25717850c26c9cd0d89d");

    Json notice = describe_message(ErrorNotice{"Timeout", "too slow"});
    CHECK(notice["type"] == "error_notice");
    CHECK(notice["code"] == "Timeout");
}

TEST_CASE("frames dissect with header fields and opaque fallback") {
    Rng rng(1501);
    PeerId peer = peer_id_from(rng);
    ShareId share = share_id_from(rng);

    Frame direct = build(GetPeers{Endpoint6{{10, 0, 0, 1}, 1000}, peer, share});
    Json d = describe_frame(direct);
    CHECK(d["mode"] == "direct");
    CHECK(d["message"]["type"] == "get_peers");
    CHECK(!d.contains("relay_target"));

    PeerId target = peer_id_from(rng);
    Frame opaque = Frame::relay(target, bytes_of("not bencoded at all"));
    Json o = describe_frame(opaque);
    CHECK(o["mode"] == "relay");
    CHECK(o["relay_target"] == target.hex());
    CHECK(o["message"]["type"] == "opaque");

    Json wire = describe_wire(encode_frame(direct));
    CHECK(wire["message"]["type"] == "get_peers");

    Json bad = describe_wire(bytes_of("BSYNK rubbish"));
    CHECK(bad["error"] == "NotBsync");
    CHECK(bad.contains("offset"));
}

TEST_CASE("peer records survive the json round trip") {
    Rng rng(1502);
    for (int i = 0; i < 20; ++i) {
        PeerRecord r;
        r.peer = peer_id_from(rng);
        r.external = endpoint_from(rng);
        r.local = endpoint_from(rng);
        r.source.kind = static_cast<DiscoverySource::Kind>(rng.below(3));
        r.source.origin = endpoint_from(rng);
        r.first_seen = static_cast<Instant>(rng.below(1'700'000'000'000));
        r.last_seen = r.first_seen + static_cast<Instant>(rng.below(100'000));
        r.seq = rng.below(1 << 20);
        CHECK(peer_record_from_json(peer_record_json(r)) == r);
    }

    Json j = peer_record_json(PeerRecord{});
    CHECK(j.contains("first_seen"));
    CHECK(j["source"]["kind"] == "tracker");
}
