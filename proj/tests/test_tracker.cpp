#include <doctest.h>

#include "btsleuth/messages.hpp"
#include "btsleuth/tracker.hpp"
#include "btsleuth/udp.hpp"

#include "support.hpp"

using namespace btsleuth;
using namespace btsleuth::testing;

namespace {

PeersResponse announce_once(UdpSocket& sock, const Endpoint6& tracker, const PeerId& peer,
                            const ShareId& share, const Endpoint6& la) {
    GetPeers req{la, peer, share};
    sock.send_to(encode_frame(build(req)), tracker);
    auto got = sock.recv_from(2000);
    REQUIRE(got.has_value());
    Message m = parse(decode_frame(got->first));
    REQUIRE(std::holds_alternative<PeersResponse>(m));
    return std::get<PeersResponse>(m);
}

}  // namespace

TEST_CASE("lone announcer gets itself echoed back") {
    TrackerEmulator tracker;
    tracker.start();

    Rng rng(701);
    PeerId peer = peer_id_from(rng);
    ShareId share = share_id_from(rng);
    UdpSocket sock(Endpoint6{{127, 0, 0, 1}, 0});
    Endpoint6 la{{10, 0, 0, 7}, 31000};

    PeersResponse resp = announce_once(sock, tracker.endpoint(), peer, share, la);
    CHECK(resp.share == share);
    CHECK(resp.ea == sock.local_endpoint());
    REQUIRE(resp.peers.size() == 1);
    CHECK(resp.peers[0].peer == peer);
    CHECK(resp.peers[0].external == sock.local_endpoint());
    CHECK(resp.peers[0].local == la);

    tracker.stop();
}

TEST_CASE("two announcers on one share learn about each other") {
    TrackerEmulator tracker;
    tracker.start();

    Rng rng(702);
    ShareId share = share_id_from(rng);
    PeerId pa = peer_id_from(rng);
    PeerId pb = peer_id_from(rng);
    UdpSocket sa(Endpoint6{{127, 0, 0, 1}, 0});
    UdpSocket sb(Endpoint6{{127, 0, 0, 1}, 0});
    Endpoint6 la_a{{10, 0, 0, 1}, 20001};
    Endpoint6 la_b{{10, 0, 0, 2}, 20002};

    announce_once(sa, tracker.endpoint(), pa, share, la_a);
    PeersResponse resp = announce_once(sb, tracker.endpoint(), pb, share, la_b);

    REQUIRE(resp.peers.size() == 2);
    CHECK(resp.peers[0].peer == pa);
    CHECK(resp.peers[0].external == sa.local_endpoint());
    CHECK(resp.peers[1].peer == pb);
    CHECK(resp.peers[1].external == sb.local_endpoint());

    tracker.stop();
}

TEST_CASE("shares are isolated registries") {
    TrackerEmulator tracker;
    tracker.start();

    Rng rng(703);
    ShareId share_a = share_id_from(rng);
    ShareId share_b = share_id_from(rng);
    PeerId pa = peer_id_from(rng);
    PeerId pb = peer_id_from(rng);
    UdpSocket sa(Endpoint6{{127, 0, 0, 1}, 0});
    UdpSocket sb(Endpoint6{{127, 0, 0, 1}, 0});

    announce_once(sa, tracker.endpoint(), pa, share_a, Endpoint6{{10, 0, 0, 1}, 1});
    PeersResponse resp = announce_once(sb, tracker.endpoint(), pb, share_b, Endpoint6{{10, 0, 0, 2}, 2});

    REQUIRE(resp.peers.size() == 1);
    CHECK(resp.peers[0].peer == pb);

    tracker.stop();
}

TEST_CASE("repeat announces refresh rather than duplicate") {
    TrackerEmulator tracker;
    tracker.start();

    Rng rng(704);
    ShareId share = share_id_from(rng);
    PeerId peer = peer_id_from(rng);
    UdpSocket sock(Endpoint6{{127, 0, 0, 1}, 0});
    Endpoint6 la{{10, 0, 0, 9}, 9000};

    for (int i = 0; i < 4; ++i) announce_once(sock, tracker.endpoint(), peer, share, la);
    CHECK(tracker.entries(share).size() == 1);
    CHECK(tracker.request_count() == 4);

    tracker.stop();
}

TEST_CASE("entries lapse after the ttl") {
    ManualClock clock(1'000'000);
    TrackerEmulator::Options opts;
    opts.ttl_ms = 60'000;
    opts.clock = &clock;
    TrackerEmulator tracker(opts);
    tracker.start();

    Rng rng(705);
    ShareId share = share_id_from(rng);
    PeerId pa = peer_id_from(rng);
    PeerId pb = peer_id_from(rng);
    UdpSocket sa(Endpoint6{{127, 0, 0, 1}, 0});
    UdpSocket sb(Endpoint6{{127, 0, 0, 1}, 0});

    announce_once(sa, tracker.endpoint(), pa, share, Endpoint6{{10, 0, 0, 1}, 1});
    clock.advance(59'999);
    CHECK(tracker.entries(share).size() == 1);

    clock.advance(1);
    CHECK(tracker.entries(share).empty());

    // A fresh announce resurrects only the announcer, not the lapsed entry.
    PeersResponse resp = announce_once(sb, tracker.endpoint(), pb, share, Endpoint6{{10, 0, 0, 2}, 2});
    REQUIRE(resp.peers.size() == 1);
    CHECK(resp.peers[0].peer == pb);

    tracker.stop();
}

TEST_CASE("announce inside the ttl keeps an entry alive") {
    ManualClock clock(5'000'000);
    TrackerEmulator::Options opts;
    opts.clock = &clock;
    TrackerEmulator tracker(opts);
    tracker.start();

    Rng rng(706);
    ShareId share = share_id_from(rng);
    PeerId peer = peer_id_from(rng);
    UdpSocket sock(Endpoint6{{127, 0, 0, 1}, 0});

    announce_once(sock, tracker.endpoint(), peer, share, Endpoint6{{10, 0, 0, 3}, 3});
    clock.advance(50'000);
    announce_once(sock, tracker.endpoint(), peer, share, Endpoint6{{10, 0, 0, 3}, 3});
    clock.advance(50'000);
    CHECK(tracker.entries(share).size() == 1);

    tracker.stop();
}

TEST_CASE("garbage datagrams are counted and never answered") {
    TrackerEmulator tracker;
    tracker.start();

    UdpSocket sock(Endpoint6{{127, 0, 0, 1}, 0});
    sock.send_to(bytes_of("not a frame"), tracker.endpoint());
    // A well-formed frame that is not a get_peers request is also dropped.
    Rng rng(707);
    Ping ping{peer_id_from(rng), 4000, make_lan_share(share_id_from(rng), bytes_of("0123456789ab"))};
    sock.send_to(encode_frame(build(ping)), tracker.endpoint());

    CHECK_FALSE(sock.recv_from(200).has_value());
    CHECK(tracker.malformed_count() == 2);
    CHECK(tracker.request_count() == 0);

    tracker.stop();
}

TEST_CASE("response timestamp comes from the injected clock") {
    ManualClock clock(1'755'000'000'000);
    TrackerEmulator::Options opts;
    opts.clock = &clock;
    TrackerEmulator tracker(opts);
    tracker.start();

    Rng rng(708);
    UdpSocket sock(Endpoint6{{127, 0, 0, 1}, 0});
    PeersResponse resp =
        announce_once(sock, tracker.endpoint(), peer_id_from(rng), share_id_from(rng),
                      Endpoint6{{10, 0, 0, 4}, 4});
    CHECK(resp.time == 1'755'000'000);

    tracker.stop();
}
