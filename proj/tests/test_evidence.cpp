#include <doctest.h>

#include "btsleuth/evidence.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <thread>

#include <unistd.h>

#include "btsleuth/peer.hpp"
#include "btsleuth/tracker.hpp"
#include "support.hpp"

using namespace btsleuth;
using namespace btsleuth::testing;

namespace {

namespace fs = std::filesystem;

template <typename F>
void wait_until(F&& cond, const char* what) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (!cond()) {
        if (std::chrono::steady_clock::now() > deadline) FAIL(what);
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
}

fs::path fresh_dir(const std::string& stem) {
    fs::path dir =
        fs::temp_directory_path() / ("btsleuth-" + stem + "-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    return dir;
}

// XOR so a second flip restores the original byte
void flip_byte(const fs::path& p, std::size_t offset) {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    REQUIRE(f.is_open());
    f.seekp(0, std::ios::end);
    REQUIRE(offset < static_cast<std::size_t>(f.tellp()));
    f.seekg(static_cast<std::streamoff>(offset));
    char c = 0;
    f.read(&c, 1);
    c = static_cast<char>(c ^ 0x01);
    f.seekp(static_cast<std::streamoff>(offset));
    f.write(&c, 1);
}

StreamRecord record_with(std::uint64_t seq, Bytes payload) {
    StreamRecord r;
    r.seq = seq;
    r.captured_at = 1000 + static_cast<Instant>(seq);
    r.direction = Direction::received;
    r.transport = Transport::udp;
    r.src = Endpoint6{{10, 0, 0, 1}, 4096};
    r.dst = Endpoint6{{127, 0, 0, 1}, 258};
    r.payload = std::move(payload);
    return r;
}

Errc code_of(const std::function<void()>& act) {
    try {
        act();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return Errc::usage;
}

}  // namespace

TEST_CASE("stream records encode to the documented wire form") {
    StreamRecord r;
    r.seq = 1;
    r.captured_at = 2;
    r.direction = Direction::received;
    r.transport = Transport::udp;
    r.src = Endpoint6{{10, 0, 0, 1}, 4096};
    r.dst = Endpoint6{{127, 0, 0, 1}, 258};
    r.payload = bytes_of("hi");

    Bytes wire = encode_stream_record(r);
    CHECK(to_hex(wire) ==
          "00000020"          // 30 fixed octets + 2 payload
          "0000000000000001"  // seq
          "0000000000000002"  // millis
          "01"                // received
          "00"                // udp
          "0a0000011000"      // 10.0.0.1:4096
          "7f0000010102"      // 127.0.0.1:258
          "6869");

    auto back = decode_stream(wire);
    REQUIRE(back.size() == 1);
    CHECK(back[0] == r);

    // several records, empty payload included, survive concatenation
    Rng rng(1800);
    Bytes all;
    std::vector<StreamRecord> sent;
    for (std::uint64_t seq = 1; seq <= 5; ++seq) {
        StreamRecord next = record_with(seq, rng.bytes(rng.below(40)));
        next.direction = seq % 2 ? Direction::received : Direction::sent;
        next.transport = seq % 3 ? Transport::udp : Transport::tcp;
        Bytes w = encode_stream_record(next);
        all.insert(all.end(), w.begin(), w.end());
        sent.push_back(std::move(next));
    }
    CHECK(decode_stream(all) == sent);
}

TEST_CASE("damaged stream bytes are rejected outright") {
    Bytes short_len = {0x00, 0x00};
    CHECK(code_of([&] { decode_stream(short_len); }) == Errc::integrity_failure);

    Bytes undersized = {0x00, 0x00, 0x00, 0x0a, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(code_of([&] { decode_stream(undersized); }) == Errc::integrity_failure);

    Bytes truncated = encode_stream_record(record_with(1, bytes_of("abc")));
    truncated.pop_back();
    CHECK(code_of([&] { decode_stream(truncated); }) == Errc::integrity_failure);

    Bytes bad_direction = encode_stream_record(record_with(1, {}));
    bad_direction[4 + 16] = 7;
    CHECK(code_of([&] { decode_stream(bad_direction); }) == Errc::integrity_failure);
}

TEST_CASE("a bag round-trips through create, append, seal, and open") {
    fs::path dir = fresh_dir("bag-roundtrip");
    Rng rng(1801);

    CaseInfo info;
    info.investigator = "unit test";
    info.share_hex = "fc4b91b3b74c71d67ee8755370e38802a990bc31";
    info.secret_note = "read-write secret supplied on the command line";

    Snapshot snap;
    snap.share = share_id_from(rng);
    snap.taken_at = 1234;
    snap.seq_lo = 5;
    snap.seq_hi = 13;

    SweepSegment segment;
    segment.self = peer_id_from(rng);
    segment.providers = {
        SweepProvider{DiscoverySource::Kind::tracker, Endpoint6{{127, 0, 0, 1}, 5001},
                      "127.0.0.1:7000"},
        SweepProvider{DiscoverySource::Kind::lan, Endpoint6{{127, 0, 0, 1}, 5002},
                      "239.192.0.0:3838"},
    };

    std::vector<StreamRecord> written;
    {
        EvidenceBag bag = EvidenceBag::create(dir, info);
        CHECK_FALSE(bag.sealed());
        for (std::uint64_t seq : {5, 9, 12}) {
            StreamRecord r = record_with(seq, rng.bytes(16));
            bag.append_stream(r);
            written.push_back(std::move(r));
        }
        CHECK(bag.stream_records() == 3);
        bag.append_snapshot(snap, segment);
        bag.append_report("notes", Json{{"text", "observed from the lab uplink"}});
        bag.seal();
        CHECK(bag.sealed());

        CHECK(code_of([&] { bag.append_stream(record_with(20, {})); }) == Errc::bag_sealed);
        CHECK(code_of([&] { bag.append_snapshot(snap, segment); }) == Errc::bag_sealed);
        CHECK(code_of([&] { bag.append_report("late", Json::object()); }) == Errc::bag_sealed);
        CHECK(code_of([&] { bag.seal(); }) == Errc::bag_sealed);
    }

    LoadedBag loaded = open_bag(dir);
    CHECK(loaded.stream == written);
    REQUIRE(loaded.snapshots.size() == 1);
    CHECK(loaded.snapshots[0] == snap);
    REQUIRE(loaded.segments.size() == 1);
    CHECK(loaded.segments[0] == segment);
    CHECK(loaded.manifest.at("case").at("investigator") == "unit test");
    CHECK(loaded.manifest.at("case").at("share") == info.share_hex);
    CHECK(loaded.manifest.at("format").at("name") == "btsleuth-bag");
    CHECK(loaded.manifest.at("integrity").at("algorithm") == "sha1");
    REQUIRE(loaded.manifest.at("reports").size() == 1);
    CHECK(loaded.manifest.at("reports")[0].at("name") == "notes");

    // the directory already holds a bag now
    CHECK(code_of([&] { EvidenceBag::create(dir, info); }) == Errc::io_error);
    fs::remove_all(dir);
}

TEST_CASE("appends enforce seq order and report naming") {
    fs::path dir = fresh_dir("bag-appends");
    EvidenceBag bag = EvidenceBag::create(dir, CaseInfo{"unit test", "", "synthetic", ""});

    bag.append_stream(record_with(4, {}));
    CHECK(code_of([&] { bag.append_stream(record_with(4, {})); }) == Errc::invariant_violation);
    CHECK(code_of([&] { bag.append_stream(record_with(3, {})); }) == Errc::invariant_violation);
    bag.append_stream(record_with(5, {}));
    CHECK(bag.stream_records() == 2);

    bag.append_report("fine", Json::object());
    for (const char* name : {"", "a/b", "a.json", "fine"}) {
        CHECK(code_of([&] { bag.append_report(name, Json::object()); }) ==
              Errc::invariant_violation);
    }
    bag.seal();
    fs::remove_all(dir);
}

TEST_CASE("any flipped byte surfaces when the bag is opened") {
    fs::path dir = fresh_dir("bag-damage");
    {
        EvidenceBag bag = EvidenceBag::create(dir, CaseInfo{"unit test", "", "synthetic", ""});
        Rng rng(1802);
        bag.append_stream(record_with(1, rng.bytes(64)));
        bag.append_stream(record_with(2, rng.bytes(64)));
        bag.append_report("notes", Json{{"text", "payload for the damage drill"}});
        bag.seal();
    }
    open_bag(dir);

    // the manifest flip lands inside the first key's value, which the
    // integrity digest always covers
    const std::pair<fs::path, std::size_t> targets[] = {
        {dir / "stream.bin", static_cast<std::size_t>(fs::file_size(dir / "stream.bin")) / 2},
        {dir / "manifest.json", 12},
        {dir / "reports" / "notes.json",
         static_cast<std::size_t>(fs::file_size(dir / "reports" / "notes.json")) / 2},
    };
    for (const auto& [target, offset] : targets) {
        flip_byte(target, offset);
        CHECK(code_of([&] { open_bag(dir); }) == Errc::integrity_failure);
        flip_byte(target, offset);
        open_bag(dir);
    }

    fs::path not_a_bag = fresh_dir("bag-absent");
    fs::create_directories(not_a_bag);
    CHECK(code_of([&] { open_bag(not_a_bag); }) == Errc::unrecognized_input);

    fs::remove_all(dir);
    fs::remove_all(not_a_bag);
}

namespace {

// the fixed endpoints of the synthetic sweep
const Endpoint6 kTrackerAt{{127, 0, 0, 1}, 7000};
const Endpoint6 kTrackerLocal{{127, 0, 0, 1}, 5001};
const Endpoint6 kLanLocal{{127, 0, 0, 1}, 5002};

StreamRecord sweep_record(std::uint64_t seq, Instant at, Direction dir, const Endpoint6& src,
                          const Endpoint6& dst, Bytes payload) {
    StreamRecord r;
    r.seq = seq;
    r.captured_at = at;
    r.direction = dir;
    r.transport = Transport::udp;
    r.src = src;
    r.dst = dst;
    r.payload = std::move(payload);
    return r;
}

}  // namespace

TEST_CASE("replay re-derives a stored snapshot from the raw stream") {
    Rng rng(1803);
    ShareId share = share_id_from(rng);
    PeerId self = peer_id_from(rng);
    PeerId pa = peer_id_from(rng);
    PeerId pb = peer_id_from(rng);
    PeerId pc = peer_id_from(rng);

    PeersResponse response;
    response.ea = Endpoint6{{203, 0, 113, 50}, 40000};
    response.share = share;
    response.time = 1;
    response.peers = {
        PeerEntry{Endpoint6{{85, 0, 0, 1}, 1001}, Endpoint6{{192, 168, 7, 2}, 3838}, pa},
        PeerEntry{Endpoint6{{85, 0, 0, 1}, 1002}, Endpoint6{{192, 168, 7, 3}, 3838}, pb},
        PeerEntry{response.ea, Endpoint6{{10, 0, 0, 5}, 3838}, self},
    };

    PingReply reply{pc, 44044, share};
    Endpoint6 reply_src{{127, 0, 0, 55}, 3838};

    ShareId other = share_id_from(rng);
    std::vector<StreamRecord> stream = {
        sweep_record(1, 1000, Direction::received, kTrackerAt, kTrackerLocal,
                     encode_frame(build(response))),
        sweep_record(2, 1100, Direction::received, reply_src, kLanLocal,
                     encode_frame(build(reply))),
        // request halves and unrelated datagrams must not affect the derivation
        sweep_record(3, 1150, Direction::sent, kTrackerLocal, kTrackerAt,
                     encode_frame(build(GetPeers{kTrackerLocal, self, share}))),
        sweep_record(4, 1200, Direction::received, kTrackerAt, Endpoint6{{127, 0, 0, 1}, 6000},
                     encode_frame(build(response))),
        sweep_record(5, 1250, Direction::received, reply_src, kLanLocal, bytes_of("notaframe")),
        sweep_record(6, 1300, Direction::received, reply_src, kLanLocal,
                     encode_frame(build(PingReply{pc, 44044, other}))),
    };

    std::vector<PeerRecord> expected = records_from_response(response, kTrackerAt, 1000, 1);
    expected.push_back(record_from_ping_reply(reply, reply_src, DiscoverySource::Kind::lan, 1100, 2));
    expected = merge_records(std::move(expected));
    std::erase_if(expected, [&](const PeerRecord& r) { return r.peer == self; });
    REQUIRE(expected.size() == 3);

    Snapshot stored;
    stored.share = share;
    stored.taken_at = 2000;
    stored.peers = expected;
    stored.seq_lo = 1;
    stored.seq_hi = 7;

    SweepSegment segment;
    segment.self = self;
    segment.providers = {
        SweepProvider{DiscoverySource::Kind::tracker, kTrackerLocal, kTrackerAt.str()},
        SweepProvider{DiscoverySource::Kind::lan, kLanLocal, "239.192.0.0:3838"},
    };

    fs::path dir = fresh_dir("bag-replay");
    {
        EvidenceBag bag = EvidenceBag::create(dir, CaseInfo{"unit test", "", "synthetic", ""});
        for (const StreamRecord& r : stream) bag.append_stream(r);
        bag.append_snapshot(stored, segment);
        bag.seal();
    }
    std::vector<Snapshot> rebuilt = bag_replay(dir);
    REQUIRE(rebuilt.size() == 1);
    CHECK(rebuilt[0] == stored);

    // a snapshot the stream cannot support names the divergent seq
    Snapshot padded = stored;
    PeerRecord phantom;
    phantom.peer = peer_id_from(rng);
    phantom.external = Endpoint6{{85, 9, 9, 9}, 2000};
    phantom.local = phantom.external;
    phantom.source = DiscoverySource{DiscoverySource::Kind::lan, reply_src};
    phantom.first_seen = 1400;
    phantom.last_seen = 1400;
    phantom.seq = 99;
    padded.peers = merge_records({expected[0], expected[1], expected[2], phantom});

    fs::path dir2 = fresh_dir("bag-replay-divergent");
    {
        EvidenceBag bag = EvidenceBag::create(dir2, CaseInfo{"unit test", "", "synthetic", ""});
        for (const StreamRecord& r : stream) bag.append_stream(r);
        bag.append_snapshot(padded, segment);
        bag.seal();
    }
    try {
        bag_replay(dir2);
        FAIL("an unsupported snapshot replayed cleanly");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::decode_divergence);
        CHECK(std::string(e.what()).find("seq 99") != std::string::npos);
    }

    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("an investigation drives live sweeps into a sealed, replayable bag") {
    Rng rng(1804);
    ShareId share = share_id_from(rng);

    ManualClock tracker_clock(0);
    TrackerEmulator::Options topts;
    topts.clock = &tracker_clock;
    TrackerEmulator tracker(topts);
    tracker.start();

    auto swarm_peer = [&](std::uint8_t host) {
        PeerEmulator::Options o;
        o.peer = peer_id_from(rng);
        o.bind = Endpoint6{{127, 73, 0, host}, 0};
        o.shares = {PeerShare{share, {}}};
        o.lan = false;
        o.tracker = tracker.endpoint();
        return o;
    };
    PeerEmulator pa(swarm_peer(1));
    PeerEmulator pb(swarm_peer(2));
    pa.start();
    pb.start();
    pa.announce_now();
    pb.announce_now();
    wait_until([&] { return tracker.entries(share).size() == 2; }, "first epoch never registered");

    fs::path dir = fresh_dir("bag-live");
    Investigation::Options iopts;
    iopts.bag_dir = dir;
    iopts.case_info = CaseInfo{"integration", "", "share id supplied directly", ""};
    iopts.share = share;
    iopts.self = peer_id_from(rng);
    Investigation inv(iopts);

    TrackerProvider via_tracker(tracker.endpoint(), Endpoint6{{192, 168, 50, 1}, 40001}, {},
                                &inv.tap());

    const Snapshot& first = inv.run_sweep({&via_tracker});
    REQUIRE(first.peers.size() == 2);
    CHECK(first.warnings.empty());

    // second epoch: pb falls silent, pc arrives, pa re-announces
    pb.stop();
    tracker_clock.advance(120'000);
    PeerEmulator pc(swarm_peer(3));
    pc.start();
    pa.announce_now();
    pc.announce_now();
    wait_until([&] { return tracker.entries(share).size() == 2; }, "second epoch never registered");

    const Snapshot& second = inv.run_sweep({&via_tracker});
    REQUIRE(second.peers.size() == 2);

    SnapshotDiff d = inv.report_diff(0, 1);
    CHECK(d.joined == std::vector<PeerId>{pc.self()});
    CHECK(d.departed == std::vector<PeerId>{pb.self()});
    CHECK(d.persisted == std::vector<PeerId>{pa.self()});
    CHECK(d.churn == doctest::Approx(0.5));

    OfflineGeoTable table = OfflineGeoTable::from_csv_text(
        "ip,country,city,isp\n"
        "127.73.0.1,DE,Berlin,Telefonica\n"
        "127.73.0.2,AU,Sydney,Telstra\n");
    auto annotations = inv.report_geo(0, table);
    REQUIRE(annotations.size() == 2);
    CHECK(annotations[0].country == "DE");
    CHECK(annotations[1].country == "AU");

    Bytes content = Rng(77).bytes(40);
    FileManifest manifest = manifest_of_content(content, "files/a.bin", 16);
    FetchResult fetched;
    fetched.content = content;
    for (std::size_t i = 0; i < manifest.chunk_count(); ++i) {
        fetched.provenance.push_back(ChunkProvenance{i, pa.self(), pa.endpoint()});
    }
    inv.report_fetch(manifest, fetched);

    inv.seal();
    pa.stop();
    pc.stop();
    tracker.stop();

    LoadedBag loaded = open_bag(dir);
    REQUIRE(loaded.snapshots.size() == 2);
    CHECK(loaded.snapshots[0] == inv.snapshots()[0]);
    CHECK(loaded.snapshots[1] == inv.snapshots()[1]);
    REQUIRE(loaded.manifest.at("reports").size() == 3);
    CHECK(loaded.manifest.at("reports")[0].at("name") == "diff-0-1");
    CHECK(loaded.manifest.at("reports")[1].at("name") == "fetch-0");
    CHECK(loaded.manifest.at("reports")[2].at("name") == "geo-0");

    std::vector<Snapshot> rebuilt = bag_replay(loaded);
    REQUIRE(rebuilt.size() == 2);
    CHECK(rebuilt[0] == inv.snapshots()[0]);
    CHECK(rebuilt[1] == inv.snapshots()[1]);

    fs::remove_all(dir);
}
