#include "btsleuth/evidence.hpp"

#include <algorithm>
#include <sstream>

namespace btsleuth {

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

void put_u64(Bytes& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

void put_endpoint(Bytes& out, const Endpoint6& e) {
    out.insert(out.end(), e.ip.begin(), e.ip.end());
    out.push_back(static_cast<std::uint8_t>(e.port >> 8));
    out.push_back(static_cast<std::uint8_t>(e.port & 0xff));
}

std::uint64_t take_u64(std::span<const std::uint8_t> b) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

Endpoint6 take_endpoint(std::span<const std::uint8_t> b) {
    Endpoint6 e;
    std::copy_n(b.begin(), 4, e.ip.begin());
    e.port = static_cast<std::uint16_t>((b[4] << 8) | b[5]);
    return e;
}

constexpr std::size_t kRecordFixed = 8 + 8 + 1 + 1 + 6 + 6;
constexpr std::uint32_t kMaxRecordLength = 64 * 1024 * 1024;

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(Errc::io_error, "cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Json segment_json(const SweepSegment& s) {
    Json providers = Json::array();
    for (const SweepProvider& p : s.providers) {
        providers.push_back(Json{{"kind", discovery_kind_name(p.kind)},
                                 {"local", p.local.str()},
                                 {"origin", p.origin}});
    }
    return Json{{"self", s.self.hex()}, {"providers", providers}};
}

SweepSegment segment_from_json(const Json& j) {
    SweepSegment s;
    auto raw = from_hex(j.at("self").get<std::string>());
    if (!raw || raw->size() != 20) {
        throw Error(Errc::integrity_failure, "sweep self is not 20 octets of hex");
    }
    std::copy(raw->begin(), raw->end(), s.self.id.begin());
    for (const Json& p : j.at("providers")) {
        SweepProvider sp;
        std::string kind = p.at("kind").get<std::string>();
        if (kind == "tracker") {
            sp.kind = DiscoverySource::Kind::tracker;
        } else if (kind == "lan") {
            sp.kind = DiscoverySource::Kind::lan;
        } else if (kind == "known_peer") {
            sp.kind = DiscoverySource::Kind::known_peer;
        } else {
            throw Error(Errc::integrity_failure, "unknown provider kind " + kind);
        }
        sp.local = parse_endpoint(p.at("local").get<std::string>());
        sp.origin = p.at("origin").get<std::string>();
        s.providers.push_back(std::move(sp));
    }
    return s;
}

}  // namespace

Bytes encode_stream_record(const StreamRecord& r) {
    Bytes out;
    out.reserve(4 + kRecordFixed + r.payload.size());
    put_u32(out, static_cast<std::uint32_t>(kRecordFixed + r.payload.size()));
    put_u64(out, r.seq);
    put_u64(out, static_cast<std::uint64_t>(r.captured_at));
    out.push_back(static_cast<std::uint8_t>(r.direction));
    out.push_back(static_cast<std::uint8_t>(r.transport));
    put_endpoint(out, r.src);
    put_endpoint(out, r.dst);
    out.insert(out.end(), r.payload.begin(), r.payload.end());
    return out;
}

std::vector<StreamRecord> decode_stream(std::span<const std::uint8_t> raw) {
    std::vector<StreamRecord> out;
    std::size_t at = 0;
    while (at < raw.size()) {
        if (raw.size() - at < 4) {
            throw Error(Errc::integrity_failure, "stream truncated inside a length field");
        }
        std::uint32_t len = 0;
        for (int i = 0; i < 4; ++i) len = (len << 8) | raw[at + static_cast<std::size_t>(i)];
        at += 4;
        if (len < kRecordFixed || len > kMaxRecordLength || raw.size() - at < len) {
            throw Error(Errc::integrity_failure,
                        "stream record at offset " + std::to_string(at - 4) + " has bad length");
        }
        auto body = raw.subspan(at, len);
        StreamRecord r;
        r.seq = take_u64(body.subspan(0, 8));
        r.captured_at = static_cast<Instant>(take_u64(body.subspan(8, 8)));
        if (body[16] > 1 || body[17] > 1) {
            throw Error(Errc::integrity_failure, "stream record with unknown direction/transport");
        }
        r.direction = static_cast<Direction>(body[16]);
        r.transport = static_cast<Transport>(body[17]);
        r.src = take_endpoint(body.subspan(18, 6));
        r.dst = take_endpoint(body.subspan(24, 6));
        r.payload.assign(body.begin() + static_cast<std::ptrdiff_t>(kRecordFixed), body.end());
        out.push_back(std::move(r));
        at += len;
    }
    return out;
}

EvidenceBag EvidenceBag::create(const std::filesystem::path& dir, CaseInfo info) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
    if (std::filesystem::exists(dir / "manifest.json") ||
        std::filesystem::exists(dir / "stream.bin")) {
        throw Error(Errc::io_error, dir.string() + " already holds a bag");
    }
    std::filesystem::create_directories(dir / "reports", ec);
    if (ec) throw Error(Errc::io_error, "cannot create reports dir: " + ec.message());

    EvidenceBag bag;
    bag.dir_ = dir;
    bag.info_ = std::move(info);
    if (bag.info_.tool_version.empty()) bag.info_.tool_version = std::string(kToolVersion);
    bag.stream_.open(dir / "stream.bin", std::ios::binary);
    if (!bag.stream_) throw Error(Errc::io_error, "cannot open stream.bin for writing");
    return bag;
}

void EvidenceBag::append_stream(const StreamRecord& r) {
    std::lock_guard lock(*mu_);
    if (sealed_) throw Error(Errc::bag_sealed, "cannot append to a sealed bag");
    if (last_seq_ && r.seq <= *last_seq_) {
        throw Error(Errc::invariant_violation,
                    "stream seq " + std::to_string(r.seq) + " does not ascend");
    }
    Bytes wire = encode_stream_record(r);
    stream_.write(reinterpret_cast<const char*>(wire.data()),
                  static_cast<std::streamsize>(wire.size()));
    if (!stream_) throw Error(Errc::io_error, "stream.bin write failed");
    stream_hash_.update(wire);
    last_seq_ = r.seq;
    ++records_;
}

void EvidenceBag::append_snapshot(const Snapshot& s, SweepSegment segment) {
    std::lock_guard lock(*mu_);
    if (sealed_) throw Error(Errc::bag_sealed, "cannot append to a sealed bag");
    snapshots_.push_back(snapshot_json(s));
    segments_.push_back(segment_json(segment));
}

void EvidenceBag::append_report(const std::string& name, const Json& body) {
    std::lock_guard lock(*mu_);
    if (sealed_) throw Error(Errc::bag_sealed, "cannot append to a sealed bag");
    if (name.empty() || name.find('/') != std::string::npos ||
        name.find('.') != std::string::npos) {
        throw Error(Errc::invariant_violation, "report name must be a bare file stem");
    }
    if (std::find(report_names_.begin(), report_names_.end(), name) != report_names_.end()) {
        throw Error(Errc::invariant_violation, "report " + name + " already written");
    }
    std::ofstream out(dir_ / "reports" / (name + ".json"), std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot write report " + name);
    out << canonical_json(body);
    out.close();
    if (!out) throw Error(Errc::io_error, "report write failed: " + name);
    report_names_.push_back(name);
}

// The manifest embeds a content hash for the stream and for every report, so
// the single digest over the manifest body covers every byte in the bag.
void EvidenceBag::seal() {
    std::lock_guard lock(*mu_);
    if (sealed_) throw Error(Errc::bag_sealed, "bag is already sealed");
    stream_.flush();
    stream_.close();
    if (stream_.fail()) throw Error(Errc::io_error, "stream.bin close failed");

    std::sort(report_names_.begin(), report_names_.end());
    Json reports = Json::array();
    for (const std::string& name : report_names_) {
        std::string content = read_file(dir_ / "reports" / (name + ".json"));
        reports.push_back(Json{{"name", name}, {"sha1", digest_hex(sha1(content))}});
    }

    Json body{
        {"case",
         Json{{"investigator", info_.investigator},
              {"share", info_.share_hex},
              {"secret_note", info_.secret_note},
              {"tool_version", info_.tool_version},
              {"config_digest", digest_hex(sha1(canonical_json(segments_)))}}},
        {"format",
         Json{{"name", "btsleuth-bag"},
              {"version", 1},
              {"note", "original layout, not derived from an external evidence-bag format"}}},
        {"reports", reports},
        {"snapshots", snapshots_},
        {"sweeps", segments_},
        {"stream", Json{{"records", records_}, {"sha1", digest_hex(stream_hash_.finish())}}},
    };
    std::string digest = digest_hex(sha1(canonical_json(body)));
    body["integrity"] = Json{{"algorithm", "sha1"}, {"digest", digest}};

    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot write manifest.json");
    out << canonical_json(body);
    out.close();
    if (!out) throw Error(Errc::io_error, "manifest write failed");
    sealed_ = true;
}

LoadedBag open_bag(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "manifest.json")) {
        throw Error(Errc::unrecognized_input, dir.string() + " is not an evidence bag");
    }

    LoadedBag bag;
    bag.dir = dir;
    try {
        bag.manifest = Json::parse(read_file(dir / "manifest.json"));
    } catch (const Json::parse_error& e) {
        throw Error(Errc::integrity_failure, std::string("manifest does not parse: ") + e.what());
    }

    try {
        if (bag.manifest.at("format").at("name") != "btsleuth-bag" ||
            bag.manifest.at("format").at("version") != 1) {
            throw Error(Errc::integrity_failure, "unknown bag format");
        }

        Json body = bag.manifest;
        body.erase("integrity");
        std::string stored = bag.manifest.at("integrity").at("digest").get<std::string>();
        if (digest_hex(sha1(canonical_json(body))) != stored) {
            throw Error(Errc::integrity_failure, "manifest digest mismatch");
        }

        std::string stream_raw = read_file(dir / "stream.bin");
        if (digest_hex(sha1(stream_raw)) !=
            bag.manifest.at("stream").at("sha1").get<std::string>()) {
            throw Error(Errc::integrity_failure, "stream.bin digest mismatch");
        }
        for (const Json& r : bag.manifest.at("reports")) {
            std::string name = r.at("name").get<std::string>();
            std::string content = read_file(dir / "reports" / (name + ".json"));
            if (digest_hex(sha1(content)) != r.at("sha1").get<std::string>()) {
                throw Error(Errc::integrity_failure, "report " + name + " digest mismatch");
            }
        }

        bag.stream = decode_stream(bytes_of(stream_raw));
        if (bag.stream.size() != bag.manifest.at("stream").at("records").get<std::uint64_t>()) {
            throw Error(Errc::integrity_failure, "stream record count mismatch");
        }
        for (std::size_t i = 1; i < bag.stream.size(); ++i) {
            if (bag.stream[i].seq <= bag.stream[i - 1].seq) {
                throw Error(Errc::integrity_failure, "stream seq numbers do not ascend");
            }
        }

        for (const Json& s : bag.manifest.at("snapshots")) {
            bag.snapshots.push_back(snapshot_from_json(s));
        }
        for (const Json& s : bag.manifest.at("sweeps")) {
            bag.segments.push_back(segment_from_json(s));
        }
        if (bag.snapshots.size() != bag.segments.size()) {
            throw Error(Errc::integrity_failure, "snapshot and sweep counts differ");
        }
    } catch (const Json::exception& e) {
        throw Error(Errc::integrity_failure, std::string("manifest structure: ") + e.what());
    }
    return bag;
}

std::vector<Snapshot> bag_replay(const LoadedBag& bag) {
    std::vector<Snapshot> rebuilt;
    for (std::size_t i = 0; i < bag.snapshots.size(); ++i) {
        const Snapshot& stored = bag.snapshots[i];
        const SweepSegment& seg = bag.segments[i];

        std::vector<PeerRecord> derived;
        for (const StreamRecord& r : bag.stream) {
            if (r.seq < stored.seq_lo || r.seq >= stored.seq_hi) continue;
            if (r.direction != Direction::received || r.transport != Transport::udp) continue;
            const SweepProvider* provider = nullptr;
            for (const SweepProvider& p : seg.providers) {
                if (p.local == r.dst) {
                    provider = &p;
                    break;
                }
            }
            if (!provider) continue;

            Message m;
            try {
                m = parse(decode_frame(r.payload));
            } catch (const Error&) {
                continue;
            }
            if (provider->kind == DiscoverySource::Kind::tracker) {
                const auto* resp = std::get_if<PeersResponse>(&m);
                if (!resp || !(resp->share == stored.share)) continue;
                auto records = records_from_response(*resp, r.src, r.captured_at, r.seq);
                derived.insert(derived.end(), records.begin(), records.end());
            } else {
                const auto* reply = std::get_if<PingReply>(&m);
                if (!reply || !(reply->share == stored.share)) continue;
                derived.push_back(
                    record_from_ping_reply(*reply, r.src, provider->kind, r.captured_at, r.seq));
            }
        }

        derived = merge_records(std::move(derived));
        std::erase_if(derived, [&](const PeerRecord& r) { return r.peer == seg.self; });

        Snapshot out;
        out.share = stored.share;
        out.taken_at = stored.taken_at;
        out.peers = std::move(derived);
        out.warnings = stored.warnings;
        out.seq_lo = stored.seq_lo;
        out.seq_hi = stored.seq_hi;

        if (canonical_json(snapshot_json(out)) != canonical_json(snapshot_json(stored))) {
            std::uint64_t divergent = stored.seq_lo;
            bool found = false;
            for (const PeerRecord& r : out.peers) {
                if (std::find(stored.peers.begin(), stored.peers.end(), r) == stored.peers.end() &&
                    (!found || r.seq < divergent)) {
                    divergent = r.seq;
                    found = true;
                }
            }
            for (const PeerRecord& r : stored.peers) {
                if (std::find(out.peers.begin(), out.peers.end(), r) == out.peers.end() &&
                    (!found || r.seq < divergent)) {
                    divergent = r.seq;
                    found = true;
                }
            }
            throw Error(Errc::decode_divergence, "snapshot " + std::to_string(i) +
                                                     " diverges from the stream at seq " +
                                                     std::to_string(divergent));
        }
        rebuilt.push_back(std::move(out));
    }
    return rebuilt;
}

std::vector<Snapshot> bag_replay(const std::filesystem::path& dir) {
    return bag_replay(open_bag(dir));
}

namespace {

CaseInfo with_share(CaseInfo info, const ShareId& share) {
    if (info.share_hex.empty()) info.share_hex = digest_hex(share.digest);
    return info;
}

}  // namespace

Investigation::Investigation(Options options)
    : options_(std::move(options)),
      tap_(*options_.clock),
      bag_(EvidenceBag::create(options_.bag_dir, with_share(options_.case_info, options_.share))) {}

const Snapshot& Investigation::run_sweep(const std::vector<DiscoveryProvider*>& providers) {
    Snapshot s = sweep(options_.share, providers, options_.self, &tap_, *options_.clock);
    for (const StreamRecord& r : tap_.drain()) bag_.append_stream(r);

    SweepSegment segment;
    segment.self = options_.self;
    for (DiscoveryProvider* p : providers) {
        segment.providers.push_back(SweepProvider{p->kind(), p->local_endpoint(), p->origin()});
    }
    bag_.append_snapshot(s, segment);
    snapshots_.push_back(std::move(s));
    return snapshots_.back();
}

SnapshotDiff Investigation::report_diff(std::size_t a, std::size_t b) {
    if (a >= snapshots_.size() || b >= snapshots_.size()) {
        throw Error(Errc::invariant_violation, "diff of snapshots that were never taken");
    }
    SnapshotDiff d = diff(snapshots_[a], snapshots_[b]);
    Json body = diff_json(d);
    body["s1"] = a;
    body["s2"] = b;
    bag_.append_report("diff-" + std::to_string(a) + "-" + std::to_string(b), body);
    return d;
}

std::vector<GeoAnnotation> Investigation::report_geo(std::size_t index, GeoProvider& provider) {
    if (index >= snapshots_.size()) {
        throw Error(Errc::invariant_violation, "geo report of a snapshot that was never taken");
    }
    auto annotations = geolocate(snapshots_[index].peers, provider);
    Json body{{"snapshot", index}, {"annotations", annotations_json(annotations)}};
    bag_.append_report("geo-" + std::to_string(index), body);
    return annotations;
}

void Investigation::report_fetch(const FileManifest& manifest, const FetchResult& result) {
    Json chunks = Json::array();
    for (const Digest20& d : manifest.chunk_hashes) chunks.push_back(digest_hex(d));
    Json provenance = Json::array();
    for (const ChunkProvenance& p : result.provenance) {
        provenance.push_back(Json{
            {"index", p.index}, {"peer", p.peer.hex()}, {"endpoint", p.endpoint.str()}});
    }
    Json body{{"path", manifest.path},
              {"size", manifest.size},
              {"chunk_size", manifest.chunk_size},
              {"file_sha1", digest_hex(manifest.file_hash)},
              {"content_sha1", digest_hex(sha1(result.content))},
              {"chunks", chunks},
              {"provenance", provenance},
              {"incidents", result.incidents}};
    bag_.append_report("fetch-" + std::to_string(fetch_reports_++), body);
}

void Investigation::seal() { bag_.seal(); }

}  // namespace btsleuth
