#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "btsleuth/crawler.hpp"
#include "btsleuth/sha1.hpp"
#include "btsleuth/transfer.hpp"

namespace btsleuth {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct CaseInfo {
    std::string investigator;
    std::string share_hex;
    std::string secret_note;  // where the lookup hash came from
    std::string tool_version = std::string(kToolVersion);
};

// How one sweep was sourced, keyed for replay by the local endpoint each
// provider received its replies on.
struct SweepProvider {
    DiscoverySource::Kind kind = DiscoverySource::Kind::tracker;
    Endpoint6 local;
    std::string origin;

    bool operator==(const SweepProvider&) const = default;
};

struct SweepSegment {
    PeerId self;
    std::vector<SweepProvider> providers;

    bool operator==(const SweepSegment&) const = default;
};

// Append-only investigation container: a directory holding `manifest.json`,
// the verbatim capture stream `stream.bin`, and analysis reports under
// `reports/`. Sealing writes the manifest with a SHA-1 integrity digest over
// the manifest body, the stream, and every report; nothing may be appended
// afterwards. Appends are serialized internally, one writer per bag.
class EvidenceBag {
public:
    static EvidenceBag create(const std::filesystem::path& dir, CaseInfo info);

    EvidenceBag(EvidenceBag&&) = default;

    void append_stream(const StreamRecord& r);
    void append_snapshot(const Snapshot& s, SweepSegment segment);
    void append_report(const std::string& name, const Json& body);
    void seal();

    bool sealed() const { return sealed_; }
    const std::filesystem::path& dir() const { return dir_; }
    std::uint64_t stream_records() const { return records_; }

private:
    EvidenceBag() = default;

    std::filesystem::path dir_;
    CaseInfo info_;
    std::ofstream stream_;
    Sha1 stream_hash_;
    Json snapshots_ = Json::array();
    Json segments_ = Json::array();
    std::vector<std::string> report_names_;
    std::optional<std::uint64_t> last_seq_;
    std::uint64_t records_ = 0;
    bool sealed_ = false;
    std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
};

// A sealed bag read back and verified: the manifest parses, the digest
// matches, and the stream decodes with ascending seq numbers. Any damage
// raises IntegrityFailure.
struct LoadedBag {
    std::filesystem::path dir;
    Json manifest;
    std::vector<StreamRecord> stream;
    std::vector<Snapshot> snapshots;
    std::vector<SweepSegment> segments;
};

LoadedBag open_bag(const std::filesystem::path& dir);

// Re-derives every snapshot from the stored stream alone: frames are decoded
// again, observations rebuilt, and the sweep merge re-run. A reconstruction
// that differs from the stored snapshot raises DecodeDivergence naming the
// first divergent seq. Returns the reconstructed snapshots.
std::vector<Snapshot> bag_replay(const LoadedBag& bag);
std::vector<Snapshot> bag_replay(const std::filesystem::path& dir);

// stream.bin record form: 4-octet big-endian length of the rest, then
// seq(8) millis(8) direction(1) transport(1) src(6) dst(6) payload.
Bytes encode_stream_record(const StreamRecord& r);
std::vector<StreamRecord> decode_stream(std::span<const std::uint8_t> raw);

// The whole crawl workflow against one bag: sweeps capture through a shared
// tap and land in the stream, analyses land under reports/.
class Investigation {
public:
    struct Options {
        std::filesystem::path bag_dir;
        CaseInfo case_info;
        ShareId share;
        PeerId self;
        Clock* clock = &SystemClock::instance();
    };

    explicit Investigation(Options options);

    WireTap& tap() { return tap_; }
    const ShareId& share() const { return options_.share; }
    const PeerId& self() const { return options_.self; }
    const std::vector<Snapshot>& snapshots() const { return snapshots_; }
    EvidenceBag& bag() { return bag_; }

    const Snapshot& run_sweep(const std::vector<DiscoveryProvider*>& providers);
    SnapshotDiff report_diff(std::size_t a, std::size_t b);
    std::vector<GeoAnnotation> report_geo(std::size_t index, GeoProvider& provider);
    void report_fetch(const FileManifest& manifest, const FetchResult& result);
    void seal();

private:
    Options options_;
    WireTap tap_;
    EvidenceBag bag_;
    std::vector<Snapshot> snapshots_;
    int fetch_reports_ = 0;
};

}  // namespace btsleuth
