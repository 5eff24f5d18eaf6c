#pragma once

#include <span>
#include <string>
#include <vector>

#include "btsleuth/discovery.hpp"
#include "btsleuth/geo.hpp"
#include "btsleuth/jsonio.hpp"

namespace btsleuth {

// Turns investigator input into the 20-octet lookup hash: a 40-digit hex
// string is read as the digest itself, anything else must parse as a secret.
// The byte overload takes the verbatim content of a sync-id file, which is
// exactly the 20-octet value.
ShareId identify_lookup_hash(const std::string& input);
ShareId identify_lookup_hash(std::span<const std::uint8_t> sync_id_file);

// All peers identified for one share at one point in time. `peers` is sorted
// by (peer, external, local) with one record per key; `warnings` records
// providers that failed without sinking the sweep; [seq_lo, seq_hi) is the
// capture-stream range the sweep produced.
struct Snapshot {
    ShareId share;
    Instant taken_at = 0;
    std::vector<PeerRecord> peers;
    std::vector<std::string> warnings;
    std::uint64_t seq_lo = 0;
    std::uint64_t seq_hi = 0;

    bool operator==(const Snapshot&) const = default;
};

// Queries every provider concurrently, unions the observations, and drops
// the investigator's own echo. A provider failure becomes a warning; only
// all of them failing raises AllProvidersFailed. `tap` is read for the seq
// range only; providers carry their own capture taps.
Snapshot sweep(const ShareId& share, const std::vector<DiscoveryProvider*>& providers,
               const PeerId& self_peer, WireTap* tap = nullptr,
               Clock& clock = SystemClock::instance());

// Records in one snapshot sharing an external address with pairwise distinct
// external ports and pairwise distinct local endpoints.
struct NatGroup {
    std::array<std::uint8_t, 4> external_ip{};
    std::vector<PeerRecord> members;

    bool operator==(const NatGroup&) const = default;
};

// One peer whose local endpoint held steady while its external address moved
// between snapshots.
struct Reallocation {
    PeerId peer;
    Endpoint6 local;
    Endpoint6 old_external;
    Endpoint6 new_external;

    bool operator==(const Reallocation&) const = default;
};

// Membership is tracked by PeerId alone, so joined, departed, and persisted
// partition the identities of both snapshots and a reallocated peer counts
// as persisted.
struct SnapshotDiff {
    std::vector<PeerId> joined;
    std::vector<PeerId> departed;
    std::vector<PeerId> persisted;
    std::vector<NatGroup> nat_groups;
    std::vector<Reallocation> reallocations;
    double churn = 0;

    bool operator==(const SnapshotDiff&) const = default;
};

// Requires equal shares (ShareMismatch) and s1 taken no later than s2.
// NAT groups are detected in each snapshot separately and merged by external
// address; churn = (|joined| + |departed|) / (|s1| + |s2|), 0 for two empty
// snapshots.
SnapshotDiff diff(const Snapshot& s1, const Snapshot& s2);
double churn(const Snapshot& s1, const Snapshot& s2);

Json snapshot_json(const Snapshot& s);
Snapshot snapshot_from_json(const Json& j);
Json diff_json(const SnapshotDiff& d);
Json annotations_json(const std::vector<GeoAnnotation>& annotations);

}  // namespace btsleuth
