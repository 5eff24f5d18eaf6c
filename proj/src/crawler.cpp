#include "btsleuth/crawler.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <thread>

#include "btsleuth/sha1.hpp"

namespace btsleuth {

namespace {

bool looks_like_hex_digest(const std::string& s) {
    return s.size() == 40 && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isxdigit(c) != 0;
    });
}

}  // namespace

ShareId identify_lookup_hash(const std::string& input) {
    if (looks_like_hex_digest(input)) {
        Bytes raw = *from_hex(input);
        ShareId id;
        std::copy(raw.begin(), raw.end(), id.digest.begin());
        return id;
    }
    try {
        return share_id_of(parse_secret(input));
    } catch (const Error& e) {
        throw Error(Errc::unrecognized_input,
                    "input is neither a 40-digit hex digest nor a secret: " +
                        std::string(e.what()));
    }
}

ShareId identify_lookup_hash(std::span<const std::uint8_t> sync_id_file) {
    if (sync_id_file.size() != 20) {
        throw Error(Errc::unrecognized_input, "sync id file holds " +
                                                  std::to_string(sync_id_file.size()) +
                                                  " octets, wants exactly 20");
    }
    ShareId id;
    std::copy(sync_id_file.begin(), sync_id_file.end(), id.digest.begin());
    return id;
}

Snapshot sweep(const ShareId& share, const std::vector<DiscoveryProvider*>& providers,
               const PeerId& self_peer, WireTap* tap, Clock& clock) {
    if (providers.empty()) {
        throw Error(Errc::invariant_violation, "a sweep needs at least one provider");
    }

    Snapshot out;
    out.share = share;
    out.seq_lo = tap ? tap->next_seq() : 0;

    std::vector<std::vector<PeerRecord>> found(providers.size());
    std::vector<std::string> failures(providers.size());
    std::vector<std::thread> workers;
    workers.reserve(providers.size());
    for (std::size_t i = 0; i < providers.size(); ++i) {
        workers.emplace_back([&, i] {
            try {
                found[i] = providers[i]->discover(share, self_peer);
            } catch (const Error& e) {
                failures[i] = std::string(providers[i]->name()) + ": " + e.what();
            }
        });
    }
    for (auto& w : workers) w.join();

    std::vector<PeerRecord> all;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < providers.size(); ++i) {
        if (!failures[i].empty()) {
            ++failed;
            out.warnings.push_back(failures[i]);
            continue;
        }
        all.insert(all.end(), found[i].begin(), found[i].end());
    }
    if (failed == providers.size()) {
        std::string detail;
        for (const auto& w : out.warnings) {
            if (!detail.empty()) detail += "; ";
            detail += w;
        }
        throw Error(Errc::all_providers_failed, detail);
    }

    all = merge_records(std::move(all));
    std::erase_if(all, [&](const PeerRecord& r) { return r.peer == self_peer; });
    out.peers = std::move(all);
    out.taken_at = clock.now();
    out.seq_hi = tap ? tap->next_seq() : 0;
    return out;
}

namespace {

std::vector<NatGroup> nat_groups_of(const Snapshot& s) {
    std::map<std::array<std::uint8_t, 4>, std::vector<PeerRecord>> behind;
    for (const PeerRecord& r : s.peers) behind[r.external.ip].push_back(r);

    std::vector<NatGroup> out;
    for (auto& [ip, members] : behind) {
        if (members.size() < 2) continue;
        std::set<std::uint16_t> ports;
        std::set<Endpoint6> locals;
        for (const PeerRecord& r : members) {
            ports.insert(r.external.port);
            locals.insert(r.local);
        }
        if (ports.size() != members.size() || locals.size() != members.size()) continue;
        out.push_back(NatGroup{ip, std::move(members)});
    }
    return out;
}

}  // namespace

SnapshotDiff diff(const Snapshot& s1, const Snapshot& s2) {
    if (s1.share != s2.share) {
        throw Error(Errc::share_mismatch, "snapshots cover different shares");
    }
    if (s2.taken_at < s1.taken_at) {
        throw Error(Errc::invariant_violation, "snapshots compared in reverse time order");
    }

    std::set<PeerId> ids1, ids2;
    for (const PeerRecord& r : s1.peers) ids1.insert(r.peer);
    for (const PeerRecord& r : s2.peers) ids2.insert(r.peer);

    SnapshotDiff d;
    for (const PeerId& p : ids2) {
        (ids1.contains(p) ? d.persisted : d.joined).push_back(p);
    }
    for (const PeerId& p : ids1) {
        if (!ids2.contains(p)) d.departed.push_back(p);
    }

    // NAT structure per snapshot, merged by external address
    std::map<std::array<std::uint8_t, 4>, NatGroup> merged;
    for (const Snapshot* s : {&s1, &s2}) {
        for (NatGroup& g : nat_groups_of(*s)) {
            auto [it, fresh] = merged.try_emplace(g.external_ip, g);
            if (fresh) continue;
            for (PeerRecord& r : g.members) {
                auto& have = it->second.members;
                if (std::find(have.begin(), have.end(), r) == have.end()) {
                    have.push_back(std::move(r));
                }
            }
        }
    }
    for (auto& [ip, g] : merged) d.nat_groups.push_back(std::move(g));

    for (const PeerId& p : d.persisted) {
        for (const PeerRecord& r1 : s1.peers) {
            if (!(r1.peer == p)) continue;
            for (const PeerRecord& r2 : s2.peers) {
                if (!(r2.peer == p) || !(r1.local == r2.local)) continue;
                if (r1.external.ip == r2.external.ip) continue;
                Reallocation move{p, r1.local, r1.external, r2.external};
                if (std::find(d.reallocations.begin(), d.reallocations.end(), move) ==
                    d.reallocations.end()) {
                    d.reallocations.push_back(std::move(move));
                }
            }
        }
    }

    std::size_t total = s1.peers.size() + s2.peers.size();
    d.churn = total == 0 ? 0.0
                         : static_cast<double>(d.joined.size() + d.departed.size()) /
                               static_cast<double>(total);
    return d;
}

double churn(const Snapshot& s1, const Snapshot& s2) { return diff(s1, s2).churn; }

Json snapshot_json(const Snapshot& s) {
    Json peers = Json::array();
    for (const PeerRecord& r : s.peers) peers.push_back(peer_record_json(r));
    return Json{{"share", digest_hex(s.share.digest)},
                {"taken_at_ms", s.taken_at},
                {"taken_at", iso8601_ms(s.taken_at)},
                {"peers", peers},
                {"warnings", s.warnings},
                {"seq_lo", s.seq_lo},
                {"seq_hi", s.seq_hi}};
}

Snapshot snapshot_from_json(const Json& j) {
    Snapshot s;
    auto share = from_hex(j.at("share").get<std::string>());
    if (!share || share->size() != 20) {
        throw Error(Errc::unrecognized_input, "share digest is not 20 octets of hex");
    }
    std::copy(share->begin(), share->end(), s.share.digest.begin());
    s.taken_at = j.at("taken_at_ms").get<Instant>();
    for (const Json& p : j.at("peers")) s.peers.push_back(peer_record_from_json(p));
    s.warnings = j.at("warnings").get<std::vector<std::string>>();
    s.seq_lo = j.at("seq_lo").get<std::uint64_t>();
    s.seq_hi = j.at("seq_hi").get<std::uint64_t>();
    return s;
}

namespace {

Json ids_json(const std::vector<PeerId>& ids) {
    Json out = Json::array();
    for (const PeerId& p : ids) out.push_back(p.hex());
    return out;
}

}  // namespace

Json diff_json(const SnapshotDiff& d) {
    Json nat = Json::array();
    for (const NatGroup& g : d.nat_groups) {
        Json members = Json::array();
        for (const PeerRecord& r : g.members) members.push_back(peer_record_json(r));
        std::string ip;
        for (int i = 0; i < 4; ++i) {
            if (i) ip += '.';
            ip += std::to_string(g.external_ip[i]);
        }
        nat.push_back(Json{{"external_ip", ip}, {"members", members}});
    }
    Json moves = Json::array();
    for (const Reallocation& r : d.reallocations) {
        moves.push_back(Json{{"peer", r.peer.hex()},
                             {"local", r.local.str()},
                             {"old_external", r.old_external.str()},
                             {"new_external", r.new_external.str()}});
    }
    return Json{{"joined", ids_json(d.joined)},
                {"departed", ids_json(d.departed)},
                {"persisted", ids_json(d.persisted)},
                {"nat_groups", nat},
                {"reallocations", moves},
                {"churn", d.churn}};
}

Json annotations_json(const std::vector<GeoAnnotation>& annotations) {
    Json out = Json::array();
    for (const GeoAnnotation& a : annotations) {
        std::string ip;
        for (int i = 0; i < 4; ++i) {
            if (i) ip += '.';
            ip += std::to_string(a.ip[i]);
        }
        out.push_back(Json{{"ip", ip},
                           {"peers", ids_json(a.peers)},
                           {"country", a.country},
                           {"city", a.city},
                           {"isp", a.isp},
                           {"provider", a.provider},
                           {"note", a.note}});
    }
    return out;
}

}  // namespace btsleuth
