#include "btsleuth/transfer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "btsleuth/frame.hpp"
#include "btsleuth/udp.hpp"

namespace btsleuth {

std::uint64_t FileManifest::chunk_length(std::size_t index) const {
    std::uint64_t start = static_cast<std::uint64_t>(index) * chunk_size;
    return std::min<std::uint64_t>(chunk_size, size - start);
}

FileManifest manifest_of_content(std::span<const std::uint8_t> content, const std::string& name,
                                 std::uint64_t chunk_size) {
    if (chunk_size == 0) {
        throw Error(Errc::invariant_violation, "chunk size must be positive");
    }
    FileManifest m;
    m.path = name;
    m.size = content.size();
    m.chunk_size = chunk_size;
    for (std::size_t off = 0; off < content.size(); off += chunk_size) {
        std::size_t len = std::min<std::size_t>(chunk_size, content.size() - off);
        m.chunk_hashes.push_back(sha1(content.subspan(off, len)));
    }
    m.file_hash = sha1(content);
    return m;
}

FileManifest manifest_of(const std::filesystem::path& file, const std::string& name,
                         std::uint64_t chunk_size) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw Error(Errc::io_error, "cannot read " + file.string());
    }
    Bytes content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(Errc::io_error, "read failed on " + file.string());
    }
    return manifest_of_content(content, name, chunk_size);
}

namespace {

std::vector<std::vector<std::size_t>> holders_per_chunk(const FileManifest& manifest,
                                                        const std::vector<ChunkSource>& sources) {
    std::size_t n = manifest.chunk_count();
    for (const ChunkSource& s : sources) {
        if (s.availability.have.size() != n) {
            throw Error(Errc::invariant_violation,
                        "availability of " + s.availability.peer.hex() + " covers " +
                            std::to_string(s.availability.have.size()) + " chunks, manifest has " +
                            std::to_string(n));
        }
    }
    std::vector<std::vector<std::size_t>> holders(n);
    for (std::size_t si = 0; si < sources.size(); ++si) {
        for (std::size_t i = 0; i < n; ++i) {
            if (sources[si].availability.have[i]) holders[i].push_back(si);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (holders[i].empty()) {
            throw Error(Errc::incomplete_coverage, "no source holds chunk " + std::to_string(i));
        }
    }
    return holders;
}

}  // namespace

std::vector<std::size_t> plan_assignments(const FileManifest& manifest,
                                          const std::vector<ChunkSource>& sources) {
    auto holders = holders_per_chunk(manifest, sources);
    std::size_t n = manifest.chunk_count();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return holders[a].size() < holders[b].size();
    });

    std::vector<std::size_t> load(sources.size(), 0);
    std::vector<std::size_t> assigned(n);
    for (std::size_t i : order) {
        std::size_t best = holders[i][0];
        for (std::size_t cand : holders[i]) {
            auto key = [&](std::size_t s) {
                return std::make_pair(load[s], sources[s].availability.peer);
            };
            if (key(cand) < key(best)) best = cand;
        }
        assigned[i] = best;
        ++load[best];
    }
    return assigned;
}

namespace {

struct ChunkFailure {
    std::size_t index;
    std::size_t source;
    Error error;
};

std::string describe(const ChunkFailure& f, const std::vector<ChunkSource>& sources) {
    return "chunk " + std::to_string(f.index) + " from peer " +
           sources[f.source].availability.peer.hex() + ": " + f.error.what();
}

// Fetches one chunk from one source and verifies it, normalizing the two
// failure modes into ChunkFailure.
std::optional<ChunkFailure> fetch_one_chunk(const FileManifest& manifest,
                                            const std::vector<ChunkSource>& sources,
                                            const ChunkFetcher& fetch_one, std::size_t index,
                                            std::size_t source, Bytes& out) {
    Bytes data;
    try {
        data = fetch_one(sources[source], index);
    } catch (const Error& e) {
        return ChunkFailure{index, source, e};
    }
    if (data.size() != manifest.chunk_length(index) || sha1(data) != manifest.chunk_hashes[index]) {
        return ChunkFailure{index, source,
                            Error(Errc::chunk_hash_mismatch, "fails verification")};
    }
    out = std::move(data);
    return std::nullopt;
}

}  // namespace

FetchResult fetch(const FileManifest& manifest, const std::vector<ChunkSource>& sources,
                  const ChunkFetcher& fetch_one) {
    auto holders = holders_per_chunk(manifest, sources);
    auto assigned = plan_assignments(manifest, sources);
    std::size_t n = manifest.chunk_count();

    FetchResult result;
    result.content.resize(manifest.size);
    result.provenance.resize(n);

    // First pass: each source serves its assigned chunks on its own thread.
    std::map<std::size_t, std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < n; ++i) batches[assigned[i]].push_back(i);

    std::mutex mu;
    std::vector<ChunkFailure> failures;
    std::vector<bool> dead(sources.size(), false);
    std::vector<bool> done(n, false);

    auto attempt = [&](std::size_t index, std::size_t source) -> bool {
        Bytes data;
        auto failure = fetch_one_chunk(manifest, sources, fetch_one, index, source, data);
        std::lock_guard lock(mu);
        if (failure) {
            if (failure->error.code() == Errc::peer_unreachable) dead[source] = true;
            failures.push_back(std::move(*failure));
            return false;
        }
        std::copy(data.begin(), data.end(),
                  result.content.begin() +
                      static_cast<std::ptrdiff_t>(index * manifest.chunk_size));
        result.provenance[index] = ChunkProvenance{index, sources[source].availability.peer,
                                                   sources[source].endpoint};
        done[index] = true;
        return true;
    };

    std::vector<std::thread> workers;
    workers.reserve(batches.size());
    for (const auto& [source, indices] : batches) {
        workers.emplace_back([&, source = source, indices = indices] {
            for (std::size_t index : indices) {
                {
                    std::lock_guard lock(mu);
                    if (dead[source]) {
                        failures.push_back(
                            ChunkFailure{index, source,
                                         Error(Errc::peer_unreachable,
                                               "source already found unreachable")});
                        continue;
                    }
                }
                attempt(index, source);
            }
        });
    }
    for (std::thread& t : workers) t.join();

    std::sort(failures.begin(), failures.end(),
              [](const ChunkFailure& a, const ChunkFailure& b) { return a.index < b.index; });

    // Second pass: failed chunks walk their remaining holders in PeerId
    // order until one serves a clean copy.
    std::map<std::size_t, std::vector<std::size_t>> failed_sources;
    for (const ChunkFailure& f : failures) {
        result.incidents.push_back(describe(f, sources));
        failed_sources[f.index].push_back(f.source);
    }
    for (std::size_t index = 0; index < n; ++index) {
        if (done[index]) continue;
        std::vector<std::size_t> candidates;
        for (std::size_t s : holders[index]) {
            const auto& tried = failed_sources[index];
            if (dead[s]) continue;
            if (std::find(tried.begin(), tried.end(), s) != tried.end()) continue;
            candidates.push_back(s);
        }
        std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
            return sources[a].availability.peer < sources[b].availability.peer;
        });

        bool recovered = false;
        for (std::size_t s : candidates) {
            if (dead[s]) continue;
            if (attempt(index, s)) {
                recovered = true;
                break;
            }
            result.incidents.push_back(describe(failures.back(), sources));
        }
        if (!recovered) {
            const ChunkFailure* last = nullptr;
            for (const ChunkFailure& f : failures) {
                if (f.index == index) last = &f;
            }
            if (!last) {
                throw Error(Errc::peer_unreachable,
                            "chunk " + std::to_string(index) + " has no live holder");
            }
            throw Error(last->error.code(), describe(*last, sources));
        }
    }

    if (sha1(result.content) != manifest.file_hash) {
        throw Error(Errc::invariant_violation, "reassembled content fails the manifest file hash");
    }
    return result;
}

ChunkFetcher udp_chunk_fetcher(const FileManifest& manifest, UdpFetchOptions options) {
    return [manifest, options](const ChunkSource& src, std::size_t index) -> Bytes {
        UdpSocket sock;
        Bytes request = encode_frame(
            build(GetChunk{options.share, manifest.path, static_cast<std::int64_t>(index)}));

        for (int att = 0; att <= options.retries; ++att) {
            sock.send_to(request, src.endpoint);
            if (options.tap) {
                options.tap->append(Direction::sent, Transport::udp, sock.local_endpoint(),
                                    src.endpoint, request);
            }
            auto deadline = std::chrono::steady_clock::now() +
                            std::chrono::milliseconds(options.timeout_ms);
            for (;;) {
                auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                                deadline - std::chrono::steady_clock::now())
                                .count();
                if (left <= 0) break;
                auto got = sock.recv_from(static_cast<int>(left));
                if (!got) break;
                if (got->second != src.endpoint) continue;
                if (options.tap) {
                    options.tap->append(Direction::received, Transport::udp, got->second,
                                        sock.local_endpoint(), got->first);
                }
                Message reply = parse(decode_frame(got->first));
                if (const auto* notice = std::get_if<ErrorNotice>(&reply)) {
                    throw Error(Errc::protocol_error, "peer refused chunk " +
                                                          std::to_string(index) + ": " +
                                                          notice->code);
                }
                const auto* chunk = std::get_if<Chunk>(&reply);
                if (!chunk || chunk->index != static_cast<std::int64_t>(index)) {
                    throw Error(Errc::protocol_error,
                                "unexpected reply to chunk request " + std::to_string(index));
                }
                return chunk->data;
            }
        }
        throw Error(Errc::peer_unreachable,
                    src.endpoint.str() + " never answered chunk " + std::to_string(index));
    };
}

}  // namespace btsleuth
