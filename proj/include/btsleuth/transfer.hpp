#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "btsleuth/bytes.hpp"
#include "btsleuth/errors.hpp"
#include "btsleuth/messages.hpp"
#include "btsleuth/sha1.hpp"
#include "btsleuth/wiretap.hpp"

namespace btsleuth {

inline constexpr std::uint64_t kDefaultChunkSize = 32 * 1024;

// Per-file digest table: one SHA-1 per chunk, one over the whole content.
// The final chunk may be short; an empty file has no chunks at all.
struct FileManifest {
    std::string path;  // share-relative name
    std::uint64_t size = 0;
    std::uint64_t chunk_size = kDefaultChunkSize;
    std::vector<Digest20> chunk_hashes;
    Digest20 file_hash{};

    std::size_t chunk_count() const { return chunk_hashes.size(); }
    std::uint64_t chunk_length(std::size_t index) const;

    bool operator==(const FileManifest&) const = default;
};

FileManifest manifest_of_content(std::span<const std::uint8_t> content, const std::string& name,
                                 std::uint64_t chunk_size = kDefaultChunkSize);

// Reads `file` from disk and records `name` as the manifest path. Throws
// IoError when the file cannot be read.
FileManifest manifest_of(const std::filesystem::path& file, const std::string& name,
                         std::uint64_t chunk_size = kDefaultChunkSize);

// The chunk indices one peer can serve; `have` has one flag per chunk.
struct Availability {
    PeerId peer;
    std::vector<bool> have;

    bool operator==(const Availability&) const = default;
};

struct ChunkSource {
    Endpoint6 endpoint;
    Availability availability;
};

// Chunk-to-source plan: result[i] is the index into `sources` that chunk i
// is fetched from first. Chunks are placed rarest first; each pick takes the
// least-loaded holder, ties going to the lowest PeerId. Throws
// IncompleteCoverage naming the first chunk no source holds.
std::vector<std::size_t> plan_assignments(const FileManifest& manifest,
                                          const std::vector<ChunkSource>& sources);

struct ChunkProvenance {
    std::size_t index = 0;
    PeerId peer;
    Endpoint6 endpoint;

    bool operator==(const ChunkProvenance&) const = default;
};

struct FetchResult {
    Bytes content;
    std::vector<ChunkProvenance> provenance;  // one entry per chunk, ascending
    std::vector<std::string> incidents;       // failures survived via failover
};

// Obtains one chunk's raw bytes from one source. Failures are signalled by
// throwing Error; PeerUnreachable additionally writes the source off for the
// rest of the fetch. May be called concurrently, one thread per source.
using ChunkFetcher = std::function<Bytes(const ChunkSource&, std::size_t index)>;

// Downloads every chunk, verifying each against its manifest digest before
// acceptance and the assembled content against the file hash. A bad chunk or
// a dead source moves the chunk to the next holder; the fetch fails only
// when some chunk runs out of holders.
FetchResult fetch(const FileManifest& manifest, const std::vector<ChunkSource>& sources,
                  const ChunkFetcher& fetch_one);

struct UdpFetchOptions {
    ShareId share;
    int timeout_ms = 1000;
    int retries = 1;
    WireTap* tap = nullptr;
};

// Fetcher that asks for chunks over UDP, one request datagram and one reply
// per chunk. Replies from other endpoints are ignored; silence across all
// attempts becomes PeerUnreachable.
ChunkFetcher udp_chunk_fetcher(const FileManifest& manifest, UdpFetchOptions options);

}  // namespace btsleuth
