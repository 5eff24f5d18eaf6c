#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "btsleuth/frame.hpp"
#include "btsleuth/identity.hpp"

namespace btsleuth {

// LAN pings carry the 20-octet ShareID followed by 12 extra octets; replies
// carry the bare ShareID. Receivers match on the 20-octet prefix.
using LanShare = std::array<std::uint8_t, 32>;
using Nonce16 = std::array<std::uint8_t, 16>;
using Sid16 = std::array<std::uint8_t, 16>;

LanShare make_lan_share(const ShareId& share, std::span<const std::uint8_t> suffix12);
ShareId lan_share_prefix(const LanShare& s);

// One entry of a tracker peer list: external endpoint, local endpoint, PeerID
// (wire keys a, la, p; all three always present).
struct PeerEntry {
    Endpoint6 external;
    Endpoint6 local;
    PeerId peer;

    auto operator<=>(const PeerEntry&) const = default;
};

struct GetPeers {
    Endpoint6 la;
    PeerId peer;
    ShareId share;

    bool operator==(const GetPeers&) const = default;
};

struct PeersResponse {
    Endpoint6 ea;                  // requester's external endpoint as observed
    ShareId share;
    std::int64_t time = 0;         // unix seconds
    std::vector<PeerEntry> peers;  // never empty: always echoes the requester

    bool operator==(const PeersResponse&) const = default;
};

struct Ping {
    PeerId peer;
    std::uint16_t port = 0;
    LanShare share{};

    bool operator==(const Ping&) const = default;
};

struct PingReply {
    PeerId peer;
    std::uint16_t port = 0;
    ShareId share;

    bool operator==(const PingReply&) const = default;
};

struct RelayPing {
    PeerId peer;
    LanShare share{};

    bool operator==(const RelayPing&) const = default;
};

struct RelayHashmap {
    Bytes blob;

    bool operator==(const RelayHashmap&) const = default;
};

struct RelayNonceOffer {
    Nonce16 nonce{};
    LanShare share{};
    Sid16 sid{};

    bool operator==(const RelayNonceOffer&) const = default;
};

struct RelayNonceAck {
    Nonce16 nonce{};
    std::string sid_status = "OK";

    bool operator==(const RelayNonceAck&) const = default;
};

// Rejection notice a service sends before acting on a bad unit, e.g. the
// relay refusing an out-of-order handshake step. `code` is an errc name.
struct ErrorNotice {
    std::string code;
    std::string text;

    bool operator==(const ErrorNotice&) const = default;
};

// Chunk transfer pair. `path` is the share-relative file name from the
// manifest, never empty; `index` counts chunks from zero.
struct GetChunk {
    ShareId share;
    std::string path;
    std::int64_t index = 0;

    bool operator==(const GetChunk&) const = default;
};

struct Chunk {
    std::int64_t index = 0;
    Bytes data;

    bool operator==(const Chunk&) const = default;
};

using Message = std::variant<GetPeers, PeersResponse, Ping, PingReply, RelayPing, RelayHashmap,
                             RelayNonceOffer, RelayNonceAck, ErrorNotice, GetChunk, Chunk>;

const char* message_name(const Message& m);

// Serializes a message into a frame with the canonical bencoding of its
// documented grammar. Relay variants require `relay_target`; direct variants
// must not carry one. Throws Error{invariant_violation} when a message
// invariant fails (e.g. an empty peer list).
Frame build(const Message& m, const std::optional<PeerId>& relay_target = std::nullopt);

// Inverse of build on built frames. Classification is driven by the `m`
// label, the frame mode, and the key set; the ping/ping-reply distinction is
// the 32- vs 20-octet share length. Unrecognized payloads throw
// UnknownMessageError carrying the decoded value for evidence logging.
Message parse(const Frame& f);

class UnknownMessageError : public Error {
public:
    UnknownMessageError(std::string what, BValue raw)
        : Error(Errc::unknown_message, what), raw_(std::move(raw)) {}

    const BValue& raw() const { return raw_; }

private:
    BValue raw_;
};

}  // namespace btsleuth
