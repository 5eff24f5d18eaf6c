#pragma once

#include <optional>
#include <span>

#include "btsleuth/bencode.hpp"
#include "btsleuth/bytes.hpp"
#include "btsleuth/identity.hpp"

namespace btsleuth {

inline constexpr std::string_view kFrameMagic = "BSYNC";
inline constexpr std::uint8_t kModeDirect = 0x00;
inline constexpr std::uint8_t kModeRelay = 0x80;

// One BSYNC datagram/segment: `BSYNC` magic, a mode octet, and the payload.
// Relay mode inserts the 20-octet PeerID of the bridge's remote side between
// the mode octet and the payload.
struct Frame {
    enum class Mode { direct, relay };

    Mode mode = Mode::direct;
    std::optional<PeerId> relay_target;  // present iff mode == relay
    Bytes payload;

    bool operator==(const Frame&) const = default;

    static Frame direct(Bytes payload) {
        return Frame{Mode::direct, std::nullopt, std::move(payload)};
    }
    static Frame relay(const PeerId& target, Bytes payload) {
        return Frame{Mode::relay, target, std::move(payload)};
    }
};

Bytes encode_frame(const Frame& f);

// Decodes a complete buffer; the payload is everything after the header.
// Throws CodecError: not_bsync, unknown_mode, truncated_relay_target.
Frame decode_frame(std::span<const std::uint8_t> b);

// Relay handshake frames may carry non-bencoded data (a hashmap) before a
// trailing bencoded dictionary. Splits the payload by scanning for the
// longest suffix that decodes as a dict consuming the remainder; a payload
// with no such suffix is all prefix.
struct RelayPayload {
    Bytes prefix;
    std::optional<BValue> dict;
};

RelayPayload split_relay_payload(std::span<const std::uint8_t> payload);

}  // namespace btsleuth
