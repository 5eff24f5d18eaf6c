#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "btsleuth/bytes.hpp"
#include "btsleuth/clock.hpp"
#include "btsleuth/errors.hpp"
#include "btsleuth/sha1.hpp"

namespace btsleuth {

// 20-octet identifier of a client instance.
struct PeerId {
    std::array<std::uint8_t, 20> id{};

    auto operator<=>(const PeerId&) const = default;
    std::string hex() const { return to_hex(id); }
};

// SHA-1 of the secret's text form; identifies a share without revealing it.
struct ShareId {
    Digest20 digest{};

    auto operator<=>(const ShareId&) const = default;
    std::string hex() const { return to_hex(digest); }
};

// IPv4 address + port, 6 octets on the wire in network byte order.
struct Endpoint6 {
    std::array<std::uint8_t, 4> ip{};
    std::uint16_t port = 0;

    auto operator<=>(const Endpoint6&) const = default;
    std::string str() const;  // "a.b.c.d:port"
};

std::array<std::uint8_t, 6> encode_endpoint(const Endpoint6& e);
Endpoint6 decode_endpoint(std::span<const std::uint8_t> b);  // WrongLength unless 6 octets

// "a.b.c.d" / "a.b.c.d:port" parsing for configuration and CLI input.
std::array<std::uint8_t, 4> parse_ip4(std::string_view s);
Endpoint6 parse_endpoint(std::string_view s);

enum class SecretCategory { read_write, read_only, encrypted_read_only, custom };

const char* secret_category_name(SecretCategory c);

// A distributable access credential. Generated secrets are a prefix character
// plus the unpadded RFC 4648 Base32 of a 20-octet core: A/D grant read-write,
// B/E read-only, F encrypted read-only. User-supplied custom secrets are
// base64 text of at least 40 characters. The 24-hour variant is the same
// credential with an expiry; members who joined in time keep the persistent
// secret.
struct Secret {
    SecretCategory category = SecretCategory::read_write;
    bool temporary = false;
    std::optional<Instant> expires_at;             // set iff temporary
    std::string text;                              // distribution form
    std::optional<std::array<std::uint8_t, 20>> core;  // absent for custom

    bool expired(Instant now) const { return expires_at && now >= *expires_at; }
};

inline constexpr std::int64_t kTemporarySecretLifetimeMs = 24LL * 60 * 60 * 1000;

// Fresh 20-octet core from `entropy`. category must not be custom.
Secret generate_secret(SecretCategory category, bool temporary, Rng& entropy,
                       Instant now = 0);

// Classifies by prefix and length: a 33-character string whose first char is
// one of A/D/B/E/F and whose remaining 32 chars are Base32 is a generated
// secret; otherwise base64 text of >= 40 chars is custom. Anything else is
// InvalidSecret.
Secret parse_secret(std::string_view text);

Secret custom_secret(std::string_view text);  // validates the custom rules only

ShareId share_id_of(const Secret& s);

// Base32 helpers (RFC 4648, unpadded, uppercase). 20 octets <-> 32 chars.
std::string base32_encode(std::span<const std::uint8_t> data);
std::optional<Bytes> base32_decode(std::string_view text);

}  // namespace btsleuth
