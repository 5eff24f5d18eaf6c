#include "btsleuth/identity.hpp"

#include <charconv>

namespace btsleuth {

namespace {

constexpr std::string_view kBase32Alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567";

int base32_index(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= '2' && c <= '7') return c - '2' + 26;
    return -1;
}

bool is_base64_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '+' || c == '/';
}

// base64 body with optional trailing '=' padding
bool is_base64_text(std::string_view s) {
    if (s.empty()) return false;
    std::size_t body = s.size();
    while (body > 0 && s[body - 1] == '=') --body;
    if (s.size() - body > 2) return false;
    for (std::size_t i = 0; i < body; ++i) {
        if (!is_base64_char(s[i])) return false;
    }
    return body > 0;
}

std::optional<SecretCategory> category_for_prefix(char c) {
    switch (c) {
        case 'A':
        case 'D':
            return SecretCategory::read_write;
        case 'B':
        case 'E':
            return SecretCategory::read_only;
        case 'F':
            return SecretCategory::encrypted_read_only;
        default:
            return std::nullopt;
    }
}

char prefix_for_category(SecretCategory c) {
    switch (c) {
        case SecretCategory::read_write:
            return 'A';
        case SecretCategory::read_only:
            return 'B';
        case SecretCategory::encrypted_read_only:
            return 'F';
        case SecretCategory::custom:
            break;
    }
    throw Error(Errc::invalid_secret, "custom secrets have no prefix");
}

}  // namespace

std::string Endpoint6::str() const {
    return std::to_string(ip[0]) + "." + std::to_string(ip[1]) + "." + std::to_string(ip[2]) +
           "." + std::to_string(ip[3]) + ":" + std::to_string(port);
}

std::array<std::uint8_t, 6> encode_endpoint(const Endpoint6& e) {
    return {e.ip[0], e.ip[1], e.ip[2], e.ip[3], static_cast<std::uint8_t>(e.port >> 8),
            static_cast<std::uint8_t>(e.port & 0xff)};
}

Endpoint6 decode_endpoint(std::span<const std::uint8_t> b) {
    if (b.size() != 6) {
        throw Error(Errc::wrong_length, "endpoint must be exactly 6 octets, got " +
                                            std::to_string(b.size()));
    }
    Endpoint6 e;
    std::copy_n(b.begin(), 4, e.ip.begin());
    e.port = static_cast<std::uint16_t>(b[4] << 8 | b[5]);
    return e;
}

std::array<std::uint8_t, 4> parse_ip4(std::string_view s) {
    std::array<std::uint8_t, 4> ip{};
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        std::size_t dot = i < 3 ? s.find('.', pos) : s.size();
        if (dot == std::string_view::npos) {
            throw Error(Errc::protocol_error, "bad IPv4 address: " + std::string(s));
        }
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + dot, value);
        if (ec != std::errc{} || ptr != s.data() + dot || value > 255 || dot == pos) {
            throw Error(Errc::protocol_error, "bad IPv4 address: " + std::string(s));
        }
        ip[i] = static_cast<std::uint8_t>(value);
        pos = dot + 1;
    }
    return ip;
}

Endpoint6 parse_endpoint(std::string_view s) {
    std::size_t colon = s.rfind(':');
    if (colon == std::string_view::npos) {
        throw Error(Errc::protocol_error, "expected ip:port, got " + std::string(s));
    }
    Endpoint6 e;
    e.ip = parse_ip4(s.substr(0, colon));
    unsigned port = 0;
    std::string_view p = s.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
    if (ec != std::errc{} || ptr != p.data() + p.size() || port > 65535 || p.empty()) {
        throw Error(Errc::protocol_error, "bad port in " + std::string(s));
    }
    e.port = static_cast<std::uint16_t>(port);
    return e;
}

const char* secret_category_name(SecretCategory c) {
    switch (c) {
        case SecretCategory::read_write:
            return "read_write";
        case SecretCategory::read_only:
            return "read_only";
        case SecretCategory::encrypted_read_only:
            return "encrypted_read_only";
        case SecretCategory::custom:
            return "custom";
    }
    return "?";
}

std::string base32_encode(std::span<const std::uint8_t> data) {
    std::string out;
    out.reserve((data.size() * 8 + 4) / 5);
    std::uint32_t acc = 0;
    int bits = 0;
    for (auto octet : data) {
        acc = (acc << 8) | octet;
        bits += 8;
        while (bits >= 5) {
            out.push_back(kBase32Alphabet[(acc >> (bits - 5)) & 0x1f]);
            bits -= 5;
        }
    }
    if (bits > 0) {
        out.push_back(kBase32Alphabet[(acc << (5 - bits)) & 0x1f]);
    }
    return out;
}

std::optional<Bytes> base32_decode(std::string_view text) {
    Bytes out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : text) {
        int idx = base32_index(c);
        if (idx < 0) return std::nullopt;
        acc = (acc << 5) | static_cast<std::uint32_t>(idx);
        bits += 5;
        if (bits >= 8) {
            out.push_back(static_cast<std::uint8_t>((acc >> (bits - 8)) & 0xff));
            bits -= 8;
        }
    }
    // leftover bits must be zero padding
    if (bits > 0 && (acc & ((1u << bits) - 1)) != 0) return std::nullopt;
    return out;
}

Secret generate_secret(SecretCategory category, bool temporary, Rng& entropy, Instant now) {
    if (category == SecretCategory::custom) {
        throw Error(Errc::invalid_secret, "custom secrets are user-supplied, not generated");
    }
    Secret s;
    s.category = category;
    s.temporary = temporary;
    if (temporary) s.expires_at = now + kTemporarySecretLifetimeMs;
    std::array<std::uint8_t, 20> core{};
    entropy.fill(core);
    s.core = core;
    s.text = std::string(1, prefix_for_category(category)) + base32_encode(core);
    return s;
}

Secret parse_secret(std::string_view text) {
    if (text.size() == 33) {
        auto category = category_for_prefix(text[0]);
        if (category) {
            auto core = base32_decode(text.substr(1));
            if (!core || core->size() != 20) {
                throw Error(Errc::invalid_secret,
                            "prefixed secret body is not 32 Base32 characters");
            }
            Secret s;
            s.category = *category;
            s.text = std::string(text);
            std::array<std::uint8_t, 20> c{};
            std::copy_n(core->begin(), 20, c.begin());
            s.core = c;
            return s;
        }
    }
    return custom_secret(text);
}

Secret custom_secret(std::string_view text) {
    if (text.size() < 40) {
        throw Error(Errc::invalid_secret, "custom secrets require at least 40 characters, got " +
                                              std::to_string(text.size()));
    }
    if (!is_base64_text(text)) {
        throw Error(Errc::invalid_secret, "custom secrets must be base64 text");
    }
    Secret s;
    s.category = SecretCategory::custom;
    s.text = std::string(text);
    return s;
}

ShareId share_id_of(const Secret& s) {
    return ShareId{sha1(s.text)};
}

}  // namespace btsleuth
