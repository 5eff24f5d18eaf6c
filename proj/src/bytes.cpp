#include "btsleuth/bytes.hpp"

#include <random>
#include <stdexcept>

namespace btsleuth {

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}
}  // namespace

std::string to_hex(std::span<const std::uint8_t> b) {
    std::string out;
    out.reserve(b.size() * 2);
    for (auto octet : b) {
        out.push_back(kHexDigits[octet >> 4]);
        out.push_back(kHexDigits[octet & 0x0f]);
    }
    return out;
}

std::optional<Bytes> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_nibble(hex[i]);
        int lo = hex_nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
}

bool is_printable_ascii(std::span<const std::uint8_t> b) {
    for (auto octet : b) {
        if (octet < 0x20 || octet > 0x7e) return false;
    }
    return true;
}

Rng entropy_rng() {
    std::random_device dev;
    std::uint64_t seed = (static_cast<std::uint64_t>(dev()) << 32) | dev();
    return Rng(seed);
}

}  // namespace btsleuth
