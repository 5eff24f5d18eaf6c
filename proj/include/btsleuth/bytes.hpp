#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace btsleuth {

// Raw octets. Wire data is never assumed to be text.
using Bytes = std::vector<std::uint8_t>;

inline Bytes bytes_of(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(std::span<const std::uint8_t> b) {
    return std::string(b.begin(), b.end());
}

inline void append(Bytes& out, std::span<const std::uint8_t> more) {
    out.insert(out.end(), more.begin(), more.end());
}

inline void append(Bytes& out, std::string_view more) {
    out.insert(out.end(), more.begin(), more.end());
}

std::string to_hex(std::span<const std::uint8_t> b);
std::optional<Bytes> from_hex(std::string_view hex);

// True when every octet is printable ASCII (space..tilde).
bool is_printable_ascii(std::span<const std::uint8_t> b);

// Deterministic generator used wherever reproducibility matters (scenarios,
// ping suffixes, property tests). Raw mt19937_64 output only; the standard
// distributions are implementation-defined and would break cross-machine
// determinism.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

    void fill(std::span<std::uint8_t> out) {
        for (auto& b : out) b = static_cast<std::uint8_t>(next() & 0xff);
    }

    Bytes bytes(std::size_t n) {
        Bytes out(n);
        fill(out);
        return out;
    }

    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 eng_;
};

// Seeds an Rng from the OS entropy source.
Rng entropy_rng();

}  // namespace btsleuth
