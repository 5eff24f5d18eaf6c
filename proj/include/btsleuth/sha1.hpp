#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace btsleuth {

using Digest20 = std::array<std::uint8_t, 20>;

// Incremental SHA-1 (FIPS 180-1). The digest family of the surrounding
// protocol; not used for anything requiring collision resistance.
class Sha1 {
public:
    Sha1() { reset(); }

    void reset();
    void update(std::span<const std::uint8_t> data);
    Digest20 finish();

private:
    void process_block(const std::uint8_t* block);

    std::array<std::uint32_t, 5> h_{};
    std::array<std::uint8_t, 64> buf_{};
    std::size_t buf_len_ = 0;
    std::uint64_t total_ = 0;
};

Digest20 sha1(std::span<const std::uint8_t> data);
Digest20 sha1(std::string_view data);

std::string digest_hex(const Digest20& d);

}  // namespace btsleuth
