#include "btsleuth/sha1.hpp"

#include <cstring>

#include "btsleuth/bytes.hpp"

namespace btsleuth {

namespace {
inline std::uint32_t rol(std::uint32_t v, int n) {
    return (v << n) | (v >> (32 - n));
}
}  // namespace

void Sha1::reset() {
    h_ = {0x67452301u, 0xefcdab89u, 0x98badcfeu, 0x10325476u, 0xc3d2e1f0u};
    buf_len_ = 0;
    total_ = 0;
}

void Sha1::process_block(const std::uint8_t* block) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i) {
        w[i] = (std::uint32_t(block[i * 4]) << 24) | (std::uint32_t(block[i * 4 + 1]) << 16) |
               (std::uint32_t(block[i * 4 + 2]) << 8) | std::uint32_t(block[i * 4 + 3]);
    }
    for (int i = 16; i < 80; ++i) {
        w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    }

    std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
    for (int i = 0; i < 80; ++i) {
        std::uint32_t f, k;
        if (i < 20) {
            f = (b & c) | (~b & d);
            k = 0x5a827999u;
        } else if (i < 40) {
            f = b ^ c ^ d;
            k = 0x6ed9eba1u;
        } else if (i < 60) {
            f = (b & c) | (b & d) | (c & d);
            k = 0x8f1bbcdcu;
        } else {
            f = b ^ c ^ d;
            k = 0xca62c1d6u;
        }
        std::uint32_t tmp = rol(a, 5) + f + e + k + w[i];
        e = d;
        d = c;
        c = rol(b, 30);
        b = a;
        a = tmp;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
}

void Sha1::update(std::span<const std::uint8_t> data) {
    total_ += data.size();
    std::size_t pos = 0;
    if (buf_len_ > 0) {
        std::size_t take = std::min(data.size(), buf_.size() - buf_len_);
        std::memcpy(buf_.data() + buf_len_, data.data(), take);
        buf_len_ += take;
        pos += take;
        if (buf_len_ == buf_.size()) {
            process_block(buf_.data());
            buf_len_ = 0;
        }
    }
    while (data.size() - pos >= 64) {
        process_block(data.data() + pos);
        pos += 64;
    }
    if (pos < data.size()) {
        std::memcpy(buf_.data(), data.data() + pos, data.size() - pos);
        buf_len_ = data.size() - pos;
    }
}

Digest20 Sha1::finish() {
    std::uint64_t bit_len = total_ * 8;
    const std::uint8_t pad = 0x80;
    update(std::span(&pad, 1));
    const std::uint8_t zero = 0x00;
    while (buf_len_ != 56) update(std::span(&zero, 1));

    std::uint8_t len_be[8];
    for (int i = 0; i < 8; ++i) {
        len_be[i] = static_cast<std::uint8_t>(bit_len >> (56 - 8 * i));
    }
    update(len_be);

    Digest20 out;
    for (int i = 0; i < 5; ++i) {
        out[i * 4] = static_cast<std::uint8_t>(h_[i] >> 24);
        out[i * 4 + 1] = static_cast<std::uint8_t>(h_[i] >> 16);
        out[i * 4 + 2] = static_cast<std::uint8_t>(h_[i] >> 8);
        out[i * 4 + 3] = static_cast<std::uint8_t>(h_[i]);
    }
    reset();
    return out;
}

Digest20 sha1(std::span<const std::uint8_t> data) {
    Sha1 h;
    h.update(data);
    return h.finish();
}

Digest20 sha1(std::string_view data) {
    return sha1(std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string digest_hex(const Digest20& d) {
    return to_hex(d);
}

}  // namespace btsleuth
