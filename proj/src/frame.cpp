#include "btsleuth/frame.hpp"

#include <algorithm>

namespace btsleuth {

Bytes encode_frame(const Frame& f) {
    if ((f.mode == Frame::Mode::relay) != f.relay_target.has_value()) {
        throw Error(Errc::invariant_violation,
                    "relay_target present iff mode is relay");
    }
    Bytes out;
    out.reserve(kFrameMagic.size() + 1 + (f.relay_target ? 20 : 0) + f.payload.size());
    append(out, kFrameMagic);
    out.push_back(f.mode == Frame::Mode::direct ? kModeDirect : kModeRelay);
    if (f.relay_target) append(out, f.relay_target->id);
    append(out, f.payload);
    return out;
}

Frame decode_frame(std::span<const std::uint8_t> b) {
    if (b.size() < kFrameMagic.size() ||
        !std::equal(kFrameMagic.begin(), kFrameMagic.end(), b.begin())) {
        throw CodecError(Errc::not_bsync, 0, "missing BSYNC magic");
    }
    if (b.size() < kFrameMagic.size() + 1) {
        throw CodecError(Errc::unknown_mode, kFrameMagic.size(), "missing mode octet");
    }
    std::uint8_t mode = b[kFrameMagic.size()];
    std::size_t pos = kFrameMagic.size() + 1;
    if (mode == kModeDirect) {
        return Frame::direct(Bytes(b.begin() + pos, b.end()));
    }
    if (mode == kModeRelay) {
        if (b.size() < pos + 20) {
            throw CodecError(Errc::truncated_relay_target, pos,
                             "relay target requires 20 octets");
        }
        PeerId target;
        std::copy_n(b.begin() + pos, 20, target.id.begin());
        return Frame::relay(target, Bytes(b.begin() + pos + 20, b.end()));
    }
    throw CodecError(Errc::unknown_mode, kFrameMagic.size(), "unknown mode octet");
}

RelayPayload split_relay_payload(std::span<const std::uint8_t> payload) {
    for (std::size_t i = 0; i < payload.size(); ++i) {
        if (payload[i] != 'd') continue;
        try {
            BDecoded d = decode_bvalue(payload.subspan(i));
            if (d.value.is_dict() && i + d.consumed == payload.size()) {
                return RelayPayload{Bytes(payload.begin(), payload.begin() + i),
                                    std::move(d.value)};
            }
        } catch (const CodecError&) {
            // not a dict suffix at this position
        }
    }
    return RelayPayload{Bytes(payload.begin(), payload.end()), std::nullopt};
}

}  // namespace btsleuth
