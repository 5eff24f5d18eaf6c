#pragma once

#include <string>

#include "btsleuth/bencode.hpp"
#include "btsleuth/bytes.hpp"
#include "btsleuth/identity.hpp"

namespace btsleuth::testing {

inline PeerId peer_id_from(Rng& rng) {
    PeerId p;
    rng.fill(p.id);
    return p;
}

inline ShareId share_id_from(Rng& rng) {
    ShareId s;
    rng.fill(s.digest);
    return s;
}

inline Endpoint6 endpoint_from(Rng& rng) {
    Endpoint6 e;
    rng.fill(e.ip);
    e.port = static_cast<std::uint16_t>(rng.below(65536));
    return e;
}

// Random bencoded tree, depth-bounded so nesting stays within the decoder's
// limit by a wide margin.
inline BValue random_tree(Rng& rng, int depth = 0) {
    const int max_depth = 6;
    std::uint64_t kind = depth >= max_depth ? rng.below(2) : rng.below(4);
    switch (kind) {
        case 0:
            return BValue::string(rng.bytes(rng.below(24)));
        case 1: {
            auto v = static_cast<std::int64_t>(rng.next());
            return BValue::integer(v);
        }
        case 2: {
            BValue l = BValue::list();
            std::uint64_t n = rng.below(5);
            for (std::uint64_t i = 0; i < n; i++) l.push_back(random_tree(rng, depth + 1));
            return l;
        }
        default: {
            BValue d = BValue::dict();
            std::uint64_t n = rng.below(5);
            for (std::uint64_t i = 0; i < n; i++) {
                d.set(rng.bytes(1 + rng.below(12)), random_tree(rng, depth + 1));
            }
            return d;
        }
    }
}

}  // namespace btsleuth::testing
