#include "btsleuth/wiretap.hpp"

namespace btsleuth {

const char* direction_name(Direction d) {
    return d == Direction::sent ? "sent" : "received";
}

const char* transport_name(Transport t) {
    return t == Transport::udp ? "udp" : "tcp";
}

}  // namespace btsleuth
