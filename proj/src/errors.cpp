#include "btsleuth/errors.hpp"

namespace btsleuth {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::malformed_bencoding: return "MalformedBencoding";
        case Errc::not_bsync: return "NotBsync";
        case Errc::unknown_mode: return "UnknownMode";
        case Errc::truncated_relay_target: return "TruncatedRelayTarget";
        case Errc::invariant_violation: return "InvariantViolation";
        case Errc::unknown_message: return "UnknownMessage";
        case Errc::invalid_secret: return "InvalidSecret";
        case Errc::wrong_length: return "WrongLength";
        case Errc::entropy_unavailable: return "EntropyUnavailable";
        case Errc::timeout: return "Timeout";
        case Errc::protocol_error: return "ProtocolError";
        case Errc::share_mismatch: return "ShareMismatch";
        case Errc::socket_unavailable: return "SocketUnavailable";
        case Errc::unknown_target_peer: return "UnknownTargetPeer";
        case Errc::session_order_violation: return "SessionOrderViolation";
        case Errc::all_providers_failed: return "AllProvidersFailed";
        case Errc::io_error: return "IoError";
        case Errc::incomplete_coverage: return "IncompleteCoverage";
        case Errc::chunk_hash_mismatch: return "ChunkHashMismatch";
        case Errc::peer_unreachable: return "PeerUnreachable";
        case Errc::bag_sealed: return "BagSealed";
        case Errc::integrity_failure: return "IntegrityFailure";
        case Errc::decode_divergence: return "DecodeDivergence";
        case Errc::unrecognized_input: return "UnrecognizedInput";
        case Errc::invalid_scenario: return "InvalidScenario";
        case Errc::port_exhaustion: return "PortExhaustion";
        case Errc::usage: return "Usage";
    }
    return "UnknownError";
}

}  // namespace btsleuth
