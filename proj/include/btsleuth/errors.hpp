#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace btsleuth {

enum class Errc {
    // codec
    malformed_bencoding,
    not_bsync,
    unknown_mode,
    truncated_relay_target,
    // messages
    invariant_violation,
    unknown_message,
    // identity
    invalid_secret,
    wrong_length,
    entropy_unavailable,
    // discovery / emulators
    timeout,
    protocol_error,
    share_mismatch,
    socket_unavailable,
    unknown_target_peer,
    session_order_violation,
    all_providers_failed,
    // transfer
    io_error,
    incomplete_coverage,
    chunk_hash_mismatch,
    peer_unreachable,
    // evidence
    bag_sealed,
    integrity_failure,
    decode_divergence,
    // crawler / cli
    unrecognized_input,
    invalid_scenario,
    port_exhaustion,
    usage,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

// Decode errors carry the byte offset of the first offending octet.
class CodecError : public Error {
public:
    CodecError(Errc code, std::size_t offset, const std::string& what)
        : Error(code, what + " at offset " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace btsleuth
