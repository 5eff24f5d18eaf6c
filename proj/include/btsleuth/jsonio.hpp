#pragma once

#include <json.hpp>
#include <span>
#include <string>

#include "btsleuth/discovery.hpp"
#include "btsleuth/frame.hpp"
#include "btsleuth/messages.hpp"
#include "btsleuth/wiretap.hpp"

namespace btsleuth {

using Json = nlohmann::json;

// One stable text per value: keys sorted, no insignificant whitespace. Every
// digest in the evidence format is computed over this form.
std::string canonical_json(const Json& j);

// Dissection for the decode surface: typed JSON views of wire material.
// describe_message names the variant under "type"; describe_frame adds the
// header and falls back to an opaque view when the payload is not a known
// message; describe_wire decodes the frame first and reports codec errors
// as {"error", "offset"} instead of throwing.
Json describe_message(const Message& m);
Json describe_frame(const Frame& f);
Json describe_wire(std::span<const std::uint8_t> wire);

Json peer_record_json(const PeerRecord& r);
PeerRecord peer_record_from_json(const Json& j);

Json stream_record_head_json(const StreamRecord& r);

}  // namespace btsleuth
