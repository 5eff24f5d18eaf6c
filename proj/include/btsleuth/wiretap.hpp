#pragma once

#include <cstdint>
#include <mutex>
#include <vector>

#include "btsleuth/bytes.hpp"
#include "btsleuth/clock.hpp"
#include "btsleuth/identity.hpp"

namespace btsleuth {

enum class Direction : std::uint8_t { sent = 0, received = 1 };
enum class Transport : std::uint8_t { udp = 0, tcp = 1 };

const char* direction_name(Direction d);
const char* transport_name(Transport t);

// One captured datagram or stream unit, stored verbatim before any decoding.
struct StreamRecord {
    std::uint64_t seq = 0;
    Instant captured_at = 0;
    Direction direction = Direction::sent;
    Transport transport = Transport::udp;
    Endpoint6 src;
    Endpoint6 dst;
    Bytes payload;

    bool operator==(const StreamRecord&) const = default;
};

// Capture stamp handed back to the code that observed the frame, so derived
// records carry exactly the seq and timestamp stored in the stream.
struct CaptureStamp {
    std::uint64_t seq = 0;
    Instant captured_at = 0;
};

// Shared capture point. Providers append every frame they send or receive;
// the investigation drains completed sweeps into the evidence bag. Seq
// numbers are unique and ascending per tap.
class WireTap {
public:
    explicit WireTap(Clock& clock) : clock_(clock) {}

    CaptureStamp append(Direction direction, Transport transport, const Endpoint6& src,
                        const Endpoint6& dst, Bytes payload) {
        std::lock_guard lock(mu_);
        StreamRecord r;
        CaptureStamp stamp{next_seq_++, clock_.now()};
        r.seq = stamp.seq;
        r.captured_at = stamp.captured_at;
        r.direction = direction;
        r.transport = transport;
        r.src = src;
        r.dst = dst;
        r.payload = std::move(payload);
        records_.push_back(std::move(r));
        return stamp;
    }

    std::vector<StreamRecord> drain() {
        std::lock_guard lock(mu_);
        std::vector<StreamRecord> out;
        out.swap(records_);
        return out;
    }

    std::vector<StreamRecord> snapshot() const {
        std::lock_guard lock(mu_);
        return records_;
    }

    std::uint64_t next_seq() const {
        std::lock_guard lock(mu_);
        return next_seq_;
    }

private:
    Clock& clock_;
    mutable std::mutex mu_;
    std::uint64_t next_seq_ = 0;
    std::vector<StreamRecord> records_;
};

}  // namespace btsleuth
