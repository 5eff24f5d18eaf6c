#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

namespace btsleuth {

// Milliseconds since the Unix epoch, UTC.
using Instant = std::int64_t;

std::string iso8601_ms(Instant t);

class Clock {
public:
    virtual ~Clock() = default;
    virtual Instant now() const = 0;
};

class SystemClock final : public Clock {
public:
    Instant now() const override;
    static SystemClock& instance();
};

// Test/scenario clock advanced explicitly by its owner.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Instant start = 0) : now_(start) {}

    Instant now() const override { return now_.load(); }
    void set(Instant t) { now_.store(t); }
    void advance(std::int64_t ms) { now_.fetch_add(ms); }

private:
    std::atomic<Instant> now_;
};

}  // namespace btsleuth
