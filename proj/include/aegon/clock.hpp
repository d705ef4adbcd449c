#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>

namespace aegon {

// Time source abstraction so protocol timing (TTLs, backoff, skew checks) is
// deterministic under test.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
    std::int64_t now_s() { return now_ms() / 1000; }
};

class SystemClock final : public Clock {
public:
    std::int64_t now_ms() override {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }
};

class ManualClock final : public Clock {
public:
    explicit ManualClock(std::int64_t start_ms = 1'750'000'000'000) : ms_(start_ms) {}
    std::int64_t now_ms() override { return ms_.load(); }
    void advance_ms(std::int64_t delta) { ms_ += delta; }
    void advance_s(std::int64_t delta) { ms_ += delta * 1000; }
    void set_ms(std::int64_t v) { ms_ = v; }

private:
    std::atomic<std::int64_t> ms_;
};

using ClockPtr = std::shared_ptr<Clock>;

} // namespace aegon
