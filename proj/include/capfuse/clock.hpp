#pragma once

#include <chrono>
#include <cstdint>
#include <thread>

namespace capfuse {

/// Wall-clock source in microseconds; injectable so timing logic is testable.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_us() const = 0;
  virtual void sleep_until_us(std::int64_t deadline_us) = 0;
};

class SteadyClock final : public Clock {
 public:
  std::int64_t now_us() const override {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }
  void sleep_until_us(std::int64_t deadline_us) override {
    std::this_thread::sleep_until(std::chrono::steady_clock::time_point(std::chrono::microseconds(deadline_us)));
  }
};

/// Time only moves when someone sleeps or calls advance().
class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::int64_t start_us = 0) : now_(start_us) {}
  std::int64_t now_us() const override { return now_; }
  void sleep_until_us(std::int64_t deadline_us) override {
    if (deadline_us > now_) now_ = deadline_us;
  }
  void advance_us(std::int64_t delta) { now_ += delta; }

 private:
  std::int64_t now_;
};

}  // namespace capfuse
