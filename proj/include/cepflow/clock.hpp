#pragma once

#include <chrono>

#include "cepflow/event.hpp"

namespace cepflow {

// Monotonic microsecond clock. The virtual variant is advanced explicitly
// by the discrete-event scheduler; the wall variant reads steady_clock
// relative to its construction instant.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class VirtualClock final : public Clock {
 public:
  Timestamp now() const override { return now_; }

  // Time never moves backwards.
  void advance_to(Timestamp t) {
    if (t > now_) now_ = t;
  }

 private:
  Timestamp now_ = 0;
};

class WallClock final : public Clock {
 public:
  WallClock() : origin_(std::chrono::steady_clock::now()) {}

  Timestamp now() const override {
    const auto elapsed = std::chrono::steady_clock::now() - origin_;
    return std::chrono::duration_cast<std::chrono::microseconds>(elapsed)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point origin_;
};

}  // namespace cepflow
