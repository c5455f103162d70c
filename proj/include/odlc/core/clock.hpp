#pragma once

#include <atomic>
#include <cstdint>

namespace odlc {

// All time reads go through a Clock so the replay harness can run a long
// journey on compressed virtual time.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() const = 0;
  virtual std::int64_t now_us() const { return now_ms() * 1000; }
};

class SystemClock final : public Clock {
 public:
  std::int64_t now_ms() const override;
  std::int64_t now_us() const override;
};

class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(std::int64_t start_ms = 0) : now_us_(start_ms * 1000) {}

  std::int64_t now_ms() const override { return now_us_.load() / 1000; }
  std::int64_t now_us() const override { return now_us_.load(); }

  void set_ms(std::int64_t t) { now_us_.store(t * 1000); }
  void advance_ms(std::int64_t d) { now_us_.fetch_add(d * 1000); }
  void advance_us(std::int64_t d) { now_us_.fetch_add(d); }

 private:
  std::atomic<std::int64_t> now_us_;
};

}  // namespace odlc
