#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace odlc::harness {

struct LinkInterval {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;  // exclusive
  bool available = true;
  double bandwidth_bytes_per_s = 0.0;  // 0 while unavailable

  friend bool operator==(const LinkInterval&, const LinkInterval&) = default;
};

// Contiguous, non-overlapping intervals covering [0, end_ms()).
class LinkSchedule {
 public:
  // Throws ScenarioConfigError when the intervals leave gaps, overlap or do
  // not start at 0.
  explicit LinkSchedule(std::vector<LinkInterval> intervals);

  static LinkSchedule always_up(std::int64_t duration_ms, double bandwidth_bytes_per_s);

  // One interval per line: `<start_s> <end_s> up|down [bandwidth_bytes_per_s]`.
  // Lines starting with `#` are comments. Up intervals without a bandwidth
  // use `default_bandwidth`.
  static LinkSchedule parse(std::string_view text, double default_bandwidth);
  std::string to_text() const;

  const std::vector<LinkInterval>& intervals() const noexcept { return intervals_; }
  std::int64_t end_ms() const noexcept { return intervals_.back().end_ms; }
  // Times at or past the end report the last interval.
  const LinkInterval& at(std::int64_t t_ms) const;
  double availability() const;

  friend bool operator==(const LinkSchedule&, const LinkSchedule&) = default;

 private:
  std::vector<LinkInterval> intervals_;
};

// Marks [at, at + duration) unavailable, merging adjacent intervals of the
// same state. Throws OutOfRange when the outage leaves the schedule.
LinkSchedule inject_outage(const LinkSchedule& schedule, std::int64_t at_ms, std::int64_t duration_ms);

// Alternating up/down periods with exponential lengths.
LinkSchedule random_schedule(std::mt19937_64& rng, std::int64_t duration_ms, double bandwidth_bytes_per_s,
                             double mean_up_s, double mean_down_s);

}  // namespace odlc::harness
