#pragma once

// Value types and pure functions of the weighted outcome / overhead model.
// No I/O lives here.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "odlc/core/record.hpp"

namespace odlc {

inline constexpr double kWeightTolerance = 1e-9;
inline constexpr double kOverheadFloor = 0.01;

// Per-domain importance. Only constructible through validate_weights, so an
// instance always sums to one.
class WeightProfile {
 public:
  const std::string& name() const noexcept { return name_; }
  double w_metric() const noexcept { return w_[0]; }
  double w_log() const noexcept { return w_[1]; }
  double w_trace() const noexcept { return w_[2]; }
  double weight(Domain d) const noexcept { return w_[domain_index(d)]; }
  // Weight 0 disables the domain entirely.
  bool enabled(Domain d) const noexcept { return weight(d) > 0.0; }

  friend bool operator==(const WeightProfile&, const WeightProfile&) = default;

 private:
  friend WeightProfile validate_weights(double, double, double, std::string);
  WeightProfile(std::string name, std::array<double, 3> w) : name_(std::move(name)), w_(w) {}

  std::string name_;
  std::array<double, 3> w_{};
};

WeightProfile validate_weights(double w_metric, double w_log, double w_trace,
                               std::string name = "custom");

// Named profiles: "balanced", "regular", "incident", "metrics-only", or an
// inline "a,b,c" triple.
WeightProfile weight_profile(const std::string& spec);

struct OverheadVector {
  double cpu_pct = 0.0;
  double mem_pct = 0.0;
  double net_pct = 0.0;

  friend bool operator==(const OverheadVector&, const OverheadVector&) = default;
};

// Throws InvalidRecord when any field is outside [0, 100].
OverheadVector make_overhead_vector(double cpu_pct, double mem_pct, double net_pct);

class OverheadScore {
 public:
  // Clamps to the floor; values above 100 are rejected.
  static OverheadScore of(double value);
  double value() const noexcept { return value_; }

  friend bool operator==(const OverheadScore&, const OverheadScore&) = default;

 private:
  explicit OverheadScore(double v) : value_(v) {}
  double value_;
};

struct CorrelationWindow {
  std::int64_t start = 0;  // ms, inclusive
  std::int64_t end = 0;    // ms, exclusive
  std::optional<std::set<std::string>> device_filter;

  bool admits_device(const std::string& device) const {
    return !device_filter || device_filter->contains(device);
  }
};

// Throws InvalidRange when start >= end.
CorrelationWindow make_window(std::int64_t start, std::int64_t end,
                              std::optional<std::set<std::string>> devices = std::nullopt);

struct CorrelationScore {
  int occupied_domains = 0;
  double score = 0.0;
};

struct OutcomeReport {
  WeightProfile weights;
  OverheadScore over_metric;
  OverheadScore over_log;
  OverheadScore over_trace;
  OverheadScore over_x;
  CorrelationScore x_score;
  double collection_term = 0.0;
  double analysis_term = 0.0;
  double outcome = 0.0;
};

using DomainCounts = std::map<Domain, std::uint64_t>;

OverheadScore overhead_score(const OverheadVector& v);
CorrelationScore correlation_score(const DomainCounts& counts_per_domain);
OutcomeReport outcome(const WeightProfile& w, OverheadScore over_m, OverheadScore over_l,
                      OverheadScore over_t, const CorrelationScore& x, OverheadScore over_x);
std::uint64_t project_volume(std::uint64_t payload_bytes, double interval_seconds,
                             double duration_hours, std::uint64_t device_count);
double batch_priority(Domain domain, const WeightProfile& w, OverheadScore over);

}  // namespace odlc
