#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "odlc/fog/tsdb.hpp"

namespace odlc::fog {

enum class Comparator { Less, LessEqual, Greater, GreaterEqual };

std::string_view comparator_symbol(Comparator c) noexcept;
// Accepts <, <=, >, >= and the Unicode forms ≤ and ≥. Throws BadSelector.
Comparator parse_comparator(std::string_view s);
bool compare(Comparator c, double value, double threshold) noexcept;

struct AlertRule {
  std::string id;
  std::string selector;  // parsed at evaluation time
  Comparator comparator = Comparator::Greater;
  double threshold = 0.0;
  double for_duration_s = 0.0;
};

enum class AlertState { Firing, Resolved };

struct AlertEvent {
  std::string rule_id;
  AlertState state = AlertState::Firing;
  double value = 0.0;  // the triggering (or resolving) sample value
  std::string series;  // name{labels} @ device
  std::int64_t at_ms = 0;
};

std::string_view alert_state_name(AlertState s) noexcept;

// Per (rule, series) hold tracking over successive evaluations. A condition
// fires once it has held at every evaluation spanning for_duration_s, and
// resolves at the first evaluation where it no longer holds.
class AlertEngine {
 public:
  std::vector<AlertEvent> evaluate(const std::vector<AlertRule>& rules, const TimeSeriesStore& tsdb,
                                   std::int64_t now_ms);

  const std::vector<AlertEvent>& log() const noexcept { return log_; }
  std::uint64_t bad_selector_count() const noexcept { return bad_selectors_; }

 private:
  struct Track {
    std::optional<std::int64_t> holding_since;
    bool firing = false;
  };
  std::map<std::pair<std::string, std::string>, Track> tracks_;
  std::vector<AlertEvent> log_;
  std::uint64_t bad_selectors_ = 0;
};

std::string series_label(const SeriesMeta& m);

}  // namespace odlc::fog
