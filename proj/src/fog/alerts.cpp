#include "odlc/fog/alerts.hpp"

#include <cmath>

#include "odlc/core/errors.hpp"
#include "odlc/util/log.hpp"

namespace odlc::fog {

std::string_view comparator_symbol(Comparator c) noexcept {
  switch (c) {
    case Comparator::Less: return "<";
    case Comparator::LessEqual: return "<=";
    case Comparator::Greater: return ">";
    case Comparator::GreaterEqual: return ">=";
  }
  return ">";
}

Comparator parse_comparator(std::string_view s) {
  if (s == "<") return Comparator::Less;
  if (s == "<=" || s == "≤") return Comparator::LessEqual;
  if (s == ">") return Comparator::Greater;
  if (s == ">=" || s == "≥") return Comparator::GreaterEqual;
  throw BadSelector("unknown comparator '" + std::string(s) + "'");
}

bool compare(Comparator c, double value, double threshold) noexcept {
  if (std::isnan(value)) return false;
  switch (c) {
    case Comparator::Less: return value < threshold;
    case Comparator::LessEqual: return value <= threshold;
    case Comparator::Greater: return value > threshold;
    case Comparator::GreaterEqual: return value >= threshold;
  }
  return false;
}

std::string_view alert_state_name(AlertState s) noexcept {
  return s == AlertState::Firing ? "firing" : "resolved";
}

std::string series_label(const SeriesMeta& m) {
  std::string out = m.name + "{";
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    if (i) out += ",";
    out += m.labels[i].first + "=\"" + m.labels[i].second + "\"";
  }
  out += "}@" + m.device_id;
  return out;
}

std::vector<AlertEvent> AlertEngine::evaluate(const std::vector<AlertRule>& rules, const TimeSeriesStore& tsdb,
                                              std::int64_t now_ms) {
  std::vector<AlertEvent> events;
  for (const auto& rule : rules) {
    std::optional<MetricSelector> sel;
    try {
      sel = MetricSelector::parse(rule.selector);
    } catch (const BadSelector& e) {
      ++bad_selectors_;
      log::warn("alert rule '{}' skipped: {}", rule.id, e.what());
      continue;
    }
    const auto hold_ms = static_cast<std::int64_t>(std::llround(rule.for_duration_s * 1000.0));
    for (const auto& [meta, point] : tsdb.latest(*sel, now_ms)) {
      const auto label = series_label(meta);
      auto& t = tracks_[{rule.id, label}];
      if (compare(rule.comparator, point.value, rule.threshold)) {
        if (!t.holding_since) t.holding_since = now_ms;
        if (!t.firing && now_ms - *t.holding_since >= hold_ms) {
          t.firing = true;
          events.push_back(AlertEvent{rule.id, AlertState::Firing, point.value, label, now_ms});
        }
      } else {
        t.holding_since.reset();
        if (t.firing) {
          t.firing = false;
          events.push_back(AlertEvent{rule.id, AlertState::Resolved, point.value, label, now_ms});
        }
      }
    }
  }
  log_.insert(log_.end(), events.begin(), events.end());
  return events;
}

}  // namespace odlc::fog
