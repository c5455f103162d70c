#include "odlc/core/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "odlc/core/errors.hpp"

namespace odlc {

WeightProfile validate_weights(double w_metric, double w_log, double w_trace, std::string name) {
  const std::array<double, 3> w{w_metric, w_log, w_trace};
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
      std::ostringstream os;
      os << "weight " << x << " outside [0, 1]";
      throw WeightRangeError(os.str());
    }
  }
  const double sum = w_metric + w_log + w_trace;
  if (std::abs(sum - 1.0) > kWeightTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "weights sum to " << sum << ", expected 1";
    throw WeightSumError(os.str());
  }
  return WeightProfile(std::move(name), w);
}

WeightProfile weight_profile(const std::string& spec) {
  if (spec == "balanced") return validate_weights(1.0 / 3, 1.0 / 3, 1.0 / 3, spec);
  if (spec == "regular") return validate_weights(0.5, 0.3, 0.2, spec);
  // After a massive error logs and traces matter more than steady metrics.
  if (spec == "incident") return validate_weights(0.2, 0.5, 0.3, spec);
  if (spec == "metrics-only") return validate_weights(1.0, 0.0, 0.0, spec);

  std::array<double, 3> w{};
  std::istringstream in(spec);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ',')) {
    if (i >= 3) throw WeightRangeError("weight profile '" + spec + "' has more than three parts");
    try {
      std::size_t used = 0;
      w[i] = std::stod(part, &used);
      if (part.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw WeightRangeError("unknown weight profile '" + spec + "'");
    }
    ++i;
  }
  if (i != 3) throw WeightRangeError("unknown weight profile '" + spec + "'");
  return validate_weights(w[0], w[1], w[2], spec);
}

OverheadVector make_overhead_vector(double cpu_pct, double mem_pct, double net_pct) {
  for (double x : {cpu_pct, mem_pct, net_pct}) {
    if (!(x >= 0.0 && x <= 100.0)) throw InvalidRecord("overhead percentage outside [0, 100]");
  }
  return OverheadVector{cpu_pct, mem_pct, net_pct};
}

OverheadScore OverheadScore::of(double value) {
  if (!(value <= 100.0)) throw InvalidRecord("overhead score above 100");
  return OverheadScore(std::max(value, kOverheadFloor));
}

CorrelationWindow make_window(std::int64_t start, std::int64_t end,
                              std::optional<std::set<std::string>> devices) {
  if (start >= end) throw InvalidRange("window start must precede end");
  return CorrelationWindow{start, end, std::move(devices)};
}

OverheadScore overhead_score(const OverheadVector& v) {
  return OverheadScore::of(std::max({v.cpu_pct, v.mem_pct, v.net_pct}));
}

CorrelationScore correlation_score(const DomainCounts& counts_per_domain) {
  int occupied = 0;
  for (Domain d : kDomains) {
    auto it = counts_per_domain.find(d);
    if (it != counts_per_domain.end() && it->second > 0) ++occupied;
  }
  CorrelationScore s;
  s.occupied_domains = occupied;
  s.score = occupied <= 1 ? 0.0
                          : static_cast<double>(occupied - 1) / static_cast<double>(kDomainCount - 1);
  return s;
}

OutcomeReport outcome(const WeightProfile& w, OverheadScore over_m, OverheadScore over_l,
                      OverheadScore over_t, const CorrelationScore& x, OverheadScore over_x) {
  OutcomeReport r{w, over_m, over_l, over_t, over_x, x, 0.0, 0.0, 0.0};
  r.collection_term = w.w_metric() / over_m.value() + w.w_log() / over_l.value() +
                      w.w_trace() / over_t.value();
  r.analysis_term = x.score / over_x.value();
  r.outcome = r.collection_term + r.analysis_term;
  return r;
}

std::uint64_t project_volume(std::uint64_t payload_bytes, double interval_seconds,
                             double duration_hours, std::uint64_t device_count) {
  if (!(interval_seconds > 0.0) || !std::isfinite(interval_seconds))
    throw InvalidInterval("interval_seconds must be positive");
  if (!(duration_hours > 0.0)) throw InvalidInterval("duration_hours must be positive");
  const auto emissions = static_cast<std::uint64_t>(std::floor(duration_hours * 3600.0 / interval_seconds));
  return payload_bytes * emissions * device_count;
}

double batch_priority(Domain domain, const WeightProfile& w, OverheadScore over) {
  const double weight = w.weight(domain);
  if (weight == 0.0) return 0.0;
  return weight / over.value();
}

}  // namespace odlc
