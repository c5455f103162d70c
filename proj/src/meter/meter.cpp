#include "odlc/meter/meter.hpp"

#include <time.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "odlc/core/errors.hpp"
#include "odlc/util/log.hpp"

namespace odlc::meter {

void MeterBudget::validate() const {
  if (!(cores > 0) || !(mem_bytes > 0) || !(link_bytes_per_s > 0))
    throw ConfigError("meter budget fields must be positive");
}

ResourceSample normalize(const std::string& component, const RawUsage& raw, std::int64_t window_start_ms,
                         std::int64_t window_end_ms, const MeterBudget& budget) {
  if (window_end_ms <= window_start_ms) throw InvalidRange("sampling window must have positive length");
  const double window_s = static_cast<double>(window_end_ms - window_start_ms) / 1000.0;
  ResourceSample s;
  s.component = component;
  s.window_start_ms = window_start_ms;
  s.timestamp_ms = window_end_ms;
  s.raw = raw;
  s.cpu_pct = std::clamp(raw.cpu_core_seconds / window_s / budget.cores * 100.0, 0.0, 100.0);
  s.mem_pct = std::clamp(raw.mem_bytes / budget.mem_bytes * 100.0, 0.0, 100.0);
  s.net_pct = std::clamp(raw.net_bytes / (budget.link_bytes_per_s * window_s) * 100.0, 0.0, 100.0);
  return s;
}

std::string MeterReport::to_text() const {
  nlohmann::ordered_json j;
  j["budget"] = {{"cores", budget.cores}, {"mem_bytes", budget.mem_bytes}, {"link_bytes_per_s", budget.link_bytes_per_s}};
  j["window_ms"] = window_ms;
  j["series"] = nlohmann::ordered_json::object();
  for (const auto& [c, samples] : series) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : samples) {
      arr.push_back({{"start", s.window_start_ms},
                     {"end", s.timestamp_ms},
                     {"cpu_core_seconds", s.raw.cpu_core_seconds},
                     {"mem_bytes", s.raw.mem_bytes},
                     {"net_bytes", s.raw.net_bytes},
                     {"cpu_pct", s.cpu_pct},
                     {"mem_pct", s.mem_pct},
                     {"net_pct", s.net_pct}});
    }
    j["series"][c] = arr;
  }
  j["gaps"] = nlohmann::ordered_json::array();
  for (const auto& g : gaps)
    j["gaps"].push_back({{"component", g.component}, {"start", g.window_start_ms}, {"end", g.window_end_ms}, {"reason", g.reason}});
  return j.dump();
}

MeterReport MeterReport::from_text(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MeterReport r;
    const auto& b = j.at("budget");
    r.budget = MeterBudget{b.at("cores").get<double>(), b.at("mem_bytes").get<double>(),
                           b.at("link_bytes_per_s").get<double>()};
    r.window_ms = j.at("window_ms").get<std::int64_t>();
    for (const auto& [c, arr] : j.at("series").items()) {
      auto& out = r.series[c];
      for (const auto& s : arr) {
        ResourceSample x;
        x.component = c;
        x.window_start_ms = s.at("start").get<std::int64_t>();
        x.timestamp_ms = s.at("end").get<std::int64_t>();
        x.raw = RawUsage{s.at("cpu_core_seconds").get<double>(), s.at("mem_bytes").get<double>(),
                         s.at("net_bytes").get<double>()};
        x.cpu_pct = s.at("cpu_pct").get<double>();
        x.mem_pct = s.at("mem_pct").get<double>();
        x.net_pct = s.at("net_pct").get<double>();
        out.push_back(std::move(x));
      }
    }
    if (auto it = j.find("gaps"); it != j.end()) {
      for (const auto& g : *it)
        r.gaps.push_back(SampleGap{g.at("component").get<std::string>(), g.at("start").get<std::int64_t>(),
                                   g.at("end").get<std::int64_t>(), g.at("reason").get<std::string>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError(std::string("bad meter report: ") + e.what());
  }
}

OverheadVector overhead_of(const MeterReport& report, const std::string& component, std::int64_t start,
                           std::int64_t end) {
  auto it = report.series.find(component);
  double cpu = 0, mem = 0, net = 0;
  std::size_t n = 0;
  if (it != report.series.end()) {
    for (const auto& s : it->second) {
      if (s.timestamp_ms < start || s.timestamp_ms > end) continue;
      cpu += s.cpu_pct;
      mem += s.mem_pct;
      net += s.net_pct;
      ++n;
    }
  }
  if (n == 0) throw NoSamples("no samples for '" + component + "' in the requested range");
  const double k = static_cast<double>(n);
  return make_overhead_vector(std::min(100.0, cpu / k), std::min(100.0, mem / k), std::min(100.0, net / k));
}

ResourceSampler::ResourceSampler(MeterBudget budget, std::int64_t window_ms) : window_ms_(window_ms) {
  budget.validate();
  if (window_ms <= 0) throw ConfigError("sampling window must be positive");
  report_.budget = budget;
  report_.window_ms = window_ms;
}

std::optional<ResourceSample> ResourceSampler::sample_component(const std::string& component, AccountingSource& source,
                                                                std::int64_t window_start_ms,
                                                                std::int64_t window_end_ms) {
  try {
    auto s = normalize(component, source.usage(component, window_start_ms, window_end_ms), window_start_ms,
                       window_end_ms, report_.budget);
    std::lock_guard lock(mu_);
    report_.series[component].push_back(s);
    return s;
  } catch (const AccountingUnavailable& e) {
    std::lock_guard lock(mu_);
    report_.gaps.push_back(SampleGap{component, window_start_ms, window_end_ms, e.what()});
    return std::nullopt;
  }
}

MeterReport ResourceSampler::report() const {
  std::lock_guard lock(mu_);
  return report_;
}

void InjectedAccounting::inject(const std::string& component, std::int64_t window_end_ms, RawUsage u) {
  std::lock_guard lock(mu_);
  injected_[{component, window_end_ms}] = u;
}

RawUsage InjectedAccounting::usage(const std::string& component, std::int64_t, std::int64_t window_end_ms) {
  std::lock_guard lock(mu_);
  auto it = injected_.find({component, window_end_ms});
  if (it == injected_.end()) throw AccountingUnavailable("nothing injected for '" + component + "'");
  return it->second;
}

void CounterAccounting::charge_cpu(const std::string& component, double core_seconds) {
  std::lock_guard lock(mu_);
  pending_[component].cpu_core_seconds += core_seconds;
}

void CounterAccounting::charge_net(const std::string& component, double bytes) {
  std::lock_guard lock(mu_);
  pending_[component].net_bytes += bytes;
}

void CounterAccounting::set_memory(const std::string& component, double bytes) {
  std::lock_guard lock(mu_);
  pending_[component].mem_bytes = bytes;
}

RawUsage CounterAccounting::usage(const std::string& component, std::int64_t, std::int64_t) {
  std::lock_guard lock(mu_);
  auto it = pending_.find(component);
  if (it == pending_.end()) throw AccountingUnavailable("component '" + component + "' never reported");
  RawUsage out = it->second;
  it->second.cpu_core_seconds = 0;
  it->second.net_bytes = 0;
  return out;
}

ProcAccounting::ProcAccounting(std::filesystem::path proc_root)
    : root_(std::move(proc_root)),
      ticks_per_s_(static_cast<double>(::sysconf(_SC_CLK_TCK))),
      page_bytes_(static_cast<double>(::sysconf(_SC_PAGESIZE))) {}

void ProcAccounting::charge_net(double bytes) {
  std::lock_guard lock(mu_);
  net_pending_ += bytes;
}

double ProcAccounting::cpu_seconds_total() const {
  std::ifstream in(root_ / "stat");
  std::string line;
  if (!in || !std::getline(in, line)) throw AccountingUnavailable("cannot read " + (root_ / "stat").string());
  // Fields after the parenthesized command name; utime and stime are 14 and 15.
  const auto close = line.rfind(')');
  if (close == std::string::npos) throw AccountingUnavailable("unexpected stat format");
  std::istringstream ss(line.substr(close + 2));
  std::string tok;
  double utime = 0, stime = 0;
  for (int field = 3; ss >> tok; ++field) {
    if (field == 14) utime = std::stod(tok);
    if (field == 15) {
      stime = std::stod(tok);
      break;
    }
  }
  return (utime + stime) / ticks_per_s_;
}

double ProcAccounting::rss_bytes() const {
  std::ifstream in(root_ / "statm");
  double size = 0, resident = 0;
  if (!(in >> size >> resident)) throw AccountingUnavailable("cannot read " + (root_ / "statm").string());
  return resident * page_bytes_;
}

RawUsage ProcAccounting::usage(const std::string&, std::int64_t, std::int64_t) {
  const double cpu = cpu_seconds_total();
  const double rss = rss_bytes();
  std::lock_guard lock(mu_);
  RawUsage u;
  u.cpu_core_seconds = last_cpu_ ? std::max(0.0, cpu - *last_cpu_) : 0.0;
  last_cpu_ = cpu;
  u.mem_bytes = rss;
  u.net_bytes = net_pending_;
  net_pending_ = 0;
  return u;
}

double thread_cpu_seconds() {
  timespec ts{};
  ::clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
}

double online_cores() {
  const long n = ::sysconf(_SC_NPROCESSORS_ONLN);
  return n > 0 ? static_cast<double>(n) : 1.0;
}

OutcomeReport compose_outcome(const MeterReport& report, const WeightProfile& w, const CorrelationWindow& window,
                              CorrelationSource& fog, const ComponentMap& map) {
  auto term = [&](Domain d, const std::string& component) {
    if (!w.enabled(d)) {
      try {
        return overhead_score(overhead_of(report, component, window.start, window.end));
      } catch (const NoSamples&) {
        return OverheadScore::of(0.0);
      }
    }
    return overhead_score(overhead_of(report, component, window.start, window.end));
  };
  const auto over_m = term(Domain::Metric, map.metric);
  const auto over_l = term(Domain::Log, map.log);
  const auto over_t = term(Domain::Trace, map.trace);
  std::optional<OverheadScore> over_x;
  for (const auto& c : map.analysis) {
    try {
      const auto s = overhead_score(overhead_of(report, c, window.start, window.end));
      if (!over_x || s.value() > over_x->value()) over_x = s;
    } catch (const NoSamples&) {
    }
  }
  if (!over_x) throw NoSamples("no fog or archive samples in the window");
  return outcome(w, over_m, over_l, over_t, fog.correlation(window), *over_x);
}

nlohmann::json outcome_json(const OutcomeReport& r) {
  return {{"weights", r.weights.name()},
          {"w_metric", r.weights.w_metric()},
          {"w_log", r.weights.w_log()},
          {"w_trace", r.weights.w_trace()},
          {"over_metric", r.over_metric.value()},
          {"over_log", r.over_log.value()},
          {"over_trace", r.over_trace.value()},
          {"over_x", r.over_x.value()},
          {"occupied_domains", r.x_score.occupied_domains},
          {"x_score", r.x_score.score},
          {"collection_term", r.collection_term},
          {"analysis_term", r.analysis_term},
          {"outcome", r.outcome}};
}

}  // namespace odlc::meter
