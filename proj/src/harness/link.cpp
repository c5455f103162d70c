#include "odlc/harness/link.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "odlc/core/errors.hpp"
#include "odlc/util/kv_config.hpp"

namespace odlc::harness {

namespace {

std::vector<LinkInterval> coalesce(std::vector<LinkInterval> in) {
  std::vector<LinkInterval> out;
  for (auto& iv : in) {
    if (iv.end_ms <= iv.start_ms) continue;
    if (!out.empty() && out.back().available == iv.available &&
        out.back().bandwidth_bytes_per_s == iv.bandwidth_bytes_per_s && out.back().end_ms == iv.start_ms) {
      out.back().end_ms = iv.end_ms;
      continue;
    }
    out.push_back(iv);
  }
  return out;
}

}  // namespace

LinkSchedule::LinkSchedule(std::vector<LinkInterval> intervals) : intervals_(std::move(intervals)) {
  if (intervals_.empty()) throw ScenarioConfigError("link schedule has no intervals");
  std::int64_t expect = 0;
  for (auto& iv : intervals_) {
    if (iv.start_ms != expect)
      throw ScenarioConfigError(fmt::format("link schedule gap or overlap at {} ms", iv.start_ms));
    if (iv.end_ms <= iv.start_ms) throw ScenarioConfigError("link interval must have positive length");
    if (!(iv.bandwidth_bytes_per_s >= 0.0) || !std::isfinite(iv.bandwidth_bytes_per_s))
      throw ScenarioConfigError("link bandwidth must be non-negative");
    if (!iv.available) iv.bandwidth_bytes_per_s = 0.0;
    expect = iv.end_ms;
  }
}

LinkSchedule LinkSchedule::always_up(std::int64_t duration_ms, double bandwidth_bytes_per_s) {
  return LinkSchedule({LinkInterval{0, std::max<std::int64_t>(duration_ms, 1), true, bandwidth_bytes_per_s}});
}

LinkSchedule LinkSchedule::parse(std::string_view text, double default_bandwidth) {
  std::vector<LinkInterval> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ls(t);
    double start = 0, end = 0;
    std::string state;
    if (!(ls >> start >> end >> state) || (state != "up" && state != "down"))
      throw ScenarioConfigError(fmt::format("schedule line {}: expected `<start_s> <end_s> up|down [bandwidth]`",
                                            lineno));
    double bw = default_bandwidth;
    if (std::string extra; ls >> extra) {
      try {
        bw = std::stod(extra);
      } catch (const std::exception&) {
        throw ScenarioConfigError(fmt::format("schedule line {}: bad bandwidth '{}'", lineno, extra));
      }
    }
    out.push_back(LinkInterval{static_cast<std::int64_t>(std::llround(start * 1000)),
                               static_cast<std::int64_t>(std::llround(end * 1000)), state == "up",
                               state == "up" ? bw : 0.0});
  }
  return LinkSchedule(std::move(out));
}

std::string LinkSchedule::to_text() const {
  std::string out;
  for (const auto& iv : intervals_) {
    out += fmt::format("{} {} {}", static_cast<double>(iv.start_ms) / 1000.0, static_cast<double>(iv.end_ms) / 1000.0,
                       iv.available ? "up" : "down");
    if (iv.available) out += fmt::format(" {}", iv.bandwidth_bytes_per_s);
    out.push_back('\n');
  }
  return out;
}

const LinkInterval& LinkSchedule::at(std::int64_t t_ms) const {
  auto it = std::upper_bound(intervals_.begin(), intervals_.end(), t_ms,
                             [](std::int64_t t, const LinkInterval& iv) { return t < iv.end_ms; });
  return it == intervals_.end() ? intervals_.back() : *it;
}

double LinkSchedule::availability() const {
  std::int64_t up = 0;
  for (const auto& iv : intervals_) up += iv.available ? iv.end_ms - iv.start_ms : 0;
  return static_cast<double>(up) / static_cast<double>(end_ms());
}

LinkSchedule inject_outage(const LinkSchedule& schedule, std::int64_t at_ms, std::int64_t duration_ms) {
  if (at_ms < 0 || duration_ms < 0 || at_ms + duration_ms > schedule.end_ms())
    throw OutOfRange(fmt::format("outage [{}, {}) ms outside schedule [0, {}) ms", at_ms, at_ms + duration_ms,
                                 schedule.end_ms()));
  if (duration_ms == 0) return schedule;
  const std::int64_t end = at_ms + duration_ms;
  std::vector<LinkInterval> out;
  for (const auto& iv : schedule.intervals()) {
    if (iv.end_ms <= at_ms || iv.start_ms >= end) {
      out.push_back(iv);
      continue;
    }
    if (iv.start_ms < at_ms) out.push_back(LinkInterval{iv.start_ms, at_ms, iv.available, iv.bandwidth_bytes_per_s});
    out.push_back(LinkInterval{std::max(iv.start_ms, at_ms), std::min(iv.end_ms, end), false, 0.0});
    if (iv.end_ms > end) out.push_back(LinkInterval{end, iv.end_ms, iv.available, iv.bandwidth_bytes_per_s});
  }
  return LinkSchedule(coalesce(std::move(out)));
}

LinkSchedule random_schedule(std::mt19937_64& rng, std::int64_t duration_ms, double bandwidth_bytes_per_s,
                             double mean_up_s, double mean_down_s) {
  std::exponential_distribution<double> up(1.0 / mean_up_s);
  std::exponential_distribution<double> down(1.0 / mean_down_s);
  std::bernoulli_distribution start_up(0.5);
  std::vector<LinkInterval> out;
  bool state = start_up(rng);
  std::int64_t t = 0;
  while (t < duration_ms) {
    const double len_s = state ? up(rng) : down(rng);
    const std::int64_t end = std::min(duration_ms, t + std::max<std::int64_t>(1000, std::llround(len_s * 1000)));
    out.push_back(LinkInterval{t, end, state, state ? bandwidth_bytes_per_s : 0.0});
    t = end;
    state = !state;
  }
  return LinkSchedule(std::move(out));
}

}  // namespace odlc::harness
