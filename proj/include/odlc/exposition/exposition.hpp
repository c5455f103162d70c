#pragma once

// Metrics text exposition format: `# HELP` / `# TYPE` comment lines followed
// by `name{k="v",...} value [timestamp]` sample lines.
//
// Canonical form: HELP, then TYPE, then the family's samples; labels sorted by
// key; one sample per line; `\n` terminators; no trailing whitespace. Parsing a
// canonical document and encoding it with the keep-all policy is byte-exact.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "odlc/core/record.hpp"

namespace odlc::exposition {

enum class MetricKind { Counter, Gauge, Histogram, Summary, Untyped };

std::string_view kind_name(MetricKind k) noexcept;
std::optional<MetricKind> parse_kind(std::string_view s) noexcept;

struct Sample {
  std::string name;  // family name, or family name + _bucket/_sum/_count
  Labels labels;
  double value = 0.0;
  std::optional<std::int64_t> timestamp_ms;
};

struct MetricFamily {
  std::string name;
  std::optional<std::string> help;
  std::optional<MetricKind> kind;  // absent when the document has no TYPE line
  std::vector<Sample> samples;

  MetricKind effective_kind() const noexcept { return kind.value_or(MetricKind::Untyped); }
};

struct ExpositionDocument {
  std::vector<MetricFamily> families;
  std::size_t raw_size_bytes = 0;  // byte length of the parsed input
};

struct ReductionPolicy {
  bool strip_help = false;
  bool strip_type = false;
  // Absent keeps every family; present (even empty) keeps only families whose
  // name starts with one of the prefixes.
  std::optional<std::vector<std::string>> family_allowlist;
  double interval_scale = 1.0;

  static ReductionPolicy keep_all() { return {}; }
  bool admits(std::string_view family_name) const;
  // Throws InvalidInterval when interval_scale < 1.
  void validate() const;
};

struct ReductionReport {
  std::size_t bytes_before = 0;
  double bytes_after = 0.0;  // per scrape-equivalent, after interval scaling
  double ratio = 0.0;
  double bytes_per_hour_before = 0.0;
  double bytes_per_hour_after = 0.0;
};

ExpositionDocument parse_exposition(std::string_view input);
std::string encode_exposition(const ExpositionDocument& doc, const ReductionPolicy& policy);
// Appends one family (its HELP/TYPE/sample lines under `policy`) to `out`.
// The allowlist is not consulted here.
void encode_family(const MetricFamily& family, const ReductionPolicy& policy, std::string& out);
void encode_sample(const Sample& sample, std::string& out);
ReductionReport estimate_reduction(const ExpositionDocument& doc, const ReductionPolicy& policy,
                                   double base_interval_s);

// Shortest round-trip decimal; NaN, +Inf and -Inf spelled as in the format.
std::string format_value(double v);

// Families surviving `policy`, in document order.
std::vector<const MetricFamily*> admitted_families(const ExpositionDocument& doc,
                                                   const ReductionPolicy& policy);

}  // namespace odlc::exposition
