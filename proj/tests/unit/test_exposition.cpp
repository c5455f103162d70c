#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "odlc/core/errors.hpp"
#include "odlc/exposition/exposition.hpp"
#include "odlc/harness/workload.hpp"

namespace odlc::exposition {
namespace {

constexpr const char* kMixed =
    "# HELP node_cpu_seconds_total Seconds the CPUs spent in each mode.\n"
    "# TYPE node_cpu_seconds_total counter\n"
    "node_cpu_seconds_total{cpu=\"0\",mode=\"idle\"} 1234.5\n"
    "node_cpu_seconds_total{cpu=\"0\",mode=\"user\"} 99\n"
    "# HELP node_memory_MemFree_bytes Memory information field MemFree_bytes.\n"
    "# TYPE node_memory_MemFree_bytes gauge\n"
    "node_memory_MemFree_bytes 1.2e+09\n"
    "# HELP go_goroutines Number of goroutines that currently exist.\n"
    "# TYPE go_goroutines gauge\n"
    "go_goroutines 12\n"
    "# HELP http_request_duration_seconds Request latency.\n"
    "# TYPE http_request_duration_seconds histogram\n"
    "http_request_duration_seconds_bucket{le=\"0.1\"} 3\n"
    "http_request_duration_seconds_bucket{le=\"+Inf\"} 5\n"
    "http_request_duration_seconds_sum 0.7\n"
    "http_request_duration_seconds_count 5\n";

TEST(ExpositionParseTest, MinimalDocument) {
  const auto doc = parse_exposition("# HELP up 1 if up\n# TYPE up gauge\nup 1\n");
  ASSERT_EQ(doc.families.size(), 1u);
  EXPECT_EQ(doc.families[0].name, "up");
  EXPECT_EQ(doc.families[0].help, "1 if up");
  EXPECT_EQ(doc.families[0].kind, MetricKind::Gauge);
  ASSERT_EQ(doc.families[0].samples.size(), 1u);
  EXPECT_EQ(doc.families[0].samples[0].value, 1.0);
}

TEST(ExpositionParseTest, EmptyInput) {
  const auto doc = parse_exposition("");
  EXPECT_TRUE(doc.families.empty());
  EXPECT_EQ(doc.raw_size_bytes, 0u);
}

TEST(ExpositionParseTest, MalformedValueReportsLine) {
  try {
    parse_exposition("cpu{mode=\"idle\"} abc\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  try {
    parse_exposition("up 1\nup{a=\"1\" 2\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(ExpositionParseTest, SpecialValuesTimestampsAndEscapes) {
  const auto doc = parse_exposition(
      "a NaN\n"
      "b +Inf 1700000000000\n"
      "c{path=\"C:\\\\x\",msg=\"say \\\"hi\\\"\\n\"} -Inf\n");
  ASSERT_EQ(doc.families.size(), 3u);
  EXPECT_TRUE(std::isnan(doc.families[0].samples[0].value));
  EXPECT_EQ(doc.families[1].samples[0].value, HUGE_VAL);
  EXPECT_EQ(doc.families[1].samples[0].timestamp_ms, 1700000000000);
  const auto& labels = doc.families[2].samples[0].labels;
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels[0], (std::pair<std::string, std::string>{"msg", "say \"hi\"\n"}));
  EXPECT_EQ(labels[1].second, "C:\\x");
  EXPECT_EQ(doc.families[2].samples[0].value, -HUGE_VAL);
}

TEST(ExpositionParseTest, HistogramSuffixesJoinFamily) {
  const auto doc = parse_exposition(kMixed);
  ASSERT_EQ(doc.families.size(), 4u);
  EXPECT_EQ(doc.families[3].samples.size(), 4u);
  for (const auto& f : doc.families)
    for (const auto& s : f.samples) EXPECT_EQ(s.name.rfind(f.name, 0), 0u);
}

TEST(ExpositionEncodeTest, CanonicalRoundTrip) {
  const auto doc = parse_exposition(kMixed);
  const auto out = encode_exposition(doc, ReductionPolicy::keep_all());
  EXPECT_EQ(out, kMixed);
  EXPECT_EQ(out.size(), doc.raw_size_bytes);
}

TEST(ExpositionEncodeTest, GeneratedCorpusRoundTrip) {
  for (std::uint64_t seed : {1, 2, 3}) {
    harness::ExpositionCorpus corpus({65 * 1024, seed, 0.22});
    for (std::uint64_t e : {0, 1, 17}) {
      const auto text = corpus.emit(e);
      const auto doc = parse_exposition(text);
      EXPECT_EQ(encode_exposition(doc, ReductionPolicy::keep_all()), text);
      EXPECT_EQ(doc.raw_size_bytes, text.size());
    }
  }
}

TEST(ExpositionEncodeTest, StripHelpAndAllowlist) {
  const auto doc = parse_exposition(kMixed);
  ReductionPolicy p;
  p.strip_help = true;
  const auto no_help = encode_exposition(doc, p);
  EXPECT_EQ(no_help.find("# HELP"), std::string::npos);
  EXPECT_NE(no_help.find("# TYPE"), std::string::npos);

  p.family_allowlist = std::vector<std::string>{"node_cpu", "node_memory"};
  const auto reduced = parse_exposition(encode_exposition(doc, p));
  ASSERT_EQ(reduced.families.size(), 2u);
  EXPECT_EQ(reduced.families[0].name, "node_cpu_seconds_total");
  EXPECT_EQ(reduced.families[1].name, "node_memory_MemFree_bytes");

  p.family_allowlist = std::vector<std::string>{};
  EXPECT_TRUE(encode_exposition(doc, p).empty());

  ReductionPolicy t;
  t.strip_type = true;
  const auto untyped = parse_exposition(encode_exposition(doc, t));
  EXPECT_FALSE(untyped.families[0].kind.has_value());
}

TEST(ExpositionReductionTest, IdentityPolicyIsZero) {
  const auto doc = parse_exposition(kMixed);
  EXPECT_DOUBLE_EQ(estimate_reduction(doc, ReductionPolicy::keep_all(), 5.0).ratio, 0.0);
  ReductionPolicy bad;
  bad.interval_scale = 0.5;
  EXPECT_THROW(estimate_reduction(doc, bad, 5.0), InvalidInterval);
  EXPECT_THROW(estimate_reduction(doc, {}, 0.0), InvalidInterval);
}

TEST(ExpositionReductionTest, IntervalLaw) {
  const auto doc = parse_exposition(harness::ExpositionCorpus().emit(0));
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    ReductionPolicy p;
    p.strip_help = rng() % 2;
    p.strip_type = rng() % 2;
    if (rng() % 2) p.family_allowlist = std::vector<std::string>{"node_cpu", "go_"};
    const auto one = estimate_reduction(doc, p, 5.0);
    p.interval_scale = 2.0;
    const auto two = estimate_reduction(doc, p, 5.0);
    EXPECT_DOUBLE_EQ(two.bytes_after * 2.0, one.bytes_after);
    EXPECT_DOUBLE_EQ(two.bytes_per_hour_after * 2.0, one.bytes_per_hour_after);
  }
}

TEST(ExpositionReductionTest, Monotonicity) {
  const auto doc = parse_exposition(harness::ExpositionCorpus().emit(0));
  const std::vector<std::string> prefixes{"node_cpu", "node_memory", "node_disk", "node_network", "go_",
                                          "node_filesystem", "process_", "node_power_supply"};
  std::mt19937_64 rng(21);
  for (int i = 0; i < 50; ++i) {
    std::vector<std::string> allow;
    for (const auto& p : prefixes)
      if (rng() % 2) allow.push_back(p);
    ReductionPolicy p;
    p.family_allowlist = allow;
    const double before = estimate_reduction(doc, p, 5.0).bytes_after;
    auto wider = allow;
    wider.push_back(prefixes[rng() % prefixes.size()]);
    p.family_allowlist = wider;
    EXPECT_GE(estimate_reduction(doc, p, 5.0).bytes_after, before);

    p.family_allowlist = allow;
    p.strip_help = true;
    EXPECT_LE(estimate_reduction(doc, p, 5.0).bytes_after, before);
  }
}

TEST(ExpositionFormatTest, ValueFormatting) {
  EXPECT_EQ(format_value(1.0), "1");
  EXPECT_EQ(format_value(0.1), "0.1");
  EXPECT_EQ(format_value(std::nan("")), "NaN");
  EXPECT_EQ(format_value(HUGE_VAL), "+Inf");
  EXPECT_EQ(format_value(-HUGE_VAL), "-Inf");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1e12, 1e12);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    EXPECT_EQ(std::stod(format_value(v)), v);
  }
}

}  // namespace
}  // namespace odlc::exposition
