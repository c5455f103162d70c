#include <gtest/gtest.h>

#include <random>

#include "odlc/core/errors.hpp"
#include "odlc/edge/wire.hpp"
#include "odlc/harness/scenario.hpp"
#include "test_util.hpp"

namespace odlc::harness {
namespace {

ScenarioConfig short_run(double duration_s = 60.0) {
  ScenarioConfig cfg;
  cfg.workload.duration_s = duration_s;
  cfg.workload.seed = 3;
  return cfg;
}

void expect_conserved(const ScenarioResult& r) {
  std::uint64_t ingested = 0;
  for (Domain d : kDomains) {
    const auto t = r.total(d);
    EXPECT_EQ(t.generated_records, t.staged_records + t.admission_failures) << domain_name(d);
    EXPECT_EQ(t.staged_records, t.ingested_records + t.evicted_records) << domain_name(d);
    ingested += t.ingested_records;
  }
  EXPECT_EQ(r.fog_records + r.archive_records, ingested);
}

TEST(LinkScheduleTest, ParseAndFormat) {
  const auto s = LinkSchedule::parse("# outage drill\n0 10 up\n10 20 down\n20 30 up 500\n", 1000);
  ASSERT_EQ(s.intervals().size(), 3u);
  EXPECT_EQ(s.intervals()[0], (LinkInterval{0, 10'000, true, 1000}));
  EXPECT_EQ(s.intervals()[1], (LinkInterval{10'000, 20'000, false, 0}));
  EXPECT_EQ(s.intervals()[2].bandwidth_bytes_per_s, 500);
  EXPECT_EQ(LinkSchedule::parse(s.to_text(), 1), s);
  EXPECT_NEAR(s.availability(), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(s.at(15'000).available, false);
  EXPECT_EQ(s.at(99'000).start_ms, 20'000);
  EXPECT_THROW(LinkSchedule::parse("0 10 up\n12 20 up\n", 1), ScenarioConfigError);
  EXPECT_THROW(LinkSchedule::parse("5 10 up\n", 1), ScenarioConfigError);
  EXPECT_THROW(LinkSchedule::parse("0 10 sideways\n", 1), ScenarioConfigError);
}

TEST(LinkScheduleTest, InjectOutage) {
  const auto base = LinkSchedule::always_up(60'000, 1000);
  EXPECT_EQ(inject_outage(base, 10'000, 0), base);
  const auto once = inject_outage(base, 10'000, 20'000);
  ASSERT_EQ(once.intervals().size(), 3u);
  EXPECT_EQ(once.intervals()[1], (LinkInterval{10'000, 30'000, false, 0}));
  // Overlapping outages coalesce into one down interval.
  const auto twice = inject_outage(once, 25'000, 10'000);
  ASSERT_EQ(twice.intervals().size(), 3u);
  EXPECT_EQ(twice.intervals()[1], (LinkInterval{10'000, 35'000, false, 0}));
  const auto whole = inject_outage(base, 0, 60'000);
  ASSERT_EQ(whole.intervals().size(), 1u);
  EXPECT_DOUBLE_EQ(whole.availability(), 0.0);
  EXPECT_THROW(inject_outage(base, 50'000, 20'000), OutOfRange);
  EXPECT_THROW(inject_outage(base, -1, 5), OutOfRange);
}

TEST(LinkScheduleTest, RandomSchedulesCoverTheRun) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto s = random_schedule(rng, 600'000, 1e6, 60, 30);
    EXPECT_EQ(s.intervals().front().start_ms, 0);
    EXPECT_EQ(s.end_ms(), 600'000);
    for (std::size_t k = 1; k < s.intervals().size(); ++k) {
      EXPECT_EQ(s.intervals()[k].start_ms, s.intervals()[k - 1].end_ms);
      EXPECT_NE(s.intervals()[k].available, s.intervals()[k - 1].available);
    }
  }
}

TEST(WorkloadTest, GeneratorsHitTheirSizes) {
  LogGenerator logs("dev-1", 9, 1024);
  for (int i = 0; i < 50; ++i) {
    const auto line = logs.next_line(1'000'000 + i);
    EXPECT_EQ(line.size(), 1024u);
    EXPECT_EQ(line.back(), '\n');
    EXPECT_NE(line.find("lat="), std::string::npos);
  }
  TraceGenerator traces("dev-1", 9, 4096);
  for (int i = 0; i < 20; ++i) {
    const auto spans = traces.next_trace(1'000'000'000 + i);
    std::size_t bytes = 0;
    for (const auto& s : spans) bytes += ObservabilityRecord(s).encoded_size();
    EXPECT_EQ(bytes, 4096u);
    EXPECT_FALSE(spans.front().parent_span_id.has_value());
  }
  ExpositionCorpus corpus;
  for (std::uint64_t e : {0, 7, 1000}) {
    const auto n = static_cast<double>(corpus.emit(e).size());
    EXPECT_LE(n, 65.0 * 1024);
    EXPECT_GE(n, 0.99 * 65 * 1024);
  }
  EXPECT_NE(corpus.emit(0), corpus.emit(1));
}

TEST(WorkloadTest, ObservabilityRate) {
  WorkloadSpec w;
  EXPECT_NEAR(w.observability_rate(), 65.0 * 1024 / 5 + 1024 + 4096.0 / 15, 1e-9);
  EXPECT_NEAR(w.effective_payload_rate(), kPayloadToObservability * w.observability_rate(), 1e-9);
  w.payload_bytes_per_s = 5;
  EXPECT_DOUBLE_EQ(w.effective_payload_rate(), 5);
  w.metric_interval_s = 0;
  EXPECT_THROW(w.validate(), ScenarioConfigError);
}

TEST(ScenarioTest, DeterministicForSeed) {
  const auto cfg = short_run();
  const auto link = inject_outage(LinkSchedule::always_up(60'000, 1.25e6), 20'000, 15'000);
  const auto a = run_scenario(cfg, link);
  const auto b = run_scenario(cfg, link);
  for (Domain d : kDomains) {
    EXPECT_EQ(a.total(d).generated_wire_bytes, b.total(d).generated_wire_bytes);
    EXPECT_EQ(a.total(d).ingested_records, b.total(d).ingested_records);
  }
  EXPECT_EQ(a.frames_sent, b.frames_sent);
  EXPECT_EQ(a.plot_data(), b.plot_data());
}

TEST(ScenarioTest, AmpleStagingLosesNothingThroughOutage) {
  auto cfg = short_run();
  cfg.workload.devices = 2;
  const auto link = inject_outage(LinkSchedule::always_up(60'000, 1.25e6), 0, 30'000);
  Scenario s(cfg, link);
  const auto r = s.run();
  EXPECT_TRUE(r.drained);
  EXPECT_NEAR(LinkSchedule(r.link).availability(), 0.5, 1e-12);
  expect_conserved(r);
  for (Domain d : kDomains) {
    EXPECT_EQ(r.total(d).evicted_records, 0u);
    EXPECT_EQ(r.total(d).admission_failures, 0u);
    EXPECT_GT(r.total(d).ingested_records, 0u);
  }
  EXPECT_TRUE(r.outcome.has_value()) << r.outcome_error;
  EXPECT_GT(r.archive_records, 0u);
}

TEST(ScenarioTest, SmallStagingEvictsByWeightThenAge) {
  auto cfg = short_run(120);
  cfg.staging.capacity_bytes = 256 * 1024;
  cfg.audit_evictions = true;
  cfg.weights = weight_profile("incident");
  const auto link = inject_outage(LinkSchedule::always_up(120'000, 1.25e6), 10'000, 100'000);
  const auto r = run_scenario(cfg, link);
  EXPECT_GT(r.evictions_audited, 0u);
  EXPECT_TRUE(r.eviction_violations.empty()) << r.eviction_violations.front();
  expect_conserved(r);
}

TEST(ScenarioTest, DroppedAcksAreIdempotent) {
  auto cfg = short_run();
  cfg.ack_drop_probability = 0.3;
  cfg.keep_frames = true;
  Scenario s(cfg, LinkSchedule::always_up(60'000, 1.25e6));
  const auto r = s.run();
  EXPECT_TRUE(r.drained);
  EXPECT_GT(r.acks_dropped, 0u);
  std::uint64_t dups = 0;
  for (Domain d : kDomains) dups += r.total(d).duplicate_records;
  EXPECT_GT(dups, 0u);
  expect_conserved(r);
  const auto before = s.fog().record_count();
  for (const auto& f : s.frames()) EXPECT_EQ(s.fog().ingest(f).stored, 0u);
  EXPECT_EQ(s.fog().record_count(), before);
}

TEST(ScenarioTest, ConfigKeysAndValidation) {
  KvConfig kv;
  kv.set("devices", "3");
  kv.set("duration_s", "30");
  kv.set("weights.profile", "incident");
  kv.set("ack_drop_probability", "0.1");
  const auto cfg = scenario_from(kv);
  EXPECT_EQ(cfg.workload.devices, 3u);
  EXPECT_DOUBLE_EQ(cfg.workload.duration_s, 30);
  EXPECT_EQ(cfg.weights.name(), "incident");
  kv.set("ack_drop_probability", "1.5");
  EXPECT_THROW(scenario_from(kv), ScenarioConfigError);
  KvConfig unknown;
  unknown.set("no_such_key", "1");
  EXPECT_THROW(scenario_from(unknown), ConfigError);
}

}  // namespace
}  // namespace odlc::harness
