#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <fstream>
#include <random>

#include "odlc/core/errors.hpp"
#include "odlc/meter/meter.hpp"
#include "test_util.hpp"

namespace odlc::meter {
namespace {

class FixedCorrelation : public CorrelationSource {
 public:
  explicit FixedCorrelation(int occupied) : occupied_(occupied) {}
  CorrelationScore correlation(const CorrelationWindow&) override {
    return CorrelationScore{occupied_, occupied_ > 0 ? (occupied_ - 1) / 2.0 : 0.0};
  }

 private:
  int occupied_;
};

TEST(MeterTest, NormalizesAgainstBudget) {
  MeterBudget b{4.0, 1000.0, 100.0};
  const auto s = normalize("c", RawUsage{1.0, 250.0, 50.0}, 0, 1000, b);
  EXPECT_DOUBLE_EQ(s.cpu_pct, 25.0);
  EXPECT_DOUBLE_EQ(s.mem_pct, 25.0);
  EXPECT_DOUBLE_EQ(s.net_pct, 50.0);
  const auto over = normalize("c", RawUsage{40.0, 5000.0, 0}, 0, 2000, b);
  EXPECT_DOUBLE_EQ(over.cpu_pct, 100.0);
  EXPECT_DOUBLE_EQ(over.mem_pct, 100.0);
  EXPECT_THROW(normalize("c", {}, 5, 5, b), InvalidRange);
  EXPECT_THROW((MeterBudget{0, 1, 1}.validate()), ConfigError);
}

TEST(MeterTest, InjectedValuesComeBackExactly) {
  InjectedAccounting acct;
  ResourceSampler sampler(MeterBudget{2.0, 1e6, 1e6}, 1000);
  const RawUsage u{0.123456789, 987654.321, 4242.0};
  acct.inject("edge.metric", 1000, u);
  const auto s = sampler.sample_component("edge.metric", acct, 0, 1000);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->raw, u);
  EXPECT_FALSE(sampler.sample_component("edge.metric", acct, 1000, 2000).has_value());
  const auto rep = sampler.report();
  ASSERT_EQ(rep.gaps.size(), 1u);
  EXPECT_EQ(rep.gaps[0].window_end_ms, 2000);
  EXPECT_EQ(rep.series.at("edge.metric").size(), 1u);
}

TEST(MeterTest, OverheadIsMeanOverRange) {
  MeterReport rep;
  rep.series["fog"] = {normalize("fog", RawUsage{0.1, 0, 0}, 0, 1000, rep.budget),
                       normalize("fog", RawUsage{0.3, 0, 0}, 1000, 2000, rep.budget),
                       normalize("fog", RawUsage{0.9, 0, 0}, 2000, 3000, rep.budget)};
  EXPECT_NEAR(overhead_of(rep, "fog", 0, 2000).cpu_pct, 20.0, 1e-12);
  EXPECT_NEAR(overhead_of(rep, "fog", 0, 3000).cpu_pct, (10.0 + 30.0 + 90.0) / 3, 1e-12);
  EXPECT_THROW(overhead_of(rep, "fog", 5000, 6000), NoSamples);
  EXPECT_THROW(overhead_of(rep, "absent", 0, 3000), NoSamples);
}

TEST(MeterTest, CounterAccountingDrainsPerCall) {
  CounterAccounting acct;
  acct.charge_cpu("a", 0.5);
  acct.charge_cpu("a", 0.25);
  acct.charge_net("a", 100);
  acct.set_memory("a", 2048);
  const auto first = acct.usage("a", 0, 1000);
  EXPECT_DOUBLE_EQ(first.cpu_core_seconds, 0.75);
  EXPECT_DOUBLE_EQ(first.net_bytes, 100);
  EXPECT_DOUBLE_EQ(first.mem_bytes, 2048);
  const auto second = acct.usage("a", 1000, 2000);
  EXPECT_DOUBLE_EQ(second.cpu_core_seconds, 0.0);
  EXPECT_DOUBLE_EQ(second.net_bytes, 0.0);
  EXPECT_DOUBLE_EQ(second.mem_bytes, 2048);
}

TEST(MeterTest, ProcAccountingReadsFakeTree) {
  test::TempDir dir("proc");
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir / name) << body;
  };
  write("stat", "1 (odlc agent) S 0 0 0 0 0 0 0 0 0 0 100 50 0 0 20 0 1 0 0 0 0\n");
  write("statm", "1000 256 0 0 0 0 0\n");
  ProcAccounting acct(dir.path());
  acct.charge_net(512);
  const auto u = acct.usage("edge", 0, 1000);
  EXPECT_DOUBLE_EQ(u.mem_bytes, 256.0 * static_cast<double>(::sysconf(_SC_PAGESIZE)));
  EXPECT_DOUBLE_EQ(u.net_bytes, 512);
  write("stat", "1 (odlc agent) S 0 0 0 0 0 0 0 0 0 0 200 50 0 0 20 0 1 0 0 0 0\n");
  const auto v = acct.usage("edge", 1000, 2000);
  EXPECT_DOUBLE_EQ(v.cpu_core_seconds, 100.0 / static_cast<double>(::sysconf(_SC_CLK_TCK)));
  EXPECT_DOUBLE_EQ(v.net_bytes, 0.0);
}

TEST(MeterTest, ThreadCpuAdvances) {
  const double before = thread_cpu_seconds();
  volatile double sink = 0;
  for (int i = 0; i < 20'000'000; ++i) sink = sink + std::sqrt(static_cast<double>(i));
  EXPECT_GT(thread_cpu_seconds(), before);
  EXPECT_GE(online_cores(), 1.0);
}

MeterReport uniform_report(double cpu_pct_edge, double cpu_pct_fog) {
  MeterReport rep;
  rep.budget = MeterBudget{1.0, 1e9, 1e9};
  for (const char* c : {"edge.metric", "edge.log", "edge.trace"})
    rep.series[c] = {normalize(c, RawUsage{cpu_pct_edge / 100.0, 0, 0}, 0, 1000, rep.budget)};
  rep.series["fog"] = {normalize("fog", RawUsage{cpu_pct_fog / 100.0, 0, 0}, 0, 1000, rep.budget)};
  return rep;
}

TEST(ComposeOutcomeTest, UniformOverheadGivesTwoOverOver) {
  const auto rep = uniform_report(10, 10);
  FixedCorrelation full(3);
  const auto r = compose_outcome(rep, weight_profile("balanced"), make_window(0, 1000), full);
  // Collection terms sum to 1/Over and the analysis term is 1/Over.
  EXPECT_NEAR(r.outcome, 2.0 / 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.x_score.score, 1.0);
  const auto j = outcome_json(r);
  EXPECT_NEAR(j.at("outcome").get<double>(), r.outcome, 0);
}

TEST(ComposeOutcomeTest, ZeroWeightDomainNeedsNoSamples) {
  auto rep = uniform_report(10, 10);
  rep.series.erase("edge.trace");
  FixedCorrelation none(0);
  const auto w = validate_weights(0.5, 0.5, 0.0);
  const auto r = compose_outcome(rep, w, make_window(0, 1000), none);
  EXPECT_NEAR(r.outcome, 1.0 / 10.0, 1e-12);
  EXPECT_THROW(compose_outcome(rep, weight_profile("balanced"), make_window(0, 1000), none), NoSamples);
  rep.series.erase("fog");
  EXPECT_THROW(compose_outcome(rep, w, make_window(0, 1000), none), NoSamples);
}

TEST(ComposeOutcomeTest, MatchesDirectFormula) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pct(0.0, 100.0), unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    MeterReport rep;
    rep.budget = MeterBudget{1.0, 1000.0, 1000.0};
    std::map<std::string, double> expect_over;
    for (const char* c : {"edge.metric", "edge.log", "edge.trace", "fog", "archive"}) {
      double c_sum = 0, m_sum = 0, n_sum = 0;
      for (int k = 0; k < 3; ++k) {
        const RawUsage u{pct(rng) / 100.0, pct(rng) * 10.0, pct(rng) * 10.0};
        rep.series[c].push_back(normalize(c, u, k * 1000, (k + 1) * 1000, rep.budget));
        c_sum += u.cpu_core_seconds * 100.0;
        m_sum += u.mem_bytes / 10.0;
        n_sum += u.net_bytes / 10.0;
      }
      expect_over[c] = std::max({0.01, c_sum / 3, m_sum / 3, n_sum / 3});
    }
    double a = unit(rng), b = unit(rng), c = unit(rng);
    const double s = a + b + c;
    const auto w = validate_weights(a / s, b / s, 1.0 - a / s - b / s);
    const int occ = static_cast<int>(rng() % 4);
    FixedCorrelation corr(occ);
    const auto r = compose_outcome(rep, w, make_window(0, 3000), corr);
    const double x = occ > 0 ? (occ - 1) / 2.0 : 0.0;
    const double expected = w.w_metric() / expect_over["edge.metric"] + w.w_log() / expect_over["edge.log"] +
                            w.w_trace() / expect_over["edge.trace"] +
                            x / std::max(expect_over["fog"], expect_over["archive"]);
    EXPECT_TRUE(test::close_rel(r.outcome, expected, 1e-12)) << r.outcome << " vs " << expected;
  }
}

TEST(MeterReportTest, TextRoundTripReproducesOutcome) {
  auto rep = uniform_report(12.5, 3.25);
  rep.gaps.push_back(SampleGap{"archive", 0, 1000, "counter read failed"});
  const auto back = MeterReport::from_text(rep.to_text());
  EXPECT_EQ(back.series, rep.series);
  ASSERT_EQ(back.gaps.size(), 1u);
  EXPECT_EQ(back.gaps[0].reason, "counter read failed");
  EXPECT_EQ(back.to_text(), rep.to_text());
  FixedCorrelation corr(2);
  const auto w = weight_profile("incident");
  EXPECT_EQ(compose_outcome(back, w, make_window(0, 1000), corr).outcome,
            compose_outcome(rep, w, make_window(0, 1000), corr).outcome);
  EXPECT_THROW(MeterReport::from_text("not a report"), Error);
}

}  // namespace
}  // namespace odlc::meter
