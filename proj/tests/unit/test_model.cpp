#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "odlc/core/errors.hpp"
#include "odlc/core/model.hpp"

namespace odlc {
namespace {

TEST(WeightProfileTest, Validation) {
  EXPECT_NO_THROW(validate_weights(1.0 / 3, 1.0 / 3, 1.0 / 3));
  const auto m = validate_weights(1.0, 0.0, 0.0);
  EXPECT_TRUE(m.enabled(Domain::Metric));
  EXPECT_FALSE(m.enabled(Domain::Log));
  EXPECT_FALSE(m.enabled(Domain::Trace));
  EXPECT_THROW(validate_weights(0.5, 0.5, 0.5), WeightSumError);
  EXPECT_THROW(validate_weights(1.2, -0.1, -0.1), WeightRangeError);
  EXPECT_THROW(validate_weights(std::nan(""), 0.5, 0.5), WeightRangeError);
  // Inside the tolerance is accepted, just outside is not.
  EXPECT_NO_THROW(validate_weights(0.5, 0.3, 0.2 + 5e-10));
  EXPECT_THROW(validate_weights(0.5, 0.3, 0.2 + 5e-9), WeightSumError);
}

TEST(WeightProfileTest, NamedAndInlineProfiles) {
  const auto r = weight_profile("regular");
  EXPECT_DOUBLE_EQ(r.w_metric(), 0.5);
  EXPECT_DOUBLE_EQ(r.w_log(), 0.3);
  EXPECT_DOUBLE_EQ(r.w_trace(), 0.2);
  const auto i = weight_profile("0.6, 0.4, 0");
  EXPECT_DOUBLE_EQ(i.w_log(), 0.4);
  EXPECT_FALSE(i.enabled(Domain::Trace));
  EXPECT_THROW(weight_profile("nonsense"), WeightRangeError);
  EXPECT_THROW(weight_profile("0.5,0.5"), WeightRangeError);
  EXPECT_THROW(weight_profile("0.5,0.5,0.5"), WeightSumError);
}

TEST(OverheadScoreTest, MaxOfComponentsWithFloor) {
  EXPECT_DOUBLE_EQ(overhead_score(make_overhead_vector(12, 5, 3)).value(), 12.0);
  EXPECT_DOUBLE_EQ(overhead_score(make_overhead_vector(0, 0, 0)).value(), 0.01);
  EXPECT_DOUBLE_EQ(overhead_score(make_overhead_vector(25, 25, 25)).value(), 25.0);
  EXPECT_THROW(make_overhead_vector(101, 0, 0), InvalidRecord);
  EXPECT_THROW(make_overhead_vector(0, -1, 0), InvalidRecord);
  EXPECT_THROW(OverheadScore::of(100.5), InvalidRecord);
}

TEST(OverheadScoreTest, Monotone) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pct(0.0, 100.0);
  for (int i = 0; i < 2000; ++i) {
    const double c = pct(rng), m = pct(rng), n = pct(rng);
    const double bump = std::uniform_real_distribution<double>(0.0, 100.0 - c)(rng);
    const auto base = overhead_score(make_overhead_vector(c, m, n)).value();
    EXPECT_GE(overhead_score(make_overhead_vector(c + bump, m, n)).value(), base);
  }
}

TEST(CorrelationScoreTest, Occupancy) {
  EXPECT_DOUBLE_EQ(correlation_score({{Domain::Metric, 10}, {Domain::Log, 0}, {Domain::Trace, 0}}).score, 0.0);
  EXPECT_DOUBLE_EQ(correlation_score({{Domain::Metric, 10}, {Domain::Log, 3}, {Domain::Trace, 0}}).score, 0.5);
  EXPECT_DOUBLE_EQ(correlation_score({{Domain::Metric, 1}, {Domain::Log, 1}, {Domain::Trace, 1}}).score, 1.0);
  EXPECT_EQ(correlation_score({}).occupied_domains, 0);
  EXPECT_DOUBLE_EQ(correlation_score({}).score, 0.0);
}

TEST(CorrelationScoreTest, MonotoneInOccupancy) {
  DomainCounts counts;
  double last = correlation_score(counts).score;
  for (Domain d : kDomains) {
    counts[d] = 5;
    const double s = correlation_score(counts).score;
    EXPECT_GE(s, last);
    last = s;
  }
}

TEST(OutcomeTest, Examples) {
  const auto o10 = OverheadScore::of(10);
  const CorrelationScore none{};
  EXPECT_NEAR(outcome(weight_profile("balanced"), o10, o10, o10, none, o10).outcome, 0.1, 1e-12);
  EXPECT_NEAR(outcome(weight_profile("metrics-only"), o10, OverheadScore::of(50), OverheadScore::of(50), none, o10)
                  .outcome,
              0.1, 1e-12);

  const auto r = outcome(weight_profile("regular"), OverheadScore::of(10), OverheadScore::of(5),
                         OverheadScore::of(20), CorrelationScore{3, 1.0}, OverheadScore::of(25));
  EXPECT_NEAR(r.collection_term, 0.05 + 0.06 + 0.01, 1e-12);
  EXPECT_NEAR(r.analysis_term, 0.04, 1e-12);
  EXPECT_NEAR(r.outcome, 0.16, 1e-12);
}

TEST(OutcomeTest, StrictlyDecreasingInEachOverhead) {
  const auto w = weight_profile("regular");
  const auto base = outcome(w, OverheadScore::of(10), OverheadScore::of(10), OverheadScore::of(10),
                            CorrelationScore{3, 1.0}, OverheadScore::of(10))
                        .outcome;
  const auto worse = OverheadScore::of(11);
  const auto ten = OverheadScore::of(10);
  const CorrelationScore x{3, 1.0};
  EXPECT_LT(outcome(w, worse, ten, ten, x, ten).outcome, base);
  EXPECT_LT(outcome(w, ten, worse, ten, x, ten).outcome, base);
  EXPECT_LT(outcome(w, ten, ten, worse, x, ten).outcome, base);
  EXPECT_LT(outcome(w, ten, ten, ten, x, worse).outcome, base);
}

TEST(OutcomeTest, PermutationInvariantCollectionTerm) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.01, 100.0);
  for (int i = 0; i < 500; ++i) {
    const double a = std::uniform_real_distribution<double>(0, 1)(rng);
    const double b = std::uniform_real_distribution<double>(0, 1 - a)(rng);
    std::array<double, 3> w{a, b, 1 - a - b};
    std::array<double, 3> o{u(rng), u(rng), u(rng)};
    std::array<int, 3> perm{0, 1, 2};
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto x = CorrelationScore{2, 0.5};
    const auto ox = OverheadScore::of(7);
    const auto r1 = outcome(validate_weights(w[0], w[1], w[2]), OverheadScore::of(o[0]), OverheadScore::of(o[1]),
                            OverheadScore::of(o[2]), x, ox);
    const auto r2 = outcome(validate_weights(w[perm[0]], w[perm[1]], w[perm[2]]), OverheadScore::of(o[perm[0]]),
                            OverheadScore::of(o[perm[1]]), OverheadScore::of(o[perm[2]]), x, ox);
    EXPECT_NEAR(r1.outcome, r2.outcome, 1e-12 * std::max(1.0, r1.outcome));
  }
}

TEST(ProjectVolumeTest, HourlyRates) {
  EXPECT_EQ(project_volume(65 * 1024, 5, 1, 1), 47923200u);
  EXPECT_EQ(project_volume(1024, 1, 1, 1), 3686400u);
  EXPECT_EQ(project_volume(4 * 1024, 15, 1, 1), 983040u);
  EXPECT_THROW(project_volume(1024, 0, 1, 1), InvalidInterval);
  EXPECT_THROW(project_volume(1024, -5, 1, 1), InvalidInterval);
}

TEST(ProjectVolumeTest, LinearityAndIntervalLaw) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t payload = std::uniform_int_distribution<std::uint64_t>(1, 1 << 20)(rng);
    const std::uint64_t devices = std::uniform_int_distribution<std::uint64_t>(1, 50)(rng);
    const double interval = std::uniform_int_distribution<int>(1, 60)(rng);
    const double hours = std::uniform_int_distribution<int>(1, 48)(rng);
    const auto v = project_volume(payload, interval, hours, devices);
    EXPECT_EQ(project_volume(payload, interval, hours, 2 * devices), 2 * v);
    EXPECT_EQ(project_volume(2 * payload, interval, hours, devices), 2 * v);
    // Halving up to the flooring of emissions.
    const auto doubled = project_volume(payload, 2 * interval, hours, devices);
    EXPECT_LE(doubled * 2, v + payload * devices);
    EXPECT_GE(doubled * 2 + payload * devices, v);
  }
}

TEST(BatchPriorityTest, Examples) {
  const auto w = weight_profile("regular");
  EXPECT_NEAR(batch_priority(Domain::Metric, w, OverheadScore::of(10)), 0.05, 1e-15);
  EXPECT_NEAR(batch_priority(Domain::Log, w, OverheadScore::of(5)), 0.06, 1e-15);
  const auto no_trace = validate_weights(0.5, 0.5, 0.0);
  EXPECT_EQ(batch_priority(Domain::Trace, no_trace, OverheadScore::of(0.01)), 0.0);
  EXPECT_EQ(batch_priority(Domain::Trace, no_trace, OverheadScore::of(100)), 0.0);
}

TEST(CorrelationWindowTest, Construction) {
  EXPECT_THROW(make_window(10, 10), InvalidRange);
  EXPECT_THROW(make_window(11, 10), InvalidRange);
  const auto w = make_window(0, 10, std::set<std::string>{"a"});
  EXPECT_TRUE(w.admits_device("a"));
  EXPECT_FALSE(w.admits_device("b"));
  EXPECT_TRUE(make_window(0, 1).admits_device("anything"));
}

}  // namespace
}  // namespace odlc
