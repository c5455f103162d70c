#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "odlc/archive/catalog.hpp"
#include "odlc/archive/geo.hpp"
#include "odlc/archive/segment.hpp"
#include "odlc/core/errors.hpp"
#include "odlc/fog/inverted_index.hpp"
#include "odlc/util/bytes.hpp"
#include "odlc/util/files.hpp"
#include "test_util.hpp"

namespace odlc::archive {
namespace {

std::vector<ObservabilityRecord> logs_between(std::int64_t from, std::int64_t to, const std::string& device = "dev-1") {
  std::vector<ObservabilityRecord> out;
  for (std::int64_t t = from; t < to; ++t) out.push_back(test::log_line("entry " + std::to_string(t), t, device));
  return out;
}

std::filesystem::path write_segment(const test::TempDir& dir, const std::string& name,
                                    const std::vector<ObservabilityRecord>& recs) {
  const auto path = dir / name;
  files::write_file_atomic(path, encode_segment_file(make_segment(recs)));
  return path;
}

TEST(SegmentTest, FileRoundTrip) {
  const auto recs = logs_between(0, 50);
  const auto seg = make_segment(recs);
  EXPECT_EQ(seg.manifest.record_count, 50u);
  EXPECT_EQ(seg.manifest.min_ts, 0);
  EXPECT_EQ(seg.manifest.max_ts, 49);
  EXPECT_EQ(seg.manifest.devices, std::set<std::string>{"dev-1"});
  const auto bytes = encode_segment_file(seg);
  EXPECT_EQ(read_manifest(bytes), seg.manifest);
  const auto back = decode_segment_file(bytes);
  EXPECT_EQ(back.body, seg.body);
  const auto out = segment_records(back);
  ASSERT_EQ(out.size(), recs.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].wire_line(), recs[i].wire_line());
  EXPECT_EQ(manifest_from_text(manifest_to_text(seg.manifest)), seg.manifest);
  EXPECT_EQ(segment_stem(seg.manifest), "log-0-49");
}

TEST(SegmentTest, RejectsMixedAndEmpty) {
  EXPECT_THROW(make_segment({}), InvalidRecord);
  EXPECT_THROW(make_segment({test::log_line("a", 1), test::metric("m", 1, 1)}), InvalidRecord);
  EXPECT_THROW(decode_segment_file("ODLCSEG1 truncated"), DecodeError);
}

TEST(CatalogTest, ImportAndQueryThousandLogs) {
  test::TempDir src("src"), root("cat");
  const auto file = write_segment(src, "a.seg", logs_between(0, 1000));
  ArchiveCatalog cat(root.path());
  const auto r = cat.import_segment(file);
  EXPECT_EQ(r.status, ImportStatus::Imported);
  EXPECT_EQ(cat.record_count(Domain::Log), 1000u);
  HistoricalQuery q;
  q.domain = Domain::Log;
  EXPECT_EQ(cat.historical_query(q).size(), 1000u);
  q.start = 100;
  q.end = 200;
  EXPECT_EQ(cat.historical_query(q).size(), 100u);
  EXPECT_EQ(cat.import_segment(file).status, ImportStatus::Duplicate);
  EXPECT_EQ(cat.segment_count(), 1u);
  // The catalog persists across instances.
  ArchiveCatalog reopened(root.path());
  EXPECT_EQ(reopened.segment_count(), 1u);
  EXPECT_EQ(reopened.historical_query(q).size(), 100u);
}

TEST(CatalogTest, CorruptedBodyIsRejectedAndLeftInPlace) {
  test::TempDir src("src"), root("cat");
  auto file = encode_segment_file(make_segment(logs_between(0, 100)));
  // Flip a bit inside the compressed body.
  const auto manifest_len = bytes::Reader(file, 8).u32();
  file[8 + 4 + manifest_len + 8 + 10] ^= 0x40;
  const auto path = src / "bad.seg";
  files::write_file_atomic(path, file);
  ArchiveCatalog cat(root.path());
  EXPECT_THROW(cat.import_segment(path), ChecksumMismatch);
  EXPECT_TRUE(std::filesystem::exists(path));
  EXPECT_EQ(cat.segment_count(), 0u);

  write_segment(src, "good.seg", logs_between(0, 10));
  std::vector<ImportFailure> errors;
  const auto results = cat.import_dir(src.path(), &errors);
  EXPECT_EQ(results.size(), 1u);
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0].code, "ChecksumMismatch");
}

TEST(CatalogTest, PrunesSegmentsOutsideRange) {
  test::TempDir src("src"), root("cat");
  ArchiveCatalog cat(root.path());
  for (int k = 0; k < 5; ++k)
    cat.import_segment(write_segment(src, std::to_string(k) + ".seg", logs_between(k * 1000, k * 1000 + 100)));
  HistoricalQuery q;
  q.domain = Domain::Log;
  q.start = 10'000;
  q.end = 20'000;
  QueryStats stats;
  EXPECT_TRUE(cat.historical_query(q, &stats).empty());
  EXPECT_EQ(stats.segments_considered, 5u);
  EXPECT_EQ(stats.segments_decompressed, 0u);

  q.start = 2050;
  q.end = std::nullopt;
  const auto open = cat.historical_query(q, &stats);
  EXPECT_EQ(open.size(), 50u + 100u + 100u);
  EXPECT_EQ(stats.segments_decompressed, 3u);
  for (const auto& r : open) EXPECT_GE(r.source_timestamp_ms(), 2050);
}

TEST(CatalogTest, SelectorAndDeviceFilters) {
  test::TempDir src("src"), root("cat");
  std::vector<ObservabilityRecord> metrics;
  for (int i = 0; i < 20; ++i) metrics.push_back(test::metric(i % 2 ? "up" : "load", i, i, i < 10 ? "a" : "b"));
  ArchiveCatalog cat(root.path());
  cat.import_segment(write_segment(src, "m.seg", metrics));
  HistoricalQuery q;
  q.selector = fog::MetricSelector::parse("up");
  EXPECT_EQ(cat.historical_query(q).size(), 10u);
  q.devices = std::set<std::string>{"b"};
  EXPECT_EQ(cat.historical_query(q).size(), 5u);
  q.devices = std::set<std::string>{"c"};
  QueryStats stats;
  EXPECT_TRUE(cat.historical_query(q, &stats).empty());
  EXPECT_EQ(stats.segments_pruned, 1u);
}

RegionPolygon unit_square() { return RegionPolygon("sq", {{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }

TEST(GeoTest, UnitSquare) {
  const auto sq = unit_square();
  EXPECT_TRUE(point_in_polygon({0.5, 0.5}, sq));
  EXPECT_FALSE(point_in_polygon({1.5, 0.5}, sq));
  EXPECT_TRUE(point_in_polygon({1.0, 0.5}, sq));
  EXPECT_TRUE(point_in_polygon({0.0, 0.0}, sq));
  EXPECT_TRUE(point_in_polygon({0.5, 1.0}, sq));
  EXPECT_FALSE(point_in_polygon({-1e-9, 0.5}, sq));
  EXPECT_THROW(RegionPolygon("line", {{0, 0}, {1, 1}}), DegeneratePolygon);
}

// Winding number around a simple polygon, nonzero inside.
int winding_number(const GeoPoint& p, const std::vector<GeoPoint>& v) {
  int wn = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    const double cross = (b.lon - a.lon) * (p.lat - a.lat) - (p.lon - a.lon) * (b.lat - a.lat);
    if (a.lat <= p.lat) {
      if (b.lat > p.lat && cross > 0) ++wn;
    } else if (b.lat <= p.lat && cross < 0) {
      --wn;
    }
  }
  return wn;
}

TEST(GeoTest, AgreesWithWindingNumberOnStars) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 50; ++k) {
    const auto poly = random_star_polygon(rng, "p", {0, 0}, 0.3, 1.5, 5 + k % 12);
    for (int i = 0; i < 400; ++i) {
      const GeoPoint p{u(rng), u(rng)};
      EXPECT_EQ(point_in_polygon(p, poly), winding_number(p, poly.vertices()) != 0) << p.lon << "," << p.lat;
    }
  }
}

TEST(GeoTest, ModesAgreeIncludingBoundaries) {
  RegionDemoConfig cfg;
  cfg.points = 2000;
  cfg.regions = 16;
  auto polys = demo_regions(cfg);
  auto samples = demo_samples(cfg);
  for (const auto& poly : polys)
    for (const auto& v : poly.vertices()) samples.push_back(GeoSample{v, 1.0});
  const auto naive = assign_regions(samples, polys, AggregationMode::Naive);
  const auto fast = assign_regions(samples, polys, AggregationMode::Accelerated);
  EXPECT_EQ(naive, fast);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    int expect = -1;
    for (std::size_t p = 0; p < polys.size() && expect < 0; ++p)
      if (point_in_polygon(samples[i].at, polys[p])) expect = static_cast<int>(p);
    EXPECT_EQ(naive[i], expect);
  }
  const auto a = aggregate_by_region(samples, polys, AggregationMode::Naive);
  const auto b = aggregate_by_region(samples, polys, AggregationMode::Accelerated);
  EXPECT_EQ(a.regions, b.regions);
  EXPECT_EQ(a.unassigned, b.unassigned);
}

TEST(GeoTest, AggregateAndExtract) {
  const std::vector<RegionPolygon> polys{unit_square(), RegionPolygon("far", {{5, 5}, {6, 5}, {6, 6}})};
  std::vector<ObservabilityRecord> recs{test::log_line("lon=0.5 lat=0.5 speed=10", 1),
                                        test::log_line("lon=0.2 lat=0.9 speed=30", 2),
                                        test::log_line("lon=9 lat=9 speed=1", 3), test::log_line("lon=1", 4)};
  std::uint64_t missing = 0;
  for (auto& r : recs) {
    auto e = r.log();
    e.fields = fog::extract_fields(e.message);
    r = ObservabilityRecord(e);
  }
  const auto samples = geo_samples(recs, "speed", &missing);
  EXPECT_EQ(missing, 1u);
  ASSERT_EQ(samples.size(), 3u);
  const auto agg = aggregate_by_region(samples, polys, AggregationMode::Accelerated);
  EXPECT_EQ(agg.regions[0].count, 2u);
  EXPECT_DOUBLE_EQ(*agg.regions[0].mean, 20.0);
  EXPECT_DOUBLE_EQ(*agg.regions[0].min, 10.0);
  EXPECT_EQ(agg.regions[1].count, 0u);
  EXPECT_FALSE(agg.regions[1].mean.has_value());
  EXPECT_EQ(agg.unassigned, 1u);
}

TEST(GeoTest, RegionsTextRoundTrip) {
  const std::vector<RegionPolygon> polys{unit_square(), RegionPolygon("tri", {{2, 2}, {3, 2}, {2.5, 3.25}})};
  const auto back = parse_regions(format_regions(polys));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].name(), "tri");
  EXPECT_EQ(back[1].vertices()[2].lat, 3.25);
  EXPECT_THROW(parse_regions("{\"name\": \"x\", \"vertices\": [[0,0],[1,1]]}"), DegeneratePolygon);
  EXPECT_THROW(parse_regions("not json"), ParseError);
}

}  // namespace
}  // namespace odlc::archive
