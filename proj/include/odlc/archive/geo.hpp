#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "odlc/core/record.hpp"

namespace odlc::edge {
class SpanRecorder;
}

namespace odlc::archive {

struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;
};

struct BoundingBox {
  double min_lon = 0.0, min_lat = 0.0, max_lon = 0.0, max_lat = 0.0;

  bool contains(const GeoPoint& p) const noexcept {
    return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
  }
};

// Implicitly closed ring of planar (lon, lat) vertices.
class RegionPolygon {
 public:
  // Throws DegeneratePolygon for fewer than three vertices.
  RegionPolygon(std::string name, std::vector<GeoPoint> vertices);

  const std::string& name() const noexcept { return name_; }
  const std::vector<GeoPoint>& vertices() const noexcept { return vertices_; }
  const BoundingBox& bbox() const noexcept { return bbox_; }

 private:
  std::string name_;
  std::vector<GeoPoint> vertices_;
  BoundingBox bbox_;
};

// Even-odd ray casting; points on an edge or vertex are inside.
bool point_in_polygon(const GeoPoint& p, const RegionPolygon& poly);

struct GeoSample {
  GeoPoint at;
  double value = 0.0;
};

struct RegionAggregate {
  std::string region;
  std::uint64_t count = 0;
  std::optional<double> mean;  // set when count > 0
  std::optional<double> min;
  std::optional<double> max;

  friend bool operator==(const RegionAggregate&, const RegionAggregate&) = default;
};

enum class AggregationMode { Naive, Accelerated };

struct RegionAggregation {
  std::vector<RegionAggregate> regions;  // in polygon order
  std::uint64_t unassigned = 0;
  std::uint64_t missing_field = 0;
};

// Index of the first polygon containing each sample, or -1. Naive mode runs
// the exact test against every polygon; accelerated mode buckets polygon
// bounding boxes in a uniform grid and tests only the candidates.
std::vector<int> assign_regions(const std::vector<GeoSample>& samples, const std::vector<RegionPolygon>& polys,
                                AggregationMode mode);

// Folds in sample order, so both modes produce bit-identical means.
RegionAggregation aggregate_by_region(const std::vector<GeoSample>& samples,
                                      const std::vector<RegionPolygon>& polys, AggregationMode mode);

// Pulls `lon`, `lat` and `field` from log fields, span attributes or metric
// labels (`value` maps to the sample value for metrics). Records lacking any
// of them are counted in `missing`.
std::vector<GeoSample> geo_samples(const std::vector<ObservabilityRecord>& records, std::string_view field,
                                   std::uint64_t* missing, std::string_view lon_key = "lon",
                                   std::string_view lat_key = "lat");

// One polygon per line: {"name": "...", "vertices": [[lon, lat], ...]}.
// Throws ParseError or DegeneratePolygon.
std::vector<RegionPolygon> parse_regions(std::string_view text);
std::string format_regions(const std::vector<RegionPolygon>& polys);

// Simple star-shaped polygon around `center`, vertex radii in [r_min, r_max].
RegionPolygon random_star_polygon(std::mt19937_64& rng, std::string name, GeoPoint center, double r_min,
                                  double r_max, int vertex_count);

struct RegionDemoConfig {
  std::size_t points = 100000;
  std::size_t regions = 100;  // laid out on a square grid of cells
  std::uint64_t seed = 7;
  BoundingBox area{144.80, -37.95, 145.10, -37.70};
};

struct RegionDemoResult {
  RegionAggregation naive;
  RegionAggregation accelerated;
  double naive_seconds = 0.0;
  double accelerated_seconds = 0.0;
  bool identical = false;

  double speedup() const { return accelerated_seconds > 0 ? naive_seconds / accelerated_seconds : 0.0; }
};

std::vector<RegionPolygon> demo_regions(const RegionDemoConfig& cfg);
std::vector<GeoSample> demo_samples(const RegionDemoConfig& cfg);

// Point-in-polygon aggregation by region in both modes. Each phase runs
// inside a span of service "archive-geo" when a recorder is given.
RegionDemoResult run_region_demo(const RegionDemoConfig& cfg, edge::SpanRecorder* spans = nullptr);

}  // namespace odlc::archive
