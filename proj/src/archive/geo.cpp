#include "odlc/archive/geo.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "odlc/core/errors.hpp"
#include "odlc/edge/collectors.hpp"

namespace odlc::archive {

RegionPolygon::RegionPolygon(std::string name, std::vector<GeoPoint> vertices)
    : name_(std::move(name)), vertices_(std::move(vertices)) {
  if (vertices_.size() < 3)
    throw DegeneratePolygon("region '" + name_ + "' has " + std::to_string(vertices_.size()) + " vertices");
  bbox_ = BoundingBox{vertices_[0].lon, vertices_[0].lat, vertices_[0].lon, vertices_[0].lat};
  for (const auto& v : vertices_) {
    bbox_.min_lon = std::min(bbox_.min_lon, v.lon);
    bbox_.max_lon = std::max(bbox_.max_lon, v.lon);
    bbox_.min_lat = std::min(bbox_.min_lat, v.lat);
    bbox_.max_lat = std::max(bbox_.max_lat, v.lat);
  }
}

namespace {

bool on_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) {
  const double cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
  if (cross != 0.0) return false;
  return p.lon >= std::min(a.lon, b.lon) && p.lon <= std::max(a.lon, b.lon) && p.lat >= std::min(a.lat, b.lat) &&
         p.lat <= std::max(a.lat, b.lat);
}

class Grid {
 public:
  Grid(const std::vector<RegionPolygon>& polys) {
    if (polys.empty()) return;
    box_ = polys[0].bbox();
    for (const auto& p : polys) {
      box_.min_lon = std::min(box_.min_lon, p.bbox().min_lon);
      box_.max_lon = std::max(box_.max_lon, p.bbox().max_lon);
      box_.min_lat = std::min(box_.min_lat, p.bbox().min_lat);
      box_.max_lat = std::max(box_.max_lat, p.bbox().max_lat);
    }
    n_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(polys.size())))) * 2);
    cells_.resize(n_ * n_);
    for (std::size_t i = 0; i < polys.size(); ++i) {
      const auto& b = polys[i].bbox();
      const auto x0 = col(b.min_lon), x1 = col(b.max_lon), y0 = row(b.min_lat), y1 = row(b.max_lat);
      for (auto y = y0; y <= y1; ++y)
        for (auto x = x0; x <= x1; ++x) cells_[y * n_ + x].push_back(static_cast<int>(i));
    }
  }

  // Candidate polygon indices in list order; empty outside the grid.
  const std::vector<int>& candidates(const GeoPoint& p) const {
    static const std::vector<int> kNone;
    if (cells_.empty() || !box_.contains(p)) return kNone;
    return cells_[row(p.lat) * n_ + col(p.lon)];
  }

 private:
  std::size_t bucket(double v, double lo, double hi) const {
    if (!(hi > lo)) return 0;
    const double f = std::floor((v - lo) / (hi - lo) * static_cast<double>(n_));
    return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(n_ - 1)));
  }
  std::size_t col(double lon) const { return bucket(lon, box_.min_lon, box_.max_lon); }
  std::size_t row(double lat) const { return bucket(lat, box_.min_lat, box_.max_lat); }

  BoundingBox box_;
  std::size_t n_ = 0;
  std::vector<std::vector<int>> cells_;
};

std::optional<double> number(std::string_view s) {
  double v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end) return std::nullopt;
  return v;
}

std::optional<std::string_view> lookup(const Labels& l, std::string_view key) {
  for (const auto& [k, v] : l) {
    if (k == key) return std::string_view(v);
  }
  return std::nullopt;
}

}  // namespace

bool point_in_polygon(const GeoPoint& p, const RegionPolygon& poly) {
  const auto& v = poly.vertices();
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if (on_segment(p, v[j], v[i])) return true;
    if ((v[i].lat > p.lat) != (v[j].lat > p.lat)) {
      const double x = v[j].lon + (p.lat - v[j].lat) * (v[i].lon - v[j].lon) / (v[i].lat - v[j].lat);
      if (p.lon < x) inside = !inside;
    }
  }
  return inside;
}

std::vector<int> assign_regions(const std::vector<GeoSample>& samples, const std::vector<RegionPolygon>& polys,
                                AggregationMode mode) {
  std::vector<int> out(samples.size(), -1);
  if (mode == AggregationMode::Naive) {
    for (std::size_t s = 0; s < samples.size(); ++s) {
      for (std::size_t i = 0; i < polys.size(); ++i) {
        if (point_in_polygon(samples[s].at, polys[i]) && out[s] < 0) out[s] = static_cast<int>(i);
      }
    }
    return out;
  }
  const Grid grid(polys);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (int i : grid.candidates(samples[s].at)) {
      const auto& poly = polys[static_cast<std::size_t>(i)];
      if (poly.bbox().contains(samples[s].at) && point_in_polygon(samples[s].at, poly)) {
        out[s] = i;
        break;
      }
    }
  }
  return out;
}

RegionAggregation aggregate_by_region(const std::vector<GeoSample>& samples,
                                      const std::vector<RegionPolygon>& polys, AggregationMode mode) {
  const auto assigned = assign_regions(samples, polys, mode);
  RegionAggregation out;
  std::vector<double> sums(polys.size(), 0.0);
  out.regions.reserve(polys.size());
  for (const auto& p : polys) out.regions.push_back(RegionAggregate{p.name(), 0, {}, {}, {}});
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (assigned[s] < 0) {
      ++out.unassigned;
      continue;
    }
    auto& r = out.regions[static_cast<std::size_t>(assigned[s])];
    const double v = samples[s].value;
    ++r.count;
    sums[static_cast<std::size_t>(assigned[s])] += v;
    r.min = r.min ? std::min(*r.min, v) : v;
    r.max = r.max ? std::max(*r.max, v) : v;
  }
  for (std::size_t i = 0; i < polys.size(); ++i) {
    if (out.regions[i].count > 0) out.regions[i].mean = sums[i] / static_cast<double>(out.regions[i].count);
  }
  return out;
}

std::vector<GeoSample> geo_samples(const std::vector<ObservabilityRecord>& records, std::string_view field,
                                   std::uint64_t* missing, std::string_view lon_key, std::string_view lat_key) {
  std::vector<GeoSample> out;
  std::uint64_t skipped = 0;
  for (const auto& r : records) {
    const Labels* attrs = nullptr;
    std::optional<double> value;
    switch (r.domain()) {
      case Domain::Log: attrs = &r.log().fields; break;
      case Domain::Trace: attrs = &r.span().attributes; break;
      case Domain::Metric:
        attrs = &r.metric().labels;
        if (field == "value") value = r.metric().value;
        break;
    }
    auto lon = lookup(*attrs, lon_key), lat = lookup(*attrs, lat_key);
    if (!value) {
      if (auto f = lookup(*attrs, field)) value = number(*f);
    }
    std::optional<double> x = lon ? number(*lon) : std::nullopt, y = lat ? number(*lat) : std::nullopt;
    if (!x || !y || !value) {
      ++skipped;
      continue;
    }
    out.push_back(GeoSample{{*x, *y}, *value});
  }
  if (missing) *missing += skipped;
  return out;
}

std::vector<RegionPolygon> parse_regions(std::string_view text) {
  std::vector<RegionPolygon> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::vector<GeoPoint> verts;
      for (const auto& v : j.at("vertices")) verts.push_back(GeoPoint{v.at(0).get<double>(), v.at(1).get<double>()});
      out.emplace_back(j.at("name").get<std::string>(), std::move(verts));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("bad region polygon: ") + e.what());
    }
  }
  return out;
}

std::string format_regions(const std::vector<RegionPolygon>& polys) {
  std::string out;
  for (const auto& p : polys) {
    nlohmann::ordered_json j;
    j["name"] = p.name();
    j["vertices"] = nlohmann::json::array();
    for (const auto& v : p.vertices()) j["vertices"].push_back({v.lon, v.lat});
    out += j.dump() + "\n";
  }
  return out;
}

RegionPolygon random_star_polygon(std::mt19937_64& rng, std::string name, GeoPoint center, double r_min,
                                  double r_max, int vertex_count) {
  vertex_count = std::max(3, vertex_count);
  std::uniform_real_distribution<double> radius(r_min, r_max);
  std::uniform_real_distribution<double> jitter(0.1, 0.9);
  std::vector<GeoPoint> verts;
  verts.reserve(static_cast<std::size_t>(vertex_count));
  const double step = 2.0 * std::numbers::pi / vertex_count;
  for (int k = 0; k < vertex_count; ++k) {
    const double a = (k + jitter(rng)) * step;
    const double r = radius(rng);
    verts.push_back(GeoPoint{center.lon + r * std::cos(a), center.lat + r * std::sin(a)});
  }
  return RegionPolygon(std::move(name), std::move(verts));
}

std::vector<RegionPolygon> demo_regions(const RegionDemoConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(std::max<std::size_t>(1, cfg.regions)))));
  const double w = (cfg.area.max_lon - cfg.area.min_lon) / static_cast<double>(side);
  const double h = (cfg.area.max_lat - cfg.area.min_lat) / static_cast<double>(side);
  std::uniform_int_distribution<int> verts(12, 24);
  std::vector<RegionPolygon> out;
  for (std::size_t i = 0; i < cfg.regions; ++i) {
    const GeoPoint c{cfg.area.min_lon + (static_cast<double>(i % side) + 0.5) * w,
                     cfg.area.min_lat + (static_cast<double>(i / side) + 0.5) * h};
    const double r = std::min(w, h) / 2.0;
    out.push_back(random_star_polygon(rng, "suburb-" + std::to_string(i), c, 0.45 * r, 0.98 * r, verts(rng)));
  }
  return out;
}

std::vector<GeoSample> demo_samples(const RegionDemoConfig& cfg) {
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> lon(cfg.area.min_lon, cfg.area.max_lon);
  std::uniform_real_distribution<double> lat(cfg.area.min_lat, cfg.area.max_lat);
  std::lognormal_distribution<double> kbps(7.0, 0.6);
  std::vector<GeoSample> out;
  out.reserve(cfg.points);
  for (std::size_t i = 0; i < cfg.points; ++i) out.push_back(GeoSample{{lon(rng), lat(rng)}, kbps(rng)});
  return out;
}

RegionDemoResult run_region_demo(const RegionDemoConfig& cfg, edge::SpanRecorder* spans) {
  using Clock = std::chrono::steady_clock;
  std::optional<edge::SpanRecorder::Handle> root;
  auto phase = [&](const char* op) -> std::optional<edge::SpanRecorder::Handle> {
    if (!spans) return std::nullopt;
    return spans->start_span("archive-geo", op, root);
  };
  auto finish = [&](const std::optional<edge::SpanRecorder::Handle>& h) {
    if (h) spans->end_span(*h);
  };
  if (spans) {
    root = spans->start_span("archive-geo", "aggregate_by_region");
    spans->set_attribute(*root, "points", std::to_string(cfg.points));
    spans->set_attribute(*root, "regions", std::to_string(cfg.regions));
  }
  RegionDemoResult res;
  auto load = phase("load");
  const auto polys = demo_regions(cfg);
  const auto samples = demo_samples(cfg);
  finish(load);

  auto naive = phase("aggregate.naive");
  auto t0 = Clock::now();
  res.naive = aggregate_by_region(samples, polys, AggregationMode::Naive);
  res.naive_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  finish(naive);

  auto fast = phase("aggregate.accelerated");
  t0 = Clock::now();
  res.accelerated = aggregate_by_region(samples, polys, AggregationMode::Accelerated);
  res.accelerated_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  finish(fast);

  res.identical = res.naive.regions == res.accelerated.regions && res.naive.unassigned == res.accelerated.unassigned;
  if (root) {
    spans->set_attribute(*root, "speedup", std::to_string(res.speedup()));
    spans->end_span(*root);
  }
  return res;
}

}  // namespace odlc::archive
