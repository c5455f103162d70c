#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "odlc/core/record.hpp"
#include "odlc/fog/selector.hpp"

namespace odlc::fog {

using SeriesId = std::uint64_t;

// Name, canonical labels and device hashed together.
SeriesId series_id(std::string_view name, const Labels& labels, std::string_view device_id);

struct SeriesMeta {
  std::string name;
  Labels labels;
  std::string device_id;

  friend bool operator==(const SeriesMeta&, const SeriesMeta&) = default;
  friend auto operator<=>(const SeriesMeta&, const SeriesMeta&) = default;
};

struct Point {
  std::int64_t ts = 0;
  double value = 0.0;
};

// Immutable block of samples. Timestamps are zigzag varint deltas per series;
// values are stored as raw IEEE-754 doubles.
class SealedSegment {
 public:
  using SeriesData = std::map<SeriesId, std::vector<Point>>;

  // Points must be sorted by timestamp within each series.
  static SealedSegment build(const std::map<SeriesId, SeriesMeta>& metas, const SeriesData& data);
  // Throws ChecksumMismatch or DecodeError.
  static SealedSegment from_bytes(std::string bytes);

  const std::string& bytes() const noexcept { return bytes_; }
  std::int64_t min_ts() const noexcept { return min_ts_; }
  std::int64_t max_ts() const noexcept { return max_ts_; }
  std::uint64_t sample_count() const noexcept { return count_; }
  bool contains_series(SeriesId id) const { return index_.contains(id); }
  std::vector<SeriesId> series() const;
  const SeriesMeta& meta(SeriesId id) const { return index_.at(id).meta; }
  std::vector<Point> points(SeriesId id) const;
  SeriesData decode_all() const;

  const std::filesystem::path& path() const noexcept { return path_; }
  void set_path(std::filesystem::path p) { path_ = std::move(p); }

 private:
  struct Entry {
    SeriesMeta meta;
    std::size_t offset = 0;
    std::uint32_t count = 0;
  };
  void parse();

  std::string bytes_;
  std::map<SeriesId, Entry> index_;
  std::int64_t min_ts_ = 0;
  std::int64_t max_ts_ = 0;
  std::uint64_t count_ = 0;
  std::filesystem::path path_;
};

enum class Aggregation { Raw, Avg, Min, Max, Rate };

std::string_view aggregation_name(Aggregation a) noexcept;
// Throws InvalidRange on unknown names.
Aggregation parse_aggregation(std::string_view s);

struct SeriesResult {
  SeriesMeta meta;
  std::vector<Point> points;
};

struct TsdbConfig {
  std::size_t seal_threshold = 65536;  // head samples before sealing
  std::filesystem::path dir;           // empty: segments stay in memory
};

class TimeSeriesStore {
 public:
  explicit TimeSeriesStore(TsdbConfig cfg = {});

  // Last write wins on a repeated (series, timestamp).
  void append(const MetricSample& s);
  void seal();

  // Samples in [start, end). Throws InvalidRange. Aggregated forms bucket by
  // [start + k*step, start + (k+1)*step); empty buckets are omitted and NaN
  // samples are ignored. `rate` is max(0, last - first) / step_s.
  std::vector<SeriesResult> query_range(const MetricSelector& sel, std::int64_t start, std::int64_t end,
                                        Aggregation agg, double step_s) const;

  // Latest sample at or before `at` per matching series.
  std::vector<std::pair<SeriesMeta, Point>> latest(const MetricSelector& sel, std::int64_t at) const;

  std::vector<MetricSample> samples_in(std::int64_t start, std::int64_t end,
                                       const std::optional<std::set<std::string>>& devices = std::nullopt) const;
  std::vector<MetricSample> all_samples() const;
  // Removes every sample with timestamp < cutoff and returns how many went.
  std::size_t remove_older_than(std::int64_t cutoff);
  // Removes exactly the given (series, timestamp) points.
  std::size_t remove_exact(const std::vector<MetricSample>& samples);

  std::size_t sample_count() const;
  std::size_t head_count() const;
  std::size_t segment_count() const;
  std::size_t series_count() const;

  // Loads sealed segments from the configured directory.
  void load();

 private:
  std::vector<Point> points_locked(SeriesId id, std::int64_t start, std::int64_t end) const;
  void seal_locked();
  void persist_segment_locked(SealedSegment& seg);
  void drop_file(const SealedSegment& seg);
  void rewrite_segment_locked(std::size_t idx, SealedSegment::SeriesData data);
  void erase_from_segments_locked(SeriesId id, std::int64_t ts);

  TsdbConfig cfg_;
  mutable std::shared_mutex mu_;
  std::map<SeriesId, SeriesMeta> metas_;
  std::map<SeriesId, std::map<std::int64_t, double>> head_;
  std::size_t head_count_ = 0;
  std::vector<SealedSegment> segments_;
  std::map<SeriesId, std::int64_t> sealed_max_ts_;
};

}  // namespace odlc::fog
