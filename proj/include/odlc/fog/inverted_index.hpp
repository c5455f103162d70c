#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "odlc/core/record.hpp"

namespace odlc::fog {

using DocId = std::uint64_t;

// Maximal alphanumeric runs, lowercased.
std::vector<std::string> tokenize(std::string_view text);

// Optimal string alignment distance (adjacent transpositions count as one edit).
std::size_t osa_distance(std::string_view a, std::string_view b);

// `key=value` tokens of a log message. Keys start with a letter or '_' and
// continue with letters, digits, '_', '.' or '-'; values are the rest of the
// whitespace-delimited token with one pair of surrounding quotes removed.
// Empty values are skipped and a repeated key keeps its last value.
Labels extract_fields(std::string_view message);

// Term and field postings over LogEntry or TraceSpan records. Not
// synchronized; FogNode serializes writers.
class InvertedIndex {
 public:
  struct Doc {
    ObservabilityRecord record;
    std::int64_t time_ms;   // source timestamp (span start)
    std::int64_t start_us;  // interval covered; a point for logs
    std::int64_t end_us;
  };

  DocId add(ObservabilityRecord rec, const std::vector<std::string>& terms, const Labels& fields);

  const Doc* get(DocId id) const;
  // Sorted, strictly increasing.
  const std::vector<DocId>& postings(const std::string& term) const;
  const std::vector<DocId>& field(const std::string& key, const std::string& value) const;
  // Dictionary terms within OSA distance 1 of `term` (including itself).
  std::vector<std::string> fuzzy_terms(const std::string& term) const;

  // Documents whose interval overlaps [start_ms, end_ms); zero-length
  // intervals match when their point lies inside. Sorted by id.
  std::vector<DocId> overlapping(std::int64_t start_ms, std::int64_t end_ms) const;

  // Ids with time_ms < cutoff, sorted.
  std::vector<DocId> older_than(std::int64_t cutoff) const;
  void remove(const std::vector<DocId>& ids);

  std::size_t size() const noexcept { return docs_.size(); }
  std::size_t term_count() const noexcept { return terms_.size(); }
  void for_each(const std::function<void(DocId, const Doc&)>& fn) const;

 private:
  struct DocEntry {
    Doc doc;
    std::vector<std::string> terms;
    std::vector<std::string> field_keys;  // "key\0value"
  };

  DocId next_id_ = 1;
  std::map<DocId, DocEntry> docs_;
  std::unordered_map<std::string, std::vector<DocId>> terms_;
  std::unordered_map<std::string, std::vector<DocId>> fields_;
  std::map<std::size_t, std::set<std::string>> terms_by_length_;
  std::multimap<std::int64_t, DocId> by_start_us_;
  std::int64_t max_length_us_ = 0;
};

}  // namespace odlc::fog
