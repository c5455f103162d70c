#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace odlc {

// Line-oriented `key = value` settings with `#` comments. Layers are applied
// in increasing precedence: defaults < file < environment (ODLC_*) < flags.
class KvConfig {
 public:
  // Throws ConfigError naming the offending line.
  static KvConfig parse(std::string_view text);
  static KvConfig load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void merge(const KvConfig& higher);

  // For each known key, reads ODLC_<KEY> with dots replaced by underscores
  // and upper-cased, e.g. metric.interval_s -> ODLC_METRIC_INTERVAL_S.
  void apply_environment(const std::set<std::string>& known_keys);
  // Throws ConfigError listing keys outside `known`.
  void reject_unknown(const std::set<std::string>& known) const;

  bool has(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, std::string fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated, whitespace-trimmed, empty items dropped.
  std::optional<std::vector<std::string>> get_list(const std::string& key) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  static std::string env_name(std::string_view key);

 private:
  std::map<std::string, std::string> values_;
};

std::string trim(std::string_view s);
std::vector<std::string> split_list(std::string_view s, char sep = ',');

}  // namespace odlc
