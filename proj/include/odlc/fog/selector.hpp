#pragma once

#include <memory>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "odlc/core/record.hpp"

namespace odlc::fog {

enum class MatchOp { Equal, NotEqual, Regex, NotRegex };

struct LabelMatcher {
  std::string key;
  MatchOp op = MatchOp::Equal;
  std::string value;
  std::shared_ptr<const std::regex> re;  // set for the regex ops

  bool matches(std::string_view actual) const;
};

// `name{key="v", key!="v", key=~"re", key!~"re"}`. The name may be omitted
// when at least one matcher is given. The pseudo-label `device_id` matches
// the sample's device.
class MetricSelector {
 public:
  // Throws BadSelector.
  static MetricSelector parse(std::string_view text);

  bool matches(std::string_view name, const Labels& labels, std::string_view device_id) const;
  bool matches(const MetricSample& s) const { return matches(s.name, s.labels, s.device_id); }

  const std::string& name() const noexcept { return name_; }
  const std::vector<LabelMatcher>& matchers() const noexcept { return matchers_; }
  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
  std::string name_;
  std::vector<LabelMatcher> matchers_;
};

}  // namespace odlc::fog
