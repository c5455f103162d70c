#include "odlc/fog/selector.hpp"

#include "odlc/core/errors.hpp"

namespace odlc::fog {

bool LabelMatcher::matches(std::string_view actual) const {
  switch (op) {
    case MatchOp::Equal: return actual == value;
    case MatchOp::NotEqual: return actual != value;
    case MatchOp::Regex: return std::regex_match(actual.begin(), actual.end(), *re);
    case MatchOp::NotRegex: return !std::regex_match(actual.begin(), actual.end(), *re);
  }
  return false;
}

namespace {

bool name_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ':'; }
bool name_char(char c) { return name_start(c) || (c >= '0' && c <= '9'); }

}  // namespace

MetricSelector MetricSelector::parse(std::string_view text) {
  MetricSelector sel;
  sel.text_ = std::string(text);
  std::size_t i = 0;
  auto skip = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
  };
  auto fail = [&](const std::string& why) -> void {
    throw BadSelector("selector '" + std::string(text) + "': " + why);
  };
  skip();
  if (i < text.size() && name_start(text[i])) {
    std::size_t b = i;
    while (i < text.size() && name_char(text[i])) ++i;
    sel.name_ = std::string(text.substr(b, i - b));
  }
  skip();
  if (i < text.size() && text[i] == '{') {
    ++i;
    while (true) {
      skip();
      if (i >= text.size()) fail("unbalanced braces");
      if (text[i] == '}') {
        ++i;
        break;
      }
      std::size_t b = i;
      if (!name_start(text[i])) fail("bad label name");
      while (i < text.size() && name_char(text[i])) ++i;
      LabelMatcher m;
      m.key = std::string(text.substr(b, i - b));
      skip();
      if (text.substr(i, 2) == "!=") { m.op = MatchOp::NotEqual; i += 2; }
      else if (text.substr(i, 2) == "=~") { m.op = MatchOp::Regex; i += 2; }
      else if (text.substr(i, 2) == "!~") { m.op = MatchOp::NotRegex; i += 2; }
      else if (i < text.size() && text[i] == '=') { m.op = MatchOp::Equal; i += 1; }
      else fail("expected a match operator after '" + m.key + "'");
      skip();
      if (i >= text.size() || text[i] != '"') fail("expected a quoted value");
      ++i;
      bool closed = false;
      while (i < text.size()) {
        char c = text[i++];
        if (c == '\\' && i < text.size()) {
          m.value.push_back(text[i++]);
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          m.value.push_back(c);
        }
      }
      if (!closed) fail("unterminated value");
      if (m.op == MatchOp::Regex || m.op == MatchOp::NotRegex) {
        try {
          m.re = std::make_shared<const std::regex>(m.value, std::regex::ECMAScript);
        } catch (const std::regex_error& e) {
          fail(std::string("bad regex: ") + e.what());
        }
      }
      sel.matchers_.push_back(std::move(m));
      skip();
      if (i < text.size() && text[i] == ',') ++i;
      else if (i < text.size() && text[i] != '}') fail("expected ',' or '}'");
    }
  }
  skip();
  if (i != text.size()) fail("trailing characters");
  if (sel.name_.empty() && sel.matchers_.empty()) fail("empty selector");
  return sel;
}

bool MetricSelector::matches(std::string_view name, const Labels& labels, std::string_view device_id) const {
  if (!name_.empty() && name != name_) return false;
  for (const auto& m : matchers_) {
    std::string_view actual;
    if (m.key == "device_id") {
      actual = device_id;
    } else if (m.key == "__name__") {
      actual = name;
    } else {
      for (const auto& [k, v] : labels) {
        if (k == m.key) {
          actual = v;
          break;
        }
      }
    }
    if (!m.matches(actual)) return false;
  }
  return true;
}

}  // namespace odlc::fog
