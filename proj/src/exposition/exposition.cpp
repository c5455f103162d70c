#include "odlc/exposition/exposition.hpp"

#include <charconv>
#include <cmath>

#include "odlc/core/errors.hpp"

namespace odlc::exposition {

std::string_view kind_name(MetricKind k) noexcept {
  switch (k) {
    case MetricKind::Counter: return "counter";
    case MetricKind::Gauge: return "gauge";
    case MetricKind::Histogram: return "histogram";
    case MetricKind::Summary: return "summary";
    case MetricKind::Untyped: return "untyped";
  }
  return "untyped";
}

std::optional<MetricKind> parse_kind(std::string_view s) noexcept {
  if (s == "counter") return MetricKind::Counter;
  if (s == "gauge") return MetricKind::Gauge;
  if (s == "histogram") return MetricKind::Histogram;
  if (s == "summary") return MetricKind::Summary;
  if (s == "untyped") return MetricKind::Untyped;
  return std::nullopt;
}

bool ReductionPolicy::admits(std::string_view family_name) const {
  if (!family_allowlist) return true;
  for (const auto& prefix : *family_allowlist) {
    if (family_name.starts_with(prefix)) return true;
  }
  return false;
}

void ReductionPolicy::validate() const {
  if (!(interval_scale >= 1.0) || !std::isfinite(interval_scale))
    throw InvalidInterval("interval_scale must be >= 1");
}

std::string format_value(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "+Inf" : "-Inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

namespace {

bool is_name_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ':';
}
bool is_name_char(char c) { return is_name_start(c) || (c >= '0' && c <= '9'); }
bool is_space(char c) { return c == ' ' || c == '\t'; }

std::string escape_help(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else out.push_back(c);
  }
  return out;
}

std::string unescape_help(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char n = s[i + 1];
      if (n == '\\') { out.push_back('\\'); ++i; continue; }
      if (n == 'n') { out.push_back('\n'); ++i; continue; }
    }
    out.push_back(s[i]);
  }
  return out;
}

void escape_label_value(std::string_view s, std::string& out) {
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '"') out += "\\\"";
    else if (c == '\n') out += "\\n";
    else out.push_back(c);
  }
}

std::optional<double> parse_float(std::string_view s) {
  if (s == "NaN" || s == "nan") return std::nan("");
  if (s == "+Inf" || s == "Inf" || s == "inf" || s == "+inf") return HUGE_VAL;
  if (s == "-Inf" || s == "-inf") return -HUGE_VAL;
  std::string_view body = s;
  if (!body.empty() && body.front() == '+') body.remove_prefix(1);
  if (body.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
  if (ec != std::errc() || ptr != body.data() + body.size()) return std::nullopt;
  return v;
}

class LineParser {
 public:
  LineParser(std::string_view line, std::size_t line_no) : s_(line), line_no_(line_no) {}

  Sample parse_sample() {
    Sample out;
    out.name = parse_name();
    if (peek() == '{') {
      ++pos_;
      out.labels = parse_labels();
    }
    if (!at_end() && !is_space(s_[pos_])) fail("expected whitespace after metric name");
    skip_space();
    std::string_view value_tok = token();
    if (value_tok.empty()) fail("missing sample value");
    auto v = parse_float(value_tok);
    if (!v) fail("malformed sample value '" + std::string(value_tok) + "'");
    out.value = *v;
    skip_space();
    if (!at_end()) {
      std::string_view ts_tok = token();
      std::int64_t ts = 0;
      auto [ptr, ec] = std::from_chars(ts_tok.data(), ts_tok.data() + ts_tok.size(), ts);
      if (ec != std::errc() || ptr != ts_tok.data() + ts_tok.size())
        fail("malformed timestamp '" + std::string(ts_tok) + "'");
      out.timestamp_ms = ts;
      skip_space();
      if (!at_end()) fail("trailing characters after timestamp");
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_no_, msg); }

  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return at_end() ? '\0' : s_[pos_]; }
  void skip_space() {
    while (!at_end() && is_space(s_[pos_])) ++pos_;
  }
  std::string_view token() {
    std::size_t b = pos_;
    while (!at_end() && !is_space(s_[pos_])) ++pos_;
    return s_.substr(b, pos_ - b);
  }

  std::string parse_name() {
    std::size_t b = pos_;
    if (at_end() || !is_name_start(s_[pos_])) fail("invalid metric name");
    while (!at_end() && is_name_char(s_[pos_])) ++pos_;
    return std::string(s_.substr(b, pos_ - b));
  }

  Labels parse_labels() {
    Labels labels;
    skip_space();
    while (true) {
      if (at_end()) fail("unbalanced braces in label set");
      if (s_[pos_] == '}') {
        ++pos_;
        break;
      }
      std::size_t b = pos_;
      if (!is_name_start(s_[pos_])) fail("invalid label name");
      while (!at_end() && is_name_char(s_[pos_])) ++pos_;
      std::string key(s_.substr(b, pos_ - b));
      skip_space();
      if (peek() != '=') fail("expected '=' after label name");
      ++pos_;
      skip_space();
      if (peek() != '"') fail("expected quoted label value");
      ++pos_;
      std::string value;
      bool closed = false;
      while (!at_end()) {
        char c = s_[pos_++];
        if (c == '\\') {
          if (at_end()) break;
          char n = s_[pos_++];
          if (n == 'n') value.push_back('\n');
          else value.push_back(n);
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          value.push_back(c);
        }
      }
      if (!closed) fail("unterminated label value");
      labels.emplace_back(std::move(key), std::move(value));
      skip_space();
      if (peek() == ',') {
        ++pos_;
        skip_space();
      } else if (peek() != '}') {
        fail("unbalanced braces in label set");
      }
    }
    try {
      return canonical_labels(std::move(labels));
    } catch (const InvalidRecord& e) {
      fail(e.what());
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_no_;
};

bool belongs_to(const MetricFamily& fam, std::string_view sample_name) {
  if (sample_name == fam.name) return true;
  const auto kind = fam.effective_kind();
  if (kind != MetricKind::Histogram && kind != MetricKind::Summary) return false;
  if (!sample_name.starts_with(fam.name)) return false;
  std::string_view suffix = sample_name.substr(fam.name.size());
  return suffix == "_sum" || suffix == "_count" || (kind == MetricKind::Histogram && suffix == "_bucket");
}

}  // namespace

ExpositionDocument parse_exposition(std::string_view input) {
  ExpositionDocument doc;
  doc.raw_size_bytes = input.size();
  std::size_t line_no = 0;
  std::size_t pos = 0;

  auto family_for_meta = [&](std::string_view name) -> MetricFamily& {
    if (!doc.families.empty()) {
      auto& cur = doc.families.back();
      if (cur.name == name && cur.samples.empty()) return cur;
    }
    doc.families.push_back(MetricFamily{std::string(name), std::nullopt, std::nullopt, {}});
    return doc.families.back();
  };

  while (pos < input.size()) {
    std::size_t nl = input.find('\n', pos);
    std::string_view line = input.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? input.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos) continue;
    line.remove_prefix(first);

    if (line.front() == '#') {
      std::string_view rest = line.substr(1);
      while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
      const bool help = rest.starts_with("HELP ") || rest.starts_with("HELP\t");
      const bool type = rest.starts_with("TYPE ") || rest.starts_with("TYPE\t");
      if (!help && !type) continue;  // plain comment
      rest.remove_prefix(5);
      while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
      std::size_t name_end = 0;
      while (name_end < rest.size() && is_name_char(rest[name_end])) ++name_end;
      if (name_end == 0 || !is_name_start(rest.front()))
        throw ParseError(line_no, "invalid metric name in comment");
      std::string_view name = rest.substr(0, name_end);
      std::string_view text = rest.substr(name_end);
      if (!text.empty() && !is_space(text.front()))
        throw ParseError(line_no, "invalid metric name in comment");
      if (!text.empty()) text.remove_prefix(1);
      if (help) {
        auto& fam = family_for_meta(name);
        if (fam.help) {
          doc.families.push_back(MetricFamily{std::string(name), std::nullopt, std::nullopt, {}});
        }
        doc.families.back().help = unescape_help(text);
      } else {
        while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
        auto kind = parse_kind(text);
        if (!kind) throw ParseError(line_no, "unknown metric type '" + std::string(text) + "'");
        auto& fam = family_for_meta(name);
        if (fam.kind) {
          doc.families.push_back(MetricFamily{std::string(name), std::nullopt, std::nullopt, {}});
        }
        doc.families.back().kind = *kind;
      }
      continue;
    }

    while (!line.empty() && is_space(line.back())) line.remove_suffix(1);
    Sample s = LineParser(line, line_no).parse_sample();
    if (doc.families.empty() || !belongs_to(doc.families.back(), s.name)) {
      doc.families.push_back(MetricFamily{s.name, std::nullopt, std::nullopt, {}});
    }
    doc.families.back().samples.push_back(std::move(s));
  }
  return doc;
}

void encode_sample(const Sample& sample, std::string& out) {
  out += sample.name;
  if (!sample.labels.empty()) {
    out.push_back('{');
    bool first = true;
    for (const auto& [k, v] : sample.labels) {
      if (!first) out.push_back(',');
      first = false;
      out += k;
      out += "=\"";
      escape_label_value(v, out);
      out.push_back('"');
    }
    out.push_back('}');
  }
  out.push_back(' ');
  out += format_value(sample.value);
  if (sample.timestamp_ms) {
    out.push_back(' ');
    out += std::to_string(*sample.timestamp_ms);
  }
  out.push_back('\n');
}

void encode_family(const MetricFamily& family, const ReductionPolicy& policy, std::string& out) {
  if (family.help && !policy.strip_help) {
    out += "# HELP ";
    out += family.name;
    out.push_back(' ');
    out += escape_help(*family.help);
    out.push_back('\n');
  }
  if (family.kind && !policy.strip_type) {
    out += "# TYPE ";
    out += family.name;
    out.push_back(' ');
    out += kind_name(*family.kind);
    out.push_back('\n');
  }
  for (const auto& s : family.samples) encode_sample(s, out);
}

std::vector<const MetricFamily*> admitted_families(const ExpositionDocument& doc,
                                                   const ReductionPolicy& policy) {
  std::vector<const MetricFamily*> out;
  for (const auto& f : doc.families) {
    if (policy.admits(f.name)) out.push_back(&f);
  }
  return out;
}

std::string encode_exposition(const ExpositionDocument& doc, const ReductionPolicy& policy) {
  std::string out;
  out.reserve(doc.raw_size_bytes);
  for (const MetricFamily* f : admitted_families(doc, policy)) encode_family(*f, policy, out);
  return out;
}

ReductionReport estimate_reduction(const ExpositionDocument& doc, const ReductionPolicy& policy,
                                   double base_interval_s) {
  if (!(base_interval_s > 0.0)) throw InvalidInterval("base_interval_s must be positive");
  policy.validate();
  ReductionReport r;
  r.bytes_before = encode_exposition(doc, ReductionPolicy::keep_all()).size();
  r.bytes_after = static_cast<double>(encode_exposition(doc, policy).size()) / policy.interval_scale;
  r.ratio = r.bytes_before == 0 ? 0.0 : 1.0 - r.bytes_after / static_cast<double>(r.bytes_before);
  const double scrapes_per_hour = 3600.0 / base_interval_s;
  r.bytes_per_hour_before = static_cast<double>(r.bytes_before) * scrapes_per_hour;
  r.bytes_per_hour_after = r.bytes_after * scrapes_per_hour;
  return r;
}

}  // namespace odlc::exposition
