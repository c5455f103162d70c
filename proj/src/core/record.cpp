#include "odlc/core/record.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "odlc/core/errors.hpp"

namespace odlc {

using ojson = nlohmann::ordered_json;

std::string_view domain_name(Domain d) noexcept {
  switch (d) {
    case Domain::Metric: return "metric";
    case Domain::Log: return "log";
    case Domain::Trace: return "trace";
  }
  return "unknown";
}

Domain parse_domain(std::string_view s) {
  if (s == "metric" || s == "metrics") return Domain::Metric;
  if (s == "log" || s == "logs") return Domain::Log;
  if (s == "trace" || s == "traces") return Domain::Trace;
  throw DecodeError("unknown domain '" + std::string(s) + "'");
}

Labels canonical_labels(Labels labels) {
  std::stable_sort(labels.begin(), labels.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i].first == labels[i - 1].first)
      throw InvalidRecord("duplicate label key '" + labels[i].first + "'");
  }
  return labels;
}

bool valid_metric_name(std::string_view name) noexcept {
  if (name.empty()) return false;
  auto head = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ':';
  };
  if (!head(name.front())) return false;
  return std::all_of(name.begin() + 1, name.end(),
                     [&](char c) { return head(c) || (c >= '0' && c <= '9'); });
}

bool operator==(const MetricSample& a, const MetricSample& b) {
  bool same_value = (std::isnan(a.value) && std::isnan(b.value)) || a.value == b.value;
  return same_value && a.name == b.name && a.labels == b.labels &&
         a.source_timestamp == b.source_timestamp && a.device_id == b.device_id;
}

std::string_view level_name(LogLevel l) noexcept {
  switch (l) {
    case LogLevel::Debug: return "DEBUG";
    case LogLevel::Info: return "INFO";
    case LogLevel::Warn: return "WARN";
    case LogLevel::Error: return "ERROR";
  }
  return "INFO";
}

LogLevel parse_level(std::string_view s) noexcept {
  std::string up(s);
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "DEBUG" || up == "TRACE") return LogLevel::Debug;
  if (up == "WARN" || up == "WARNING") return LogLevel::Warn;
  if (up == "ERROR" || up == "ERR" || up == "FATAL") return LogLevel::Error;
  return LogLevel::Info;
}

std::string TraceId::hex() const { return to_hex64(hi) + to_hex64(lo); }

TraceId TraceId::parse(std::string_view hex) {
  if (hex.size() != 32) throw DecodeError("trace_id must be 32 hex digits");
  return TraceId{parse_hex64(hex.substr(0, 16)), parse_hex64(hex.substr(16))};
}

namespace {

ojson labels_json(const Labels& labels) {
  ojson obj = ojson::object();
  for (const auto& [k, v] : labels) obj[k] = v;
  return obj;
}

Labels labels_from(const ojson& j, const char* field) {
  if (!j.is_object()) throw DecodeError(std::string(field) + " must be an object");
  Labels out;
  out.reserve(j.size());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string()) throw DecodeError(std::string(field) + " values must be text");
    out.emplace_back(it.key(), it.value().get<std::string>());
  }
  return canonical_labels(std::move(out));
}

ojson value_json(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "+Inf" : "-Inf";
  return v;
}

double value_from(const ojson& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "NaN") return std::nan("");
    if (s == "+Inf") return HUGE_VAL;
    if (s == "-Inf") return -HUGE_VAL;
  }
  throw DecodeError("value must be a number, \"NaN\", \"+Inf\" or \"-Inf\"");
}

ojson payload_to_json(const MetricSample& m) {
  ojson j;
  j["name"] = m.name;
  j["labels"] = labels_json(m.labels);
  j["value"] = value_json(m.value);
  j["source_timestamp"] = m.source_timestamp;
  j["device_id"] = m.device_id;
  return j;
}

ojson payload_to_json(const LogEntry& e) {
  ojson j;
  j["source_timestamp"] = e.source_timestamp;
  j["device_id"] = e.device_id;
  j["source_file"] = e.source_file;
  j["level"] = level_name(e.level);
  j["message"] = e.message;
  if (!e.fields.empty()) j["fields"] = labels_json(e.fields);
  return j;
}

ojson payload_to_json(const TraceSpan& s) {
  ojson j;
  j["trace_id"] = s.trace_id.hex();
  j["span_id"] = to_hex64(s.span_id);
  j["parent_span_id"] = s.parent_span_id ? ojson(to_hex64(*s.parent_span_id)) : ojson(nullptr);
  j["service"] = s.service;
  j["operation"] = s.operation;
  j["start"] = s.start;
  j["duration"] = s.duration;
  j["attributes"] = labels_json(s.attributes);
  j["device_id"] = s.device_id;
  return j;
}

template <class T>
T required(const ojson& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DecodeError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DecodeError(std::string("bad type for field '") + key + "'");
  }
}

const ojson& required_node(const ojson& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DecodeError(std::string("missing field '") + key + "'");
  return *it;
}

RecordPayload payload_from_json(Domain domain, const ojson& j) {
  if (!j.is_object()) throw DecodeError("record must be an object");
  switch (domain) {
    case Domain::Metric: {
      MetricSample m;
      m.name = required<std::string>(j, "name");
      m.labels = labels_from(required_node(j, "labels"), "labels");
      m.value = value_from(required_node(j, "value"));
      m.source_timestamp = required<std::int64_t>(j, "source_timestamp");
      m.device_id = required<std::string>(j, "device_id");
      return m;
    }
    case Domain::Log: {
      LogEntry e;
      e.source_timestamp = required<std::int64_t>(j, "source_timestamp");
      e.device_id = required<std::string>(j, "device_id");
      e.source_file = required<std::string>(j, "source_file");
      e.level = parse_level(required<std::string>(j, "level"));
      e.message = required<std::string>(j, "message");
      if (auto it = j.find("fields"); it != j.end()) e.fields = labels_from(*it, "fields");
      return e;
    }
    case Domain::Trace: {
      TraceSpan s;
      s.trace_id = TraceId::parse(required<std::string>(j, "trace_id"));
      s.span_id = parse_hex64(required<std::string>(j, "span_id"));
      const auto& parent = required_node(j, "parent_span_id");
      if (!parent.is_null()) {
        if (!parent.is_string()) throw DecodeError("parent_span_id must be text or null");
        s.parent_span_id = parse_hex64(parent.get<std::string>());
      }
      s.service = required<std::string>(j, "service");
      s.operation = required<std::string>(j, "operation");
      s.start = required<std::int64_t>(j, "start");
      s.duration = required<std::int64_t>(j, "duration");
      s.attributes = labels_from(required_node(j, "attributes"), "attributes");
      s.device_id = required<std::string>(j, "device_id");
      return s;
    }
  }
  throw DecodeError("unknown domain");
}

std::int64_t payload_timestamp(const RecordPayload& p) {
  return std::visit(
      [](const auto& r) -> std::int64_t {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, TraceSpan>) {
          return r.start / 1000;
        } else {
          return r.source_timestamp;
        }
      },
      p);
}

}  // namespace

void validate_payload(const RecordPayload& payload) {
  std::visit(
      [](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, MetricSample>) {
          if (!valid_metric_name(r.name)) throw InvalidRecord("invalid metric name '" + r.name + "'");
          if (r.source_timestamp < 0) throw InvalidRecord("negative timestamp");
          for (std::size_t i = 1; i < r.labels.size(); ++i) {
            if (!(r.labels[i - 1].first < r.labels[i].first))
              throw InvalidRecord("labels must be sorted with unique keys");
          }
        } else if constexpr (std::is_same_v<T, LogEntry>) {
          if (r.message.empty()) throw InvalidRecord("empty log message");
          if (r.source_timestamp < 0) throw InvalidRecord("negative timestamp");
        } else {
          if (r.parent_span_id && *r.parent_span_id == r.span_id)
            throw InvalidRecord("span is its own parent");
          if (r.duration < 0) throw InvalidRecord("negative span duration");
          if (r.start < 0) throw InvalidRecord("negative span start");
        }
      },
      payload);
}

std::string encode_payload(const RecordPayload& payload) {
  ojson j = std::visit([](const auto& r) { return payload_to_json(r); }, payload);
  std::string line = j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  line.push_back('\n');
  return line;
}

Hash128 compute_dedup_key(std::string_view device_id, Domain domain,
                          std::int64_t source_timestamp, std::string_view content) {
  // device \0 domain \0 timestamp \0 digest(content)
  const std::uint64_t digest = hash64(content, 0x636f6e74656e74ULL);
  std::string key;
  key.reserve(device_id.size() + 48);
  key.append(device_id);
  key.push_back('\0');
  key.push_back(static_cast<char>(domain));
  key.push_back('\0');
  key.append(std::to_string(source_timestamp));
  key.push_back('\0');
  key.append(to_hex64(digest));
  return hash128(key);
}

ObservabilityRecord::ObservabilityRecord(RecordPayload payload) : payload_(std::move(payload)) {
  if (auto* m = std::get_if<MetricSample>(&payload_)) m->labels = canonical_labels(std::move(m->labels));
  if (auto* e = std::get_if<LogEntry>(&payload_)) e->fields = canonical_labels(std::move(e->fields));
  if (auto* s = std::get_if<TraceSpan>(&payload_)) s->attributes = canonical_labels(std::move(s->attributes));
  validate_payload(payload_);
  wire_line_ = encode_payload(payload_);
  // Fields extracted at ingest are derived data; they do not change identity.
  std::string identity_line;
  if (auto* e = std::get_if<LogEntry>(&payload_); e && !e->fields.empty()) {
    LogEntry bare = *e;
    bare.fields.clear();
    identity_line = encode_payload(bare);
  }
  dedup_key_ = compute_dedup_key(device_id(), domain(), payload_timestamp(payload_),
                                 identity_line.empty() ? wire_line_ : identity_line);
  footprint_bytes_ = wire_line_.size();
}

ObservabilityRecord ObservabilityRecord::decode(Domain domain, std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DecodeError(std::string("record is not valid structured text: ") + e.what());
  }
  try {
    return ObservabilityRecord(payload_from_json(domain, j));
  } catch (const InvalidRecord& e) {
    throw DecodeError(e.what());
  }
}

const std::string& ObservabilityRecord::device_id() const noexcept {
  return std::visit([](const auto& r) -> const std::string& { return r.device_id; }, payload_);
}

std::int64_t ObservabilityRecord::source_timestamp_ms() const noexcept {
  return payload_timestamp(payload_);
}

}  // namespace odlc
