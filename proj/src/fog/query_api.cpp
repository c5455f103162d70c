#include "odlc/fog/query_api.hpp"

#include <cmath>
#include <set>

#include "odlc/core/errors.hpp"

namespace odlc::fog {

using nlohmann::json;

namespace {

json value_json(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "+Inf" : "-Inf";
  return v;
}

json labels_json(const Labels& labels) {
  json j = json::object();
  for (const auto& [k, v] : labels) j[k] = v;
  return j;
}

Labels labels_from(const json& j) {
  Labels out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw DecodeError("fields must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw DecodeError("field '" + k + "' must be a string");
    out.emplace_back(k, v.get<std::string>());
  }
  return canonical_labels(std::move(out));
}

const json& need(const json& req, const char* key) {
  auto it = req.find(key);
  if (it == req.end() || it->is_null()) throw DecodeError(std::string("request is missing \"") + key + "\"");
  return *it;
}

template <typename T>
T get(const json& req, const char* key) {
  const auto& v = need(req, key);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw DecodeError(std::string("request field \"") + key + "\" has the wrong type");
  }
}

template <typename T>
T get_or(const json& req, const char* key, T fallback) {
  auto it = req.find(key);
  if (it == req.end() || it->is_null()) return fallback;
  return get<T>(req, key);
}

std::optional<std::int64_t> get_opt(const json& req, const char* key) {
  auto it = req.find(key);
  if (it == req.end() || it->is_null()) return std::nullopt;
  return get<std::int64_t>(req, key);
}

std::optional<std::set<std::string>> devices_from(const json& req) {
  auto it = req.find("devices");
  if (it == req.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) throw DecodeError("devices must be an array of strings");
  std::set<std::string> out;
  for (const auto& d : *it) {
    if (!d.is_string()) throw DecodeError("devices must be an array of strings");
    out.insert(d.get<std::string>());
  }
  return out;
}

json series_json(const SeriesResult& s) {
  json points = json::array();
  for (const auto& p : s.points) points.push_back(json::array({p.ts, value_json(p.value)}));
  return {{"name", s.meta.name}, {"labels", labels_json(s.meta.labels)}, {"device_id", s.meta.device_id},
          {"points", std::move(points)}};
}

json tree_json(const SpanTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    json children = json::array();
    for (auto c : n.children) children.push_back(c);
    nodes.push_back({{"span", span_json(n.span)}, {"orphan", n.orphan}, {"children", std::move(children)}});
  }
  json roots = json::array();
  for (auto r : tree.roots) roots.push_back(r);
  return {{"trace_id", tree.trace_id.hex()}, {"depth", tree.depth()},     {"synthetic_root", tree.synthetic_root},
          {"orphans", tree.orphan_count},   {"roots", std::move(roots)}, {"nodes", std::move(nodes)}};
}

json score_json(const CorrelationScore& s) {
  return {{"occupied_domains", s.occupied_domains}, {"score", s.score}};
}

json dispatch(FogNode& fog, const json& req) {
  if (!req.is_object()) throw DecodeError("request must be an object");
  const auto op = get<std::string>(req, "op");

  if (op == "range") {
    json out = json::array();
    for (const auto& s : fog.query_range(get<std::string>(req, "selector"), get<std::int64_t>(req, "start"),
                                         get<std::int64_t>(req, "end"),
                                         parse_aggregation(get_or<std::string>(req, "agg", "raw")),
                                         get_or<double>(req, "step_s", 0.0)))
      out.push_back(series_json(s));
    return out;
  }
  if (op == "logs") {
    LogQuery q;
    q.text = get_or<std::string>(req, "text", "");
    if (auto it = req.find("fields"); it != req.end()) q.fields = labels_from(*it);
    q.start = get_opt(req, "start");
    q.end = get_opt(req, "end");
    q.fuzzy = get_or<bool>(req, "fuzzy", false);
    q.limit = get_or<std::size_t>(req, "limit", 0);
    json out = json::array();
    for (const auto& e : fog.search_logs(q)) out.push_back(record_json(ObservabilityRecord(e)));
    return out;
  }
  if (op == "trace") return tree_json(fog.assemble_trace(TraceId::parse(get<std::string>(req, "trace_id"))));
  if (op == "critical") {
    const auto path = fog.critical_path(TraceId::parse(get<std::string>(req, "trace_id")));
    json spans = json::array();
    for (const auto& s : path) spans.push_back(span_json(s));
    return {{"trace_id", get<std::string>(req, "trace_id")}, {"spans", std::move(spans)}};
  }
  if (op == "deps") {
    const auto g = fog.dependency_graph(get<std::int64_t>(req, "start"), get<std::int64_t>(req, "end"));
    json edges = json::array();
    for (const auto& e : g.edges)
      edges.push_back({{"from", e.from}, {"to", e.to}, {"count", e.count}, {"mean_duration_us", e.mean_duration_us}});
    return {{"nodes", g.nodes}, {"edges", std::move(edges)}};
  }
  if (op == "correlate") {
    const auto w = make_window(get<std::int64_t>(req, "start"), get<std::int64_t>(req, "end"), devices_from(req));
    const auto r = fog.correlate(w);
    json out = score_json(r.score);
    out["counts"] = {{"metric", r.metrics.size()}, {"log", r.logs.size()}, {"trace", r.traces.size()}};
    if (get_or<bool>(req, "records", false)) {
      json recs = json::object();
      for (auto [name, list] : {std::pair{"metric", &r.metrics}, {"log", &r.logs}, {"trace", &r.traces}}) {
        json arr = json::array();
        for (const auto& rec : *list) arr.push_back(record_json(rec));
        recs[name] = std::move(arr);
      }
      out["records"] = std::move(recs);
    }
    return out;
  }
  if (op == "alerts") {
    std::vector<AlertRule> rules;
    const auto& list = need(req, "rules");
    if (!list.is_array()) throw DecodeError("rules must be an array");
    for (const auto& r : list) rules.push_back(alert_rule_from_json(r));
    json out = json::array();
    for (const auto& e : fog.evaluate_alerts(rules, get<std::int64_t>(req, "now"))) out.push_back(alert_json(e));
    return out;
  }
  if (op == "alert_log") {
    json out = json::array();
    for (const auto& e : fog.alert_log()) out.push_back(alert_json(e));
    return out;
  }
  if (op == "stats") {
    const auto st = fog.stats();
    json out = {{"frames", st.frames}, {"malformed_frames", st.malformed_frames}, {"storage_full", st.storage_full}};
    for (auto d : kDomains) {
      const auto i = domain_index(d);
      out[std::string(domain_name(d))] = {{"held", fog.record_count(d)},
                                          {"stored", st.stored[i]},
                                          {"duplicates", st.duplicates[i]},
                                          {"exported", st.exported[i]}};
    }
    return out;
  }
  throw DecodeError("unknown op '" + op + "'");
}

json error_json(const std::string& code, const std::string& message) {
  return {{"ok", false}, {"error", {{"code", code}, {"message", message}}}};
}

}  // namespace

json record_json(const ObservabilityRecord& rec) {
  json j = json::parse(rec.wire_line());
  j["domain"] = domain_name(rec.domain());
  return j;
}

json span_json(const TraceSpan& span) { return json::parse(encode_payload(span)); }

json alert_json(const AlertEvent& e) {
  return {{"rule_id", e.rule_id}, {"state", alert_state_name(e.state)}, {"value", value_json(e.value)},
          {"series", e.series},   {"at_ms", e.at_ms}};
}

AlertRule alert_rule_from_json(const json& j) {
  if (!j.is_object()) throw DecodeError("alert rule must be an object");
  AlertRule r;
  r.id = get<std::string>(j, "id");
  r.selector = get<std::string>(j, "selector");
  r.comparator = parse_comparator(get_or<std::string>(j, "comparator", ">"));
  r.threshold = get<double>(j, "threshold");
  r.for_duration_s = get_or<double>(j, "for_s", 0.0);
  if (!(r.for_duration_s >= 0.0)) throw DecodeError("alert for_s must be non-negative");
  return r;
}

json handle_query(FogNode& fog, const json& request) {
  try {
    return {{"ok", true}, {"result", dispatch(fog, request)}};
  } catch (const Error& e) {
    return error_json(e.code(), e.what());
  } catch (const std::exception& e) {
    return error_json("InternalError", e.what());
  }
}

std::string handle_query_line(FogNode& fog, std::string_view line) {
  json resp;
  try {
    resp = handle_query(fog, json::parse(line));
  } catch (const json::parse_error& e) {
    resp = error_json("DecodeError", std::string("request is not valid JSON: ") + e.what());
  }
  return resp.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

// ---------------------------------------------------------------------------
// Client

QueryClient::QueryClient(std::filesystem::path socket_path, std::chrono::milliseconds timeout)
    : fd_(net::connect_unix(socket_path)), timeout_(timeout) {}

json QueryClient::raw(const json& req) {
  try {
    net::send_all(fd_, req.dump() + "\n");
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        const std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        try {
          return json::parse(line);
        } catch (const json::parse_error& e) {
          throw DecodeError(std::string("malformed response: ") + e.what());
        }
      }
      auto chunk = net::recv_some(fd_, timeout_);
      if (!chunk) throw FogUnreachable("query response timed out");
      if (chunk->empty()) throw FogUnreachable("fog node closed the query socket");
      buffer_ += *chunk;
    }
  } catch (const ConnectionLost& e) {
    throw FogUnreachable(e.what());
  }
}

json QueryClient::request(const json& req) {
  auto resp = raw(req);
  if (resp.value("ok", false)) return resp["result"];
  const auto& err = resp["error"];
  throw Error(err.value("code", "InternalError"), err.value("message", "query failed"));
}

CorrelationScore RemoteCorrelation::correlation(const CorrelationWindow& w) {
  json req = {{"op", "correlate"}, {"start", w.start}, {"end", w.end}};
  if (w.device_filter) req["devices"] = *w.device_filter;
  QueryClient client(path_);
  const auto r = client.request(req);
  return CorrelationScore{r.at("occupied_domains").get<int>(), r.at("score").get<double>()};
}

}  // namespace odlc::fog
