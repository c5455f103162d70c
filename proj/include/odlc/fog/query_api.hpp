#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "odlc/fog/fog_node.hpp"
#include "odlc/meter/meter.hpp"
#include "odlc/util/socket.hpp"

namespace odlc::fog {

// One JSON object per request line, one per response line. Requests carry
// "op" (range, logs, trace, deps, critical, correlate, alerts, alert_log,
// stats) plus the op's arguments; times are milliseconds since the epoch.
// Responses are {"ok": true, "result": ...} or
// {"ok": false, "error": {"code": ..., "message": ...}}.
nlohmann::json handle_query(FogNode& fog, const nlohmann::json& request);
std::string handle_query_line(FogNode& fog, std::string_view line);

nlohmann::json record_json(const ObservabilityRecord& rec);
nlohmann::json span_json(const TraceSpan& span);
nlohmann::json alert_json(const AlertEvent& e);
AlertRule alert_rule_from_json(const nlohmann::json& j);  // throws BadSelector

// Client side of the query socket.
class QueryClient {
 public:
  // Throws FogUnreachable.
  explicit QueryClient(std::filesystem::path socket_path,
                       std::chrono::milliseconds timeout = std::chrono::seconds(30));

  // The "result" member of a successful response. A failed response is
  // rethrown as an Error with the server's code.
  nlohmann::json request(const nlohmann::json& req);
  // The whole response object.
  nlohmann::json raw(const nlohmann::json& req);

 private:
  net::Fd fd_;
  std::chrono::milliseconds timeout_;
  std::string buffer_;
};

// Correlation counts fetched from a running fog node.
class RemoteCorrelation : public meter::CorrelationSource {
 public:
  explicit RemoteCorrelation(std::filesystem::path socket_path) : path_(std::move(socket_path)) {}
  CorrelationScore correlation(const CorrelationWindow& w) override;

 private:
  std::filesystem::path path_;
};

}  // namespace odlc::fog
