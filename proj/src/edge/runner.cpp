#include "odlc/edge/runner.hpp"

#include <chrono>
#include <memory>
#include <thread>

#include "odlc/archive/geo.hpp"
#include "odlc/core/errors.hpp"
#include "odlc/edge/tcp_connection.hpp"
#include "odlc/util/files.hpp"
#include "odlc/util/log.hpp"

namespace odlc::edge {

namespace {

const std::array<std::string, kDomainCount> kComponents{"edge.metric", "edge.log", "edge.trace"};

const std::string& component(Domain d) { return kComponents[domain_index(d)]; }

}  // namespace

EdgeRunner::EdgeRunner(EdgeAgent& agent, const Clock& clock, RunOptions opts)
    : agent_(agent), clock_(clock), opts_(std::move(opts)), sampler_(opts_.budget, opts_.meter_window_ms) {
  opts_.budget.validate();
  if (opts_.meter_window_ms <= 0) throw ConfigError("meter window must be positive");
}

bool EdgeRunner::stopped() const { return stop_.load() || (external_ && external_->load()); }

void EdgeRunner::stop() {
  stop_.store(true);
  cv_.notify_all();
}

// False once stopped. Wakes at least every 100 ms to notice external stops.
bool EdgeRunner::sleep_for(double seconds) {
  using namespace std::chrono;
  const auto until = steady_clock::now() + duration_cast<steady_clock::duration>(duration<double>(seconds));
  std::unique_lock lock(mu_);
  while (!stopped()) {
    const auto now = steady_clock::now();
    if (now >= until) return true;
    cv_.wait_for(lock, std::min<steady_clock::duration>(until - now, milliseconds(100)));
  }
  return false;
}

void EdgeRunner::metric_loop() {
  do {
    const double t0 = meter::thread_cpu_seconds();
    agent_.collect_metrics_if_due(clock_.now_ms());
    accounting_.charge_cpu(component(Domain::Metric), meter::thread_cpu_seconds() - t0);
  } while (sleep_for(0.1));
}

void EdgeRunner::log_loop() {
  do {
    const double t0 = meter::thread_cpu_seconds();
    agent_.harvest_logs(clock_.now_ms());
    accounting_.charge_cpu(component(Domain::Log), meter::thread_cpu_seconds() - t0);
  } while (sleep_for(agent_.config().cycle_interval_s));
}

void EdgeRunner::demo_loop() {
  archive::RegionDemoConfig cfg;
  cfg.points = opts_.trace_demo_points;
  cfg.regions = 25;
  while (sleep_for(opts_.trace_demo_interval_s)) {
    cfg.seed = demo_runs_.fetch_add(1) + 1;
    try {
      archive::run_region_demo(cfg, &agent_.spans());
    } catch (const Error& e) {
      log::warn("region aggregation failed: {}", e.what());
    }
  }
}

void EdgeRunner::transmit_loop(RunSummary& summary) {
  std::unique_ptr<TcpConnection> conn;
  for (;;) {
    const bool last_round = stopped();
    const double t0 = meter::thread_cpu_seconds();
    if (!conn) {
      try {
        conn = std::make_unique<TcpConnection>(agent_.config().fog_address);
      } catch (const FogUnreachable& e) {
        if (connect_failures_.fetch_add(1) == 0) log::warn("{}", e.what());
      }
    }
    if (conn) {
      LinkState link;
      link.available = true;
      link.bandwidth_budget_bytes_per_cycle = agent_.config().link_budget_bytes;
      auto report = agent_.transmit_cycle(*conn, link);
      summary.frames_sent += report.frames_sent;
      summary.bytes_sent += report.bytes_sent;
      if (report.connection_lost) conn.reset();
      const double cpu = meter::thread_cpu_seconds() - t0;
      std::size_t total = 0;
      for (const auto& b : report.batches) total += b.bytes;
      for (const auto& b : report.batches) {
        const auto& c = component(b.domain);
        accounting_.charge_net(c, static_cast<double>(b.bytes));
        accounting_.charge_cpu(c, cpu * static_cast<double>(b.bytes) / static_cast<double>(total));
      }
    }
    if (last_round) break;
    sleep_for(agent_.config().cycle_interval_s);
  }
}

void EdgeRunner::sample_window(std::int64_t start_ms, std::int64_t end_ms) {
  std::map<Domain, OverheadScore> over;
  for (Domain d : kDomains) {
    accounting_.set_memory(component(d), static_cast<double>(agent_.staging().domain_bytes(d)));
    if (auto s = sampler_.sample_component(component(d), accounting_, start_ms, end_ms))
      over.emplace(d, overhead_score(OverheadVector{s->cpu_pct, s->mem_pct, s->net_pct}));
  }
  agent_.set_overheads(std::move(over));
  if (!opts_.meter_out.empty()) {
    try {
      files::write_file_atomic(opts_.meter_out, sampler_.report().to_text());
    } catch (const IoError& e) {
      log::warn("{}", e.what());
    }
  }
}

RunSummary EdgeRunner::run(const std::atomic<bool>* external) {
  external_ = external;
  RunSummary summary;
  const auto wall0 = std::chrono::steady_clock::now();
  for (Domain d : kDomains) accounting_.set_memory(component(d), 0.0);

  std::vector<std::thread> threads;
  threads.emplace_back([this] { metric_loop(); });
  threads.emplace_back([this] { log_loop(); });
  if (opts_.trace_demo_interval_s > 0) threads.emplace_back([this] { demo_loop(); });
  std::thread transmitter([this, &summary] { transmit_loop(summary); });

  std::int64_t window_start = clock_.now_ms();
  const double window_s = static_cast<double>(opts_.meter_window_ms) / 1000.0;
  const auto deadline = wall0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(opts_.duration_s));
  while (sleep_for(window_s)) {
    const auto end = clock_.now_ms();
    sample_window(window_start, end);
    window_start = end;
    if (opts_.duration_s > 0 && std::chrono::steady_clock::now() >= deadline) break;
  }
  stop();
  for (auto& t : threads) t.join();
  transmitter.join();
  const auto end = clock_.now_ms();
  if (end > window_start) sample_window(window_start, end);

  for (Domain d : kDomains) {
    summary.collected[domain_index(d)] = agent_.counters(d);
    summary.staging[domain_index(d)] = agent_.staging().counters(d);
  }
  summary.connect_failures = connect_failures_.load();
  summary.demo_runs = demo_runs_.load();
  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return summary;
}

}  // namespace odlc::edge
