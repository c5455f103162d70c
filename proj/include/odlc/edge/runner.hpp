#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>

#include "odlc/edge/agent.hpp"
#include "odlc/meter/meter.hpp"

namespace odlc::edge {

struct RunOptions {
  double duration_s = 0.0;              // 0: until stopped
  double trace_demo_interval_s = 0.0;   // 0: no instrumented region aggregation
  std::size_t trace_demo_points = 2000;
  std::filesystem::path meter_out;      // meter report, rewritten every window
  meter::MeterBudget budget;
  std::int64_t meter_window_ms = 1000;
};

struct RunSummary {
  std::array<CollectionCounters, kDomainCount> collected{};
  std::array<DomainCounters, kDomainCount> staging{};
  std::uint64_t frames_sent = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t connect_failures = 0;
  std::uint64_t demo_runs = 0;
  double wall_seconds = 0.0;
};

// Live edge process: a thread per collector, a transmitter thread that
// reconnects to the fog node as needed, and the resource sampler. Each
// collector thread charges its own CPU time to edge.metric, edge.log or
// edge.trace; socket bytes are split over domains by batch size.
class EdgeRunner {
 public:
  EdgeRunner(EdgeAgent& agent, const Clock& clock, RunOptions opts);

  // Blocks until the duration passes, stop() is called or `*external` turns true.
  RunSummary run(const std::atomic<bool>* external = nullptr);
  void stop();

  meter::MeterReport meter_report() const { return sampler_.report(); }

 private:
  bool sleep_for(double seconds);
  bool stopped() const;
  void metric_loop();
  void log_loop();
  void demo_loop();
  void transmit_loop(RunSummary& summary);
  void sample_window(std::int64_t start_ms, std::int64_t end_ms);

  EdgeAgent& agent_;
  const Clock& clock_;
  RunOptions opts_;
  meter::CounterAccounting accounting_;
  meter::ResourceSampler sampler_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::atomic<bool> stop_{false};
  const std::atomic<bool>* external_ = nullptr;
  std::atomic<std::uint64_t> demo_runs_{0};
  std::atomic<std::uint64_t> connect_failures_{0};
};

}  // namespace odlc::edge
