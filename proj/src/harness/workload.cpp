#include "odlc/harness/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "odlc/core/errors.hpp"
#include "odlc/core/hash.hpp"

namespace odlc::harness {

namespace expo = exposition;
using expo::MetricKind;

void WorkloadSpec::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (devices == 0) throw ScenarioConfigError("devices must be at least 1");
  if (!positive(metric_interval_s) || !positive(log_interval_s) || !positive(trace_interval_s))
    throw ScenarioConfigError("collection intervals must be positive");
  if (!positive(duration_s)) throw ScenarioConfigError("duration_s must be positive");
  if (log_line_bytes != 0 && log_line_bytes < 128) throw ScenarioConfigError("log_line_bytes must be 0 or >= 128");
  if (!(payload_bytes_per_s >= 0.0) || !std::isfinite(payload_bytes_per_s))
    throw ScenarioConfigError("payload_bytes_per_s must be non-negative");
}

double WorkloadSpec::observability_rate() const {
  return static_cast<double>(metric_payload_bytes) / metric_interval_s +
         static_cast<double>(log_line_bytes) / log_interval_s + static_cast<double>(trace_bytes) / trace_interval_s;
}

double WorkloadSpec::effective_payload_rate() const {
  return payload_bytes_per_s > 0.0 ? payload_bytes_per_s : kPayloadToObservability * observability_rate();
}

std::uint64_t device_seed(std::uint64_t seed, std::size_t device_index) {
  return hash64(fmt::format("{}/{}", seed, device_index), 0x64657669);
}

std::string device_name(std::size_t device_index) { return fmt::format("truck-{:02d}", device_index + 1); }

// ---------------------------------------------------------------------------
// Exposition corpus

namespace {

class FamilyBuilder {
 public:
  explicit FamilyBuilder(std::uint64_t seed) : rng_(seed) {}

  struct Built {
    expo::MetricFamily family;
    std::vector<double> base, rate, phase;
    std::vector<int> decimals;
    std::vector<bool> counter, constant;
  };

  Built counter(std::string name, std::string help, const std::vector<Labels>& label_sets, double magnitude) {
    Built b = start(std::move(name), std::move(help), MetricKind::Counter);
    for (const auto& l : label_sets) {
      std::uniform_real_distribution<double> base(magnitude, magnitude * 9.0);
      std::uniform_real_distribution<double> inc(1.0, std::max(2.0, magnitude / 1e4));
      add(b, l, std::floor(base(rng_)), std::floor(inc(rng_)), 0, true, false);
    }
    return b;
  }

  Built gauge(std::string name, std::string help, const std::vector<Labels>& label_sets, double center,
              int decimals = 2) {
    Built b = start(std::move(name), std::move(help), MetricKind::Gauge);
    for (const auto& l : label_sets) {
      std::uniform_real_distribution<double> c(center * 0.5, center * 0.9);
      const double base = c(rng_);
      add(b, l, base, base * 0.08, decimals, false, false);
    }
    return b;
  }

  Built constant(std::string name, std::string help, MetricKind kind, std::vector<std::pair<Labels, double>> values,
                 const std::vector<std::string>& suffixes = {}) {
    Built b = start(std::move(name), std::move(help), kind);
    for (std::size_t i = 0; i < values.size(); ++i) {
      add(b, values[i].first, values[i].second, 0, 0, false, true);
      if (!suffixes.empty()) b.family.samples.back().name = b.family.name + suffixes[i % suffixes.size()];
    }
    return b;
  }

 private:
  Built start(std::string name, std::string help, MetricKind kind) {
    Built b;
    b.family.name = std::move(name);
    b.family.help = std::move(help);
    b.family.kind = kind;
    return b;
  }

  void add(Built& b, const Labels& labels, double base, double rate, int decimals, bool counter, bool constant) {
    expo::Sample s;
    s.name = b.family.name;
    s.labels = canonical_labels(labels);
    const double scale = std::pow(10.0, decimals);
    s.value = std::round(base * scale) / scale;
    b.family.samples.push_back(std::move(s));
    b.base.push_back(base);
    b.rate.push_back(rate);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    b.phase.push_back(ph(rng_));
    b.decimals.push_back(decimals);
    b.counter.push_back(counter);
    b.constant.push_back(constant);
  }

  std::mt19937_64 rng_;
};

std::vector<Labels> one(Labels l = {}) { return {std::move(l)}; }

std::vector<Labels> per(const std::string& key, const std::vector<std::string>& values, Labels extra = {}) {
  std::vector<Labels> out;
  for (const auto& v : values) {
    Labels l = extra;
    l.emplace_back(key, v);
    out.push_back(std::move(l));
  }
  return out;
}

const std::vector<std::string> kCpus{"0", "1", "2", "3"};
const std::vector<std::string> kCpuModes{"idle", "iowait", "irq", "nice", "softirq", "steal", "system", "user"};
const std::vector<std::string> kDisks{"mmcblk0", "mmcblk0p1", "mmcblk0p2", "sda"};
const std::vector<std::string> kIfaces{"docker0", "eth0", "lo", "wlan0", "wwan0"};

const std::vector<std::string> kMeminfo{
    "Active",        "Active_anon",     "Active_file",   "AnonPages",       "Bounce",
    "Buffers",       "Cached",          "CmaFree",       "CmaTotal",        "CommitLimit",
    "Committed_AS",  "Dirty",           "Inactive",      "Inactive_anon",   "Inactive_file",
    "KReclaimable",  "KernelStack",     "Mapped",        "MemAvailable",    "MemFree",
    "MemTotal",      "Mlocked",         "NFS_Unstable",  "PageTables",      "Percpu",
    "SReclaimable",  "SUnreclaim",      "Shmem",         "ShmemHugePages",  "ShmemPmdMapped",
    "Slab",          "SwapCached",      "SwapFree",      "SwapTotal",       "Unevictable",
    "VmallocChunk",  "VmallocTotal",    "VmallocUsed",   "Writeback",       "WritebackTmp",
    "FileHugePages", "FilePmdMapped",   "HugePages_Free", "HugePages_Rsvd", "HugePages_Surp",
    "HugePages_Total", "Hugepagesize",  "Hugetlb",       "AnonHugePages",   "Zswap"};

const std::vector<std::pair<std::string, std::string>> kDiskStats{
    {"reads_completed_total", "The total number of reads completed successfully."},
    {"reads_merged_total", "The total number of reads merged."},
    {"read_bytes_total", "The total number of bytes read successfully."},
    {"read_time_seconds_total", "The total number of seconds spent by all reads."},
    {"writes_completed_total", "The total number of writes completed successfully."},
    {"writes_merged_total", "The number of writes merged."},
    {"written_bytes_total", "The total number of bytes written successfully."},
    {"write_time_seconds_total", "This is the total number of seconds spent by all writes."},
    {"io_now", "The number of I/Os currently in progress."},
    {"io_time_seconds_total", "Total seconds spent doing I/Os."},
    {"io_time_weighted_seconds_total", "The weighted number of seconds spent doing I/Os."},
    {"discards_completed_total", "The total number of discards completed successfully."},
    {"discards_merged_total", "The total number of discards merged."},
    {"discarded_sectors_total", "The total number of sectors discarded successfully."},
    {"discard_time_seconds_total", "This is the total number of seconds spent by all discards."},
    {"flush_requests_total", "The total number of flush requests completed successfully."},
    {"flush_requests_time_seconds_total", "This is the total number of seconds spent by all flush requests."},
    {"info", "Info of /sys/block/<block_device>."}};

const std::vector<std::string> kNetStats{
    "receive_bytes_total",      "receive_compressed_total", "receive_drop_total",   "receive_errs_total",
    "receive_fifo_total",       "receive_frame_total",      "receive_multicast_total", "receive_packets_total",
    "transmit_bytes_total",     "transmit_carrier_total",   "transmit_colls_total", "transmit_compressed_total",
    "transmit_drop_total",      "transmit_errs_total",      "transmit_fifo_total",  "transmit_packets_total",
    "mtu_bytes",                "up"};

const std::vector<std::string> kVmstat{
    "nr_free_pages",    "nr_zone_inactive_anon", "nr_zone_active_anon", "nr_zone_inactive_file",
    "nr_zone_active_file", "nr_zone_unevictable", "nr_zone_write_pending", "nr_mlock",
    "nr_bounce",        "nr_free_cma",    "numa_hit",         "numa_miss",       "numa_foreign",
    "numa_local",       "numa_other",     "nr_inactive_anon", "nr_active_anon",  "nr_inactive_file",
    "nr_active_file",   "nr_unevictable", "nr_slab_reclaimable", "nr_slab_unreclaimable", "nr_isolated_anon",
    "nr_isolated_file", "workingset_nodes", "workingset_refault_anon", "workingset_refault_file",
    "workingset_activate_anon", "workingset_activate_file", "workingset_restore_anon",
    "workingset_restore_file", "workingset_nodereclaim", "nr_anon_pages", "nr_mapped", "nr_file_pages",
    "nr_dirty",         "nr_writeback",   "nr_writeback_temp", "nr_shmem",      "nr_shmem_hugepages",
    "nr_shmem_pmdmapped", "nr_file_hugepages", "nr_file_pmdmapped", "nr_anon_transparent_hugepages",
    "nr_vmscan_write",  "nr_vmscan_immediate_reclaim", "nr_dirtied", "nr_written", "nr_kernel_misc_reclaimable",
    "pgpgin",           "pgpgout",        "pswpin",           "pswpout",         "pgalloc_dma",
    "pgalloc_normal",   "pgalloc_movable", "pgfree",          "pgactivate",      "pgdeactivate",
    "pglazyfree",       "pgfault",        "pgmajfault",       "pglazyfreed",     "pgrefill",
    "pgsteal_kswapd",   "pgsteal_direct", "pgscan_kswapd",    "pgscan_direct",   "pgscan_direct_throttle",
    "pginodesteal",     "slabs_scanned",  "kswapd_inodesteal", "kswapd_low_wmark_hit_quickly",
    "kswapd_high_wmark_hit_quickly", "pageoutrun", "pgrotated", "drop_pagecache", "drop_slab", "oom_kill",
    "pgmigrate_success", "pgmigrate_fail", "compact_migrate_scanned", "compact_free_scanned",
    "compact_isolated", "compact_stall",  "compact_fail",     "compact_success", "compact_daemon_wake",
    "unevictable_pgs_culled", "unevictable_pgs_scanned", "unevictable_pgs_rescued", "unevictable_pgs_mlocked",
    "unevictable_pgs_munlocked", "unevictable_pgs_cleared", "unevictable_pgs_stranded", "swap_ra",
    "swap_ra_hit"};

const std::vector<std::string> kNetstat{
    "Icmp_InErrors",   "Icmp_InMsgs",     "Icmp_OutMsgs",     "Icmp6_InErrors",   "Icmp6_InMsgs",
    "Icmp6_OutMsgs",   "IpExt_InOctets",  "IpExt_OutOctets",  "Ip_Forwarding",    "Ip6_InOctets",
    "Ip6_OutOctets",   "TcpExt_ListenDrops", "TcpExt_ListenOverflows", "TcpExt_SyncookiesFailed",
    "TcpExt_SyncookiesRecv", "TcpExt_SyncookiesSent", "TcpExt_TCPSynRetrans", "TcpExt_TCPTimeouts",
    "Tcp_ActiveOpens", "Tcp_CurrEstab",   "Tcp_InErrs",       "Tcp_InSegs",       "Tcp_OutRsts",
    "Tcp_OutSegs",     "Tcp_PassiveOpens", "Tcp_RetransSegs", "Udp6_InDatagrams", "Udp6_InErrors",
    "Udp6_NoPorts",    "Udp6_OutDatagrams", "Udp6_RcvbufErrors", "Udp6_SndbufErrors", "UdpLite6_InErrors",
    "UdpLite_InErrors", "Udp_InDatagrams", "Udp_InErrors",    "Udp_NoPorts",      "Udp_OutDatagrams",
    "Udp_RcvbufErrors", "Udp_SndbufErrors"};

const std::vector<std::string> kCollectors{
    "arp",      "bcache",    "bonding",   "btrfs",     "conntrack", "cpu",       "cpufreq",   "diskstats",
    "dmi",      "edac",      "entropy",   "fibrechannel", "filefd", "filesystem", "hwmon",    "infiniband",
    "ipvs",     "loadavg",   "mdadm",     "meminfo",   "netclass",  "netdev",    "netstat",   "nfs",
    "nfsd",     "nvme",      "os",        "powersupplyclass", "pressure", "rapl", "schedstat", "selinux",
    "sockstat", "softnet",   "stat",      "tapestats", "textfile",  "thermal_zone", "time",    "timex",
    "udp_queues", "uname",   "vmstat",    "xfs",       "zfs"};

const std::vector<Labels> kMounts{
    {{"device", "/dev/mmcblk0p2"}, {"fstype", "ext4"}, {"mountpoint", "/"}},
    {{"device", "/dev/mmcblk0p1"}, {"fstype", "vfat"}, {"mountpoint", "/boot/firmware"}},
    {{"device", "/dev/sda1"}, {"fstype", "ext4"}, {"mountpoint", "/var/lib/roadbot/video"}},
    {{"device", "tmpfs"}, {"fstype", "tmpfs"}, {"mountpoint", "/run"}},
    {{"device", "tmpfs"}, {"fstype", "tmpfs"}, {"mountpoint", "/run/lock"}},
    {{"device", "tmpfs"}, {"fstype", "tmpfs"}, {"mountpoint", "/run/user/1000"}},
    {{"device", "overlay"}, {"fstype", "overlay"}, {"mountpoint", "/var/lib/docker/overlay2/merged"}},
    {{"device", "/dev/sda1"}, {"fstype", "ext4"}, {"mountpoint", "/var/lib/roadbot/logs"}}};

using Built = FamilyBuilder::Built;

std::vector<Built> allowlisted_candidates(FamilyBuilder& fb) {
  std::vector<Built> cpu_power;
  cpu_power.push_back(fb.counter("node_cpu_seconds_total", "Seconds the CPUs spent in each mode.", [] {
    std::vector<Labels> out;
    for (const auto& c : kCpus)
      for (const auto& m : kCpuModes) out.push_back({{"cpu", c}, {"mode", m}});
    return out;
  }(), 1e5));
  cpu_power.push_back(fb.counter("node_cpu_guest_seconds_total",
                                 "Seconds the CPUs spent in guests (VMs) for each mode.", [] {
                                   std::vector<Labels> out;
                                   for (const auto& c : kCpus)
                                     for (const auto* m : {"nice", "user"}) out.push_back({{"cpu", c}, {"mode", m}});
                                   return out;
                                 }(), 1e1));
  cpu_power.push_back(fb.gauge("node_cpu_scaling_frequency_hertz", "Current scaled CPU thread frequency in hertz.",
                               per("cpu", kCpus), 1.5e9, 0));
  cpu_power.push_back(fb.gauge("node_cpu_scaling_frequency_max_hertz", "Maximum scaled CPU thread frequency in hertz.",
                               per("cpu", kCpus), 1.8e9, 0));
  cpu_power.push_back(fb.gauge("node_cpu_scaling_frequency_min_hertz", "Minimum scaled CPU thread frequency in hertz.",
                               per("cpu", kCpus), 6e8, 0));
  cpu_power.push_back(fb.gauge("node_power_supply_online", "online value of /sys/class/power_supply/<power_supply>.",
                               one({{"power_supply", "rpi-poe"}}), 1.0, 0));
  cpu_power.push_back(fb.gauge("node_power_supply_voltage_volt",
                               "voltage_now value of /sys/class/power_supply/<power_supply>.",
                               one({{"power_supply", "rpi-poe"}}), 5.1));
  cpu_power.push_back(fb.gauge("node_power_supply_current_ampere",
                               "current_now value of /sys/class/power_supply/<power_supply>.",
                               one({{"power_supply", "rpi-poe"}}), 2.5));
  cpu_power.push_back(fb.constant("node_power_supply_info", "info of /sys/class/power_supply/<power_supply>.",
                                  MetricKind::Gauge,
                                  {{{{"power_supply", "rpi-poe"}, {"type", "Mains"}}, 1.0}}));

  std::vector<Built> memory, disk, network;
  for (const auto& m : kMeminfo) {
    memory.push_back(fb.gauge("node_memory_" + m + "_bytes", "Memory information field " + m + "_bytes.", one(),
                              4e9, 0));
  }
  for (const auto& [stem, help] : kDiskStats) {
    disk.push_back(fb.counter("node_disk_" + stem, help, per("device", kDisks), 1e5));
  }
  for (const auto& stem : kNetStats) {
    network.push_back(fb.counter("node_network_" + stem, "Network device statistic " + stem + ".",
                                 per("device", kIfaces), 1e6));
  }

  // CPU and power first, then the large groups interleaved so that every
  // prefix is represented whatever the size budget.
  std::vector<Built> out = std::move(cpu_power);
  for (std::size_t i = 0; i < std::max({memory.size(), disk.size(), network.size()}); ++i) {
    if (i < memory.size()) out.push_back(std::move(memory[i]));
    if (i < disk.size()) out.push_back(std::move(disk[i]));
    if (i < network.size()) out.push_back(std::move(network[i]));
  }
  return out;
}

std::vector<Built> runtime_families(FamilyBuilder& fb) {
  std::vector<Built> out;
  out.push_back(fb.constant("go_gc_duration_seconds", "A summary of the pause duration of garbage collection cycles.",
                            MetricKind::Summary,
                            {{{{"quantile", "0"}}, 2.4e-05},
                             {{{"quantile", "0.25"}}, 4.5e-05},
                             {{{"quantile", "0.5"}}, 6.1e-05},
                             {{{"quantile", "0.75"}}, 0.000103},
                             {{{"quantile", "1"}}, 0.002406},
                             {{}, 0.116352},
                             {{}, 1387}},
                            {"", "", "", "", "", "_sum", "_count"}));
  out.push_back(fb.gauge("go_goroutines", "Number of goroutines that currently exist.", one(), 12, 0));
  out.push_back(fb.constant("go_info", "Information about the Go environment.", MetricKind::Gauge,
                            {{{{"version", "go1.19.3"}}, 1}}));
  const std::vector<std::pair<std::string, std::string>> memstats{
      {"alloc_bytes", "Number of bytes allocated and still in use."},
      {"alloc_bytes_total", "Total number of bytes allocated, even if freed."},
      {"buck_hash_sys_bytes", "Number of bytes used by the profiling bucket hash table."},
      {"frees_total", "Total number of frees."},
      {"gc_sys_bytes", "Number of bytes used for garbage collection system metadata."},
      {"heap_alloc_bytes", "Number of heap bytes allocated and still in use."},
      {"heap_idle_bytes", "Number of heap bytes waiting to be used."},
      {"heap_inuse_bytes", "Number of heap bytes that are in use."},
      {"heap_objects", "Number of allocated objects."},
      {"heap_released_bytes", "Number of heap bytes released to OS."},
      {"heap_sys_bytes", "Number of heap bytes obtained from system."},
      {"last_gc_time_seconds", "Number of seconds since 1970 of last garbage collection."},
      {"lookups_total", "Total number of pointer lookups."},
      {"mallocs_total", "Total number of mallocs."},
      {"mcache_inuse_bytes", "Number of bytes in use by mcache structures."},
      {"mcache_sys_bytes", "Number of bytes used for mcache structures obtained from system."},
      {"mspan_inuse_bytes", "Number of bytes in use by mspan structures."},
      {"mspan_sys_bytes", "Number of bytes used for mspan structures obtained from system."},
      {"next_gc_bytes", "Number of heap bytes when next garbage collection will take place."},
      {"other_sys_bytes", "Number of bytes used for other system allocations."},
      {"stack_inuse_bytes", "Number of bytes in use by the stack allocator."},
      {"stack_sys_bytes", "Number of bytes obtained from system for stack allocator."},
      {"sys_bytes", "Number of bytes obtained from system."}};
  for (const auto& [stem, help] : memstats) {
    if (stem.ends_with("_total"))
      out.push_back(fb.counter("go_memstats_" + stem, help, one(), 1e6));
    else
      out.push_back(fb.gauge("go_memstats_" + stem, help, one(), 4e6, 0));
  }
  out.push_back(fb.gauge("go_threads", "Number of OS threads created.", one(), 9, 0));
  out.push_back(fb.counter("process_cpu_seconds_total", "Total user and system CPU time spent in seconds.", one(), 1e3));
  out.push_back(fb.gauge("process_max_fds", "Maximum number of open file descriptors.", one(), 1048576, 0));
  out.push_back(fb.gauge("process_open_fds", "Number of open file descriptors.", one(), 12, 0));
  out.push_back(fb.gauge("process_resident_memory_bytes", "Resident memory size in bytes.", one(), 2e7, 0));
  out.push_back(fb.gauge("process_start_time_seconds", "Start time of the process since unix epoch in seconds.",
                         one(), 1.67e9, 0));
  out.push_back(fb.gauge("process_virtual_memory_bytes", "Virtual memory size in bytes.", one(), 7e8, 0));
  out.push_back(fb.gauge("process_virtual_memory_max_bytes", "Maximum amount of virtual memory available in bytes.",
                         one(), 1.8e19, 0));
  out.push_back(fb.counter("promhttp_metric_handler_requests_total",
                           "Total number of scrapes by HTTP status code.",
                           per("code", {"200", "500", "503"}), 1e3));
  out.push_back(fb.gauge("promhttp_metric_handler_requests_in_flight",
                         "Current number of scrapes being served.", one(), 1, 0));
  return out;
}

std::vector<Built> filler_candidates(FamilyBuilder& fb) {
  std::vector<Built> out;
  const std::vector<std::pair<std::string, std::string>> fs{
      {"avail_bytes", "Filesystem space available to non-root users in bytes."},
      {"device_error", "Whether an error occurred while getting statistics for the given device."},
      {"files", "Filesystem total file nodes."},
      {"files_free", "Filesystem total free file nodes."},
      {"free_bytes", "Filesystem free space in bytes."},
      {"readonly", "Filesystem read-only status."},
      {"size_bytes", "Filesystem size in bytes."}};
  for (const auto& [stem, help] : fs) out.push_back(fb.gauge("node_filesystem_" + stem, help, kMounts, 3e10, 0));
  out.push_back(fb.gauge("node_scrape_collector_duration_seconds",
                         "node_exporter: Duration of a collector scrape.", per("collector", kCollectors), 0.02, 6));
  out.push_back(fb.gauge("node_scrape_collector_success", "node_exporter: Whether a collector succeeded.",
                         per("collector", kCollectors), 1, 0));
  for (const auto& s : kNetstat)
    out.push_back(fb.counter("node_netstat_" + s, "Statistic " + s + ".", one(), 1e5));
  for (const auto& s : kVmstat)
    out.push_back(fb.counter("node_vmstat_" + s, "/proc/vmstat information field " + s + ".", one(), 1e5));
  for (const auto* s : {"FRAG_inuse", "FRAG_memory", "RAW_inuse", "TCP_alloc", "TCP_inuse", "TCP_mem",
                        "TCP_mem_bytes", "TCP_orphan", "TCP_tw", "UDPLITE_inuse", "UDP_inuse", "UDP_mem",
                        "UDP_mem_bytes", "sockets_used"}) {
    out.push_back(fb.gauge(std::string("node_sockstat_") + s, std::string("Number of ") + s + " sockets in state.",
                           one(), 40, 0));
  }
  for (const auto* s : {"estimated_error_seconds", "frequency_adjustment_ratio", "loop_time_constant",
                        "maxerror_seconds", "offset_seconds", "pps_calibration_total", "pps_error_total",
                        "pps_frequency_hertz", "pps_jitter_seconds", "pps_jitter_total", "pps_shift_seconds",
                        "pps_stability_exceeded_total", "pps_stability_hertz", "status", "sync_status",
                        "tai_offset_seconds", "tick_seconds"}) {
    out.push_back(fb.gauge(std::string("node_timex_") + s, "Timex kernel clock discipline value.", one(), 50, 3));
  }
  out.push_back(fb.gauge("node_hwmon_temp_celsius", "Hardware monitor for temperature (input)",
                         per("sensor", {"temp1", "temp2"}, {{"chip", "thermal_thermal_zone0"}}), 60));
  out.push_back(fb.gauge("node_thermal_zone_temp", "Zone temperature in Celsius",
                         one({{"type", "cpu-thermal"}, {"zone", "0"}}), 60));
  for (const auto* s : {"load1", "load5", "load15"})
    out.push_back(fb.gauge(std::string("node_") + s, std::string(s) + " load average.", one(), 3));
  out.push_back(fb.counter("node_context_switches_total", "Total number of context switches.", one(), 1e7));
  out.push_back(fb.counter("node_forks_total", "Total number of forks.", one(), 1e5));
  out.push_back(fb.counter("node_intr_total", "Total number of interrupts serviced.", one(), 1e7));
  out.push_back(fb.gauge("node_procs_blocked", "Number of processes blocked waiting for I/O to complete.", one(), 2, 0));
  out.push_back(fb.gauge("node_procs_running", "Number of processes in runnable state.", one(), 4, 0));
  out.push_back(fb.gauge("node_boot_time_seconds", "Node boot time, in unixtime.", one(), 1.67e9, 0));
  out.push_back(fb.gauge("node_time_seconds", "System time in seconds since epoch (1970).", one(), 1.67e9, 3));
  out.push_back(fb.gauge("node_entropy_available_bits", "Bits of available entropy.", one(), 256, 0));
  out.push_back(fb.gauge("node_entropy_pool_size_bits", "Bits of entropy pool.", one(), 256, 0));
  out.push_back(fb.gauge("node_filefd_allocated", "File descriptor statistics: allocated.", one(), 2000, 0));
  out.push_back(fb.gauge("node_filefd_maximum", "File descriptor statistics: maximum.", one(), 9e18, 0));
  out.push_back(fb.gauge("node_nf_conntrack_entries", "Number of currently allocated flow entries for connection tracking.",
                         one(), 200, 0));
  out.push_back(fb.gauge("node_nf_conntrack_entries_limit", "Maximum size of connection tracking table.", one(), 65536, 0));
  for (const auto* s : {"cpu_waiting_seconds_total", "io_stalled_seconds_total", "io_waiting_seconds_total",
                        "memory_stalled_seconds_total", "memory_waiting_seconds_total"}) {
    out.push_back(fb.counter(std::string("node_pressure_") + s, "Total time in seconds that processes have waited.",
                             one(), 1e2));
  }
  for (const auto* s : {"running_seconds_total", "timeslices_total", "waiting_seconds_total"}) {
    out.push_back(fb.counter(std::string("node_schedstat_") + s, "Number of seconds CPU spent in scheduler state.",
                             per("cpu", kCpus), 1e4));
  }
  for (const auto* s : {"dropped_total", "processed_total", "times_squeezed_total"}) {
    out.push_back(fb.counter(std::string("node_softnet_") + s, "Number of softnet packets, partitioned by CPU.",
                             per("cpu", kCpus), 1e4));
  }
  out.push_back(fb.constant("node_uname_info", "Labeled system information as provided by the uname system call.",
                            MetricKind::Gauge,
                            {{{{"domainname", "(none)"}, {"machine", "aarch64"}, {"nodename", "roadbot-edge"},
                               {"release", "5.15.0-1012-raspi"}, {"sysname", "Linux"},
                               {"version", "#14-Ubuntu SMP PREEMPT"}},
                              1}}));
  out.push_back(fb.constant("node_os_info", "A metric with a constant '1' value labeled by build_id and version.",
                            MetricKind::Gauge,
                            {{{{"id", "ubuntu"}, {"name", "Ubuntu"}, {"pretty_name", "Ubuntu 22.04.1 LTS"},
                               {"version", "22.04.1 LTS (Jammy Jellyfish)"}, {"version_id", "22.04"}},
                              1}}));
  out.push_back(fb.constant("node_exporter_build_info",
                            "A metric with a constant '1' value labeled by version and goversion.", MetricKind::Gauge,
                            {{{{"branch", "HEAD"}, {"goversion", "go1.19.3"}, {"revision", "a2321e7"},
                               {"version", "1.5.0"}},
                              1}}));
  out.push_back(fb.gauge("node_textfile_scrape_error", "1 if there was an error opening or reading a file.", one(), 1, 0));
  out.push_back(fb.gauge("node_arp_entries", "ARP entries by device", per("device", {"eth0", "wwan0"}), 4, 0));
  return out;
}

std::size_t encoded_size(const expo::MetricFamily& f, const expo::ReductionPolicy& p) {
  std::string buf;
  expo::encode_family(f, p, buf);
  return buf.size();
}

}  // namespace

ExpositionCorpus::ExpositionCorpus(CorpusConfig cfg) : cfg_(cfg) {
  if (cfg_.target_bytes == 0) throw ScenarioConfigError("corpus target_bytes must be positive");
  FamilyBuilder fb(cfg_.seed);
  const auto keep_all = expo::ReductionPolicy::keep_all();
  expo::ReductionPolicy stripped;
  stripped.strip_help = true;

  std::vector<Built> chosen;
  std::size_t total = 0;
  auto take = [&](Built b) {
    total += encoded_size(b.family, keep_all);
    chosen.push_back(std::move(b));
  };

  const double allow_budget = cfg_.allowlisted_share * static_cast<double>(cfg_.target_bytes);
  std::size_t allow_bytes = 0;
  for (auto& b : allowlisted_candidates(fb)) {
    if (static_cast<double>(allow_bytes) >= allow_budget) break;
    allow_bytes += encoded_size(b.family, stripped);
    take(std::move(b));
  }
  for (auto& b : runtime_families(fb)) {
    if (total + encoded_size(b.family, keep_all) > cfg_.target_bytes) continue;
    take(std::move(b));
  }
  for (auto& b : filler_candidates(fb)) {
    if (total + encoded_size(b.family, keep_all) > cfg_.target_bytes) continue;
    take(std::move(b));
  }

  std::sort(chosen.begin(), chosen.end(),
            [](const Built& a, const Built& b) { return a.family.name < b.family.name; });
  for (auto& b : chosen) {
    std::vector<ValueModel> m;
    for (std::size_t i = 0; i < b.family.samples.size(); ++i)
      m.push_back(ValueModel{b.counter[i], b.base[i], b.rate[i], b.phase[i], b.decimals[i], b.constant[i]});
    models_.push_back(std::move(m));
    layout_.families.push_back(std::move(b.family));
  }
  layout_.raw_size_bytes = expo::encode_exposition(layout_, keep_all).size();
}

std::string ExpositionCorpus::emit(std::uint64_t emission) const {
  expo::ExpositionDocument doc = layout_;
  const double e = static_cast<double>(emission);
  for (std::size_t f = 0; f < doc.families.size(); ++f) {
    for (std::size_t s = 0; s < doc.families[f].samples.size(); ++s) {
      const ValueModel& m = models_[f][s];
      double v = m.base;
      if (!m.constant) v = m.counter ? m.base + m.rate * e : m.base + m.rate * std::sin(m.phase + 0.07 * e);
      const double scale = std::pow(10.0, m.decimals);
      doc.families[f].samples[s].value = std::round(v * scale) / scale;
    }
  }
  return expo::encode_exposition(doc, expo::ReductionPolicy::keep_all());
}

const std::vector<std::string>& reduced_allowlist() {
  static const std::vector<std::string> prefixes{"node_cpu", "node_memory", "node_disk", "node_network",
                                                 "node_power_supply"};
  return prefixes;
}

expo::ReductionPolicy reduced_policy() {
  expo::ReductionPolicy p;
  p.strip_help = true;
  p.family_allowlist = reduced_allowlist();
  p.interval_scale = 2.0;
  return p;
}

// ---------------------------------------------------------------------------
// Logs

namespace {

const std::vector<std::string> kWords{
    "uplink",  "downlink", "handover", "cell",    "signal",  "beam",   "sector",  "bearer",
    "roadside", "asset",   "camera",   "frame",   "segment", "upload", "queue",   "buffer",
    "bin",     "lift",     "route",    "stop",    "detect",  "sign",   "pothole", "graffiti",
    "latency", "probe",    "server",   "gateway", "modem",   "gnss",   "fix",     "heading"};

}  // namespace

LogGenerator::LogGenerator(std::string device_id, std::uint64_t seed, std::size_t line_bytes,
                           archive::BoundingBox area)
    : device_id_(std::move(device_id)), rng_(seed), line_bytes_(line_bytes), area_(area) {
  std::uniform_real_distribution<double> lon(area_.min_lon, area_.max_lon);
  std::uniform_real_distribution<double> lat(area_.min_lat, area_.max_lat);
  position_ = {lon(rng_), lat(rng_)};
}

std::string LogGenerator::next_line(std::int64_t now_ms) {
  std::normal_distribution<double> step(0.0, 0.0004);
  position_.lon = std::clamp(position_.lon + step(rng_), area_.min_lon, area_.max_lon);
  position_.lat = std::clamp(position_.lat + step(rng_), area_.min_lat, area_.max_lat);
  std::lognormal_distribution<double> latency(std::log(18.0), 0.4);
  std::lognormal_distribution<double> throughput(std::log(220.0), 0.5);
  std::uniform_real_distribution<double> speed(0.0, 55.0);
  std::uniform_int_distribution<int> cell(1, 40);
  std::uniform_int_distribution<int> rsrp(-118, -70);
  const double lat_ms = latency(rng_);
  const char* level = lat_ms > 40.0 ? "WARN" : "INFO";
  const std::string target = seq_ % 3 == 0 ? "probe.aws-syd" : seq_ % 3 == 1 ? "probe.gcp-mel" : "probe.edge-bmk";

  std::string line = fmt::format(
      "{} {} 5G sample recorded seq={} device={} target={} latency_ms={:.2f} throughput_mbps={:.2f} "
      "lon={:.6f} lat={:.6f} speed_kmh={:.1f} cell_id={} rsrp_dbm={} note=",
      now_ms, level, seq_, device_id_, target, lat_ms, throughput(rng_), position_.lon, position_.lat, speed(rng_),
      cell(rng_), rsrp(rng_));
  ++seq_;
  // Pad with words; the last one is cut to land exactly on the size.
  std::uniform_int_distribution<std::size_t> word(0, kWords.size() - 1);
  bool first = true;
  while (line.size() + 1 < line_bytes_) {
    if (!first) line.push_back(' ');
    first = false;
    line += kWords[word(rng_)];
  }
  if (line.size() + 1 > line_bytes_ && line_bytes_ > 0) line.resize(line_bytes_ - 1);
  while (!line.empty() && line.back() == ' ') line.back() = 'x';
  line.push_back('\n');
  return line;
}

// ---------------------------------------------------------------------------
// Traces

TraceGenerator::TraceGenerator(std::string device_id, std::uint64_t seed, std::size_t target_bytes)
    : device_id_(std::move(device_id)), rng_(seed), target_bytes_(target_bytes) {}

std::vector<TraceSpan> TraceGenerator::next_trace(std::int64_t now_us) {
  const TraceId id{rng_(), rng_()};
  std::uniform_int_distribution<std::int64_t> dur(200, 4000);
  std::uniform_int_distribution<int> lookups(2, 4);
  std::vector<TraceSpan> spans;
  auto span = [&](std::optional<std::uint64_t> parent, const char* service, const char* op, std::int64_t start,
                  std::int64_t duration) -> TraceSpan& {
    TraceSpan s;
    s.trace_id = id;
    s.span_id = rng_() | 1;
    s.parent_span_id = parent;
    s.service = service;
    s.operation = op;
    s.start = start;
    s.duration = duration;
    s.device_id = device_id_;
    spans.push_back(std::move(s));
    return spans.back();
  };

  const std::size_t root_index = 0;
  span(std::nullopt, "roadbot-report", "aggregate_by_region", now_us, 0);
  const std::uint64_t root_id = spans[root_index].span_id;
  std::int64_t t = now_us + 50;
  {
    auto& load = span(root_id, "roadbot-report", "load", t, dur(rng_));
    load.attributes = canonical_labels({{"samples", std::to_string(900 + rng_() % 200)}});
    t = load.end() + 20;
  }
  const int n = lookups(rng_);
  for (int i = 0; i < n; ++i) {
    const std::int64_t d = dur(rng_) * 3;
    const std::uint64_t geo = span(root_id, "roadbot-report", "geocode", t, d).span_id;
    span(geo, "mapbox", "reverse_geocode", t + 30, d - 60);
    t += d + 10;
  }
  {
    const std::int64_t d = dur(rng_);
    const std::uint64_t agg = span(root_id, "archive-geo", "aggregate.accelerated", t, d).span_id;
    span(agg, "archive-geo", "point_in_polygon", t + 10, d - 20);
    t += d + 10;
  }
  spans[root_index].duration = t - now_us;
  spans[root_index].attributes = canonical_labels({{"region_set", "brimbank-suburbs"}, {"pad", ""}});

  std::size_t total = 0;
  for (const auto& s : spans) total += encode_payload(s).size();
  if (total < target_bytes_) {
    for (auto& [k, v] : spans[root_index].attributes) {
      if (k == "pad") v.assign(target_bytes_ - total, 'p');
    }
  }
  return spans;
}

// ---------------------------------------------------------------------------
// Workload file

const std::vector<std::string>& workload_keys() {
  static const std::vector<std::string> keys{
      "devices",          "duration_s",     "seed",           "metric.payload_bytes", "metric.interval_s",
      "log.line_bytes",   "log.interval_s", "trace.bytes",    "trace.interval_s",     "payload.bytes_per_s"};
  return keys;
}

WorkloadSpec workload_from(const KvConfig& kv) {
  WorkloadSpec w;
  auto size = [&](const char* key, std::size_t fallback) {
    const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ScenarioConfigError(std::string(key) + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  w.devices = size("devices", w.devices);
  w.duration_s = kv.get_double("duration_s", w.duration_s);
  w.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(w.seed)));
  w.metric_payload_bytes = size("metric.payload_bytes", w.metric_payload_bytes);
  w.metric_interval_s = kv.get_double("metric.interval_s", w.metric_interval_s);
  w.log_line_bytes = size("log.line_bytes", w.log_line_bytes);
  w.log_interval_s = kv.get_double("log.interval_s", w.log_interval_s);
  w.trace_bytes = size("trace.bytes", w.trace_bytes);
  w.trace_interval_s = kv.get_double("trace.interval_s", w.trace_interval_s);
  w.payload_bytes_per_s = kv.get_double("payload.bytes_per_s", w.payload_bytes_per_s);
  w.validate();
  return w;
}

}  // namespace odlc::harness
