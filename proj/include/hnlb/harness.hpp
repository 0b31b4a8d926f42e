#pragma once

// Experiment driver: single runs, maximum-lossless-rate search and parameter
// sweeps, with CSV result files that embed the resolved configuration.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hnlb/cost_model.hpp"
#include "hnlb/nic.hpp"
#include "hnlb/pipeline.hpp"
#include "hnlb/trafficgen.hpp"

namespace hnlb {

struct ExperimentConfig {
  Mode mode = Mode::HNLB;
  std::uint32_t nb_conn = 1;
  std::uint32_t pkt_size = 64;
  double rate = 1e6;  // offered packets per second; 0 means idle
  std::uint64_t seed = 1;
  // Measured packets per run; the duration follows from the rate unless
  // duration_s is set explicitly.
  std::uint64_t packets = 200'000;
  double duration_s = 0.0;
  double idle_duration_s = 1e-3;  // observation time when rate == 0
  ConnectionScheduler scheduler = ConnectionScheduler::Uniform;
  Vip vip{Ipv4::from_octets(42, 3, 4, 5), 443, Protocol::TCP};
  std::uint32_t n_dips = 0;  // 0: one per queue

  NicConfig nic;
  std::uint32_t burst_max = 32;
  CostModel costs;
  std::uint64_t frequency_hz = 2'200'000'000ULL;

  // Open every connection at warmup_rate before measuring, so the measured
  // window sees established connections only.
  bool warmup = true;
  double warmup_rate = 1e6;
  double window_ns = 0.0;  // utilization sub-window, 0 = whole run
  double gen_max_rate = 0.0;  // traffic generator ceiling, 0 = none
  std::uint32_t repetitions = 1;

  std::uint32_t dip_count() const { return n_dips == 0 ? nic.n_queues : n_dips; }
  double measured_duration_s() const;
  WorkloadSpec workload() const;
};

// Throws ConfigError describing the first violated constraint.
void validate(const ExperimentConfig& cfg);

// Flat key/value view of every setting, in a fixed order.
std::vector<std::pair<std::string, std::string>> to_key_values(const ExperimentConfig& cfg);
// Throws ConfigError on an unknown key or unparsable value.
void apply_key_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
// "key = value" lines, '#' comments.
void apply_config_text(ExperimentConfig& cfg, std::istream& in);
void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path);

VipTable build_vip_table(const ExperimentConfig& cfg);

struct MetricRow {
  std::uint64_t window_start_ns = 0;
  UtilCounters counters;
  double util = 0.0;
  double util_plus = 0.0;
};

struct ExperimentReport {
  Mode mode = Mode::HNLB;
  std::uint32_t nb_conn = 0;
  std::uint32_t pkt_size = 0;
  double offered_rate = 0.0;
  double forwarded_rate = 0.0;
  double loss_fraction = 0.0;
  double util = 0.0;
  double util_plus = 0.0;
  std::uint64_t hw_rules_used = 0;
  double nic_latency_us = 0.0;
  std::uint64_t generated = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;
  std::uint64_t residual = 0;
  std::vector<std::uint64_t> queue_drops;
  UtilCounters counters;
  std::vector<MetricRow> windows;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);

struct RateSearch {
  double lo = 1e5;
  double hi = 3e7;
  double tolerance = 0.001;  // relative
};

struct SearchResult {
  double rate = 0.0;
  ExperimentReport report;  // at rate
  std::uint32_t probes = 0;
};

// Bisection for the largest offered rate without a single drop, resolved to
// tolerance * lo. hi is capped by cfg.gen_max_rate. Throws SearchRangeError
// when lo already loses packets.
SearchResult find_max_lossless_rate(const ExperimentConfig& cfg, const RateSearch& search);

struct SweepPoint {
  ExperimentConfig cfg;
  std::optional<RateSearch> search;  // report at the max lossless rate
};

// Validates every point before running any; rows come back in grid order.
std::vector<ExperimentReport> sweep_serial(const std::vector<SweepPoint>& grid);
// Same rows, grid points spread over OpenMP threads.
std::vector<ExperimentReport> sweep_parallel(const std::vector<SweepPoint>& grid);

// CSV output. Header lines are written verbatim behind "# ".
std::string report_csv_header();
std::string report_csv_row(const ExperimentReport& r);
void write_report_file(std::ostream& out, const std::vector<std::string>& header_lines,
                       const std::vector<ExperimentReport>& rows, bool with_windows = false);
std::vector<std::string> config_header_lines(const ExperimentConfig& cfg);

}  // namespace hnlb
