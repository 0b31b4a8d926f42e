#pragma once

// The busy-polling receive loop of the load balancer in its two variants.
//
//   SLB   every packet lands in queue 0 and is hashed, looked up in the
//         software connection table and rewritten.
//   HNLB  the first packet of a connection still takes the software path,
//         which also installs an exact-match NIC rule steering the rest of
//         the connection to the queue encoding its DIP. Packets polled from
//         such a queue are rewritten without any hash or lookup.
//
// Everything runs on a simulated cycle clock; arrivals are fed to the NIC
// whenever the loop observes the clock (each poll, and before a rule lands).

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hnlb/cost_model.hpp"
#include "hnlb/metrics.hpp"
#include "hnlb/nic.hpp"
#include "hnlb/types.hpp"

namespace hnlb {

enum class Mode { SLB, HNLB };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

struct PipelineConfig {
  Mode mode = Mode::HNLB;
  std::uint32_t burst_max = 32;
  // Keep one ForwardRecord per forwarded packet.
  bool record_forwarding = false;
  // Keep the queue id of every poll, skipped idle polls included.
  bool record_polls = false;
  // Sub-window length for utilization reporting; 0 keeps one window.
  Cycles window_cycles = 0;
};

enum class PacketPath : std::uint8_t {
  FirstPacket,  // connection miss: DIP chosen, mapping installed
  SoftwareHit,  // queue 0, found in the software table
  DipQueue,     // steered by a hardware rule; DIP read off the queue id
};

struct ForwardRecord {
  FiveTuple tuple;  // as received
  Dip dip;
  PacketPath path;
  QueueId queue;
};

struct MetricWindow {
  Cycles start = 0;
  UtilCounters counters;
};

struct RunStats {
  std::uint64_t packets_in = 0;  // handed to the NIC
  std::uint64_t packets_forwarded = 0;
  std::uint64_t packets_dropped = 0;  // queue overflow + unknown VIP
  std::uint64_t unknown_vip_drops = 0;
  std::uint64_t residual = 0;  // still queued
  std::uint64_t hw_table_full = 0;
  std::vector<std::uint64_t> queue_drops;
  UtilCounters counters;
  std::vector<MetricWindow> windows;
  Cycles end_cycles = 0;
  std::vector<ForwardRecord> forward_log;
  std::vector<QueueId> poll_log;
};

struct StopCondition {
  // Without a bound the loop ends once the workload is exhausted and every
  // queue is empty; with one it keeps polling until the clock reaches it.
  std::optional<Cycles> until;
};

class LoadBalancer {
 public:
  // In HNLB mode queue i encodes the Dip with index i - 1, so every Dip index
  // (unique across all pools) must be below nic.n_queues. Throws ConfigError.
  LoadBalancer(const PipelineConfig& cfg, VipTable vips, const NicConfig& nic,
               const CostModel& costs, std::uint64_t frequency_hz = 2'200'000'000ULL);

  struct Routed {
    Dip dip;
    Packet packet;
  };

  // Software path for a connection miss. Returns nullopt (and counts a drop)
  // when the destination is not a known VIP. Throws ConsistencyViolation if
  // the connection is already known.
  std::optional<Routed> process_first_packet(const Packet& p);

  // Queue 0 path: hash, software lookup, then rewrite or fall through to the
  // first-packet path.
  std::optional<Packet> process_default_queue_packet(const Packet& p);

  // DIP queue path (HNLB only): rewrite to the queue's Dip, no matching cost.
  std::vector<Packet> process_dip_queue_burst(QueueId q, std::span<const Packet> burst);

  // The receive loop over a workload sorted by arrival time.
  RunStats run(std::span<const Packet> workload, StopCondition stop = {});

  // Starts a fresh measurement: counters, drop counts and logs are zeroed;
  // tables, rules and the clock carry over.
  void reset_measurement();

  const RunStats& stats() const { return stats_; }
  const UtilCounters& counters() const { return stats_.counters; }
  const CycleClock& clock() const { return clock_; }
  const ConnectionTable& connections() const { return connections_; }
  const EmulatedNic& nic() const { return nic_; }
  const PipelineConfig& config() const { return cfg_; }
  const CostModel& costs() const { return costs_; }
  const std::map<QueueId, Dip>& queue_to_dip() const { return queue_to_dip_; }
  UtilConfig util_config() const;

 private:
  void process_burst(QueueId q, std::span<const Packet> burst);
  Cycles charge(OpKind op);
  std::optional<Routed> route_new_connection(const Packet& p);
  void forward(const Packet& original, const Dip& dip, PacketPath path, QueueId q);
  void deliver_arrivals(Cycles now);
  Cycles arrival_cycles(const Packet& p) const { return clock_.cycles_at_ns(p.arrival_ns); }
  void close_window_if_due(Cycles now);
  void finish_stats();

  PipelineConfig cfg_;
  VipTable vips_;
  ConnectionTable connections_;
  EmulatedNic nic_;
  CostModel costs_;
  CycleClock clock_;
  std::map<QueueId, Dip> queue_to_dip_;

  Cycles cycles_last_ = 0;
  UtilCounters window_;
  Cycles window_start_ = 0;
  RunStats stats_;

  std::span<const Packet> feed_;
  std::size_t feed_next_ = 0;
  std::vector<Packet> burst_buf_;
};

}  // namespace hnlb
