#pragma once

// Simulated CPU: a cycle counter plus per-operation cycle costs. The only
// size-dependent cost is the software table lookup, which degrades once the
// table no longer fits in cache.

#include <cstdint>
#include <string_view>

namespace hnlb {

using Cycles = std::uint64_t;

class CycleClock {
 public:
  explicit CycleClock(std::uint64_t frequency_hz = 2'200'000'000ULL) : frequency_hz_(frequency_hz) {}

  Cycles now() const { return now_; }
  void advance(Cycles c) { now_ += c; }
  // Moves forward to t; earlier targets are ignored.
  void advance_to(Cycles t) {
    if (t > now_) now_ = t;
  }
  std::uint64_t frequency_hz() const { return frequency_hz_; }

  // First cycle at or after the given simulated nanosecond.
  Cycles cycles_at_ns(std::uint64_t ns) const;
  // Last nanosecond boundary at or before the given cycle.
  std::uint64_t ns_at_cycles(Cycles c) const;

 private:
  Cycles now_ = 0;
  std::uint64_t frequency_hz_;
};

inline Cycles get_cycles(const CycleClock& clock) { return clock.now(); }

enum class OpKind : std::uint8_t {
  Hash,
  LookupHit,
  LookupMiss,
  DipSelect,
  SwInstall,
  FdInstall,
  Rewrite,
  Forward,
  Poll,
};

std::string_view to_string(OpKind op);
// Throws Errc::InvalidOp for names outside the cost set.
OpKind parse_op_kind(std::string_view name);

struct CostModel {
  Cycles c_hash = 9;
  Cycles c_lookup_hit = 6;
  Cycles c_mem_penalty = 74;
  Cycles c_dip_select = 15;
  Cycles c_sw_install = 40;
  Cycles c_fd_install = 500;
  Cycles c_rewrite = 25;
  Cycles c_forward = 143;
  Cycles c_poll = 15;
  std::uint64_t cache_entries = 512;

  // The uncalibrated reference constants.
  static CostModel uncalibrated();

  // Fraction of lookups that leave the cache: max(0, 1 - cache_entries / n).
  double miss_fraction(std::uint64_t table_size) const;
  // c_lookup_hit + c_mem_penalty * miss_fraction, rounded to whole cycles.
  Cycles lookup_cost(std::uint64_t table_size) const;
  Cycles cost_of(OpKind op, std::uint64_t table_size) const;

  friend bool operator==(const CostModel&, const CostModel&) = default;
};

// Advances the clock by the cost of op (lookups priced at the current
// software table size) and returns the amount charged.
Cycles charge(CycleClock& clock, const CostModel& model, OpKind op, std::uint64_t table_size = 0);

// Throughput anchors the default constants are fitted to.
struct CalibrationTargets {
  double frequency_hz = 2.2e9;
  double slb_best_pps = 12e6;   // one connection, one queue
  double hnlb_best_pps = 13e6;  // one connection, one DIP queue
  double gain_at_scale = 1.5;   // HNLB / SLB rate at scale_connections
  std::uint64_t scale_connections = 8000;
  std::uint32_t scale_queues = 10;
  std::uint32_t burst = 32;
};

// Closed-form fit on top of base:
//  * c_forward so a full-burst HNLB packet costs frequency / hnlb_best_pps,
//  * c_hash + c_lookup_hit (split in base's proportion) to the remaining
//    best-case SLB gap,
//  * c_mem_penalty so SLB at scale_connections is gain_at_scale slower than
//    HNLB with scale_queues busy DIP queues.
CostModel calibrate(const CalibrationTargets& targets, const CostModel& base = CostModel::uncalibrated());

// Steady-state per-packet costs with full bursts, fractional poll share
// included; the formulas the calibration inverts.
double slb_packet_cycles(const CostModel& m, std::uint64_t table_size, std::uint32_t burst);
double hnlb_packet_cycles(const CostModel& m, std::uint32_t polled_queues, std::uint32_t busy_queues,
                          std::uint32_t burst);

}  // namespace hnlb
