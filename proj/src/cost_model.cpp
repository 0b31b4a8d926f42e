#include "hnlb/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hnlb/error.hpp"

namespace hnlb {

Cycles CycleClock::cycles_at_ns(std::uint64_t ns) const {
  const unsigned __int128 scaled = static_cast<unsigned __int128>(ns) * frequency_hz_;
  return static_cast<Cycles>((scaled + 999'999'999U) / 1'000'000'000U);
}

std::uint64_t CycleClock::ns_at_cycles(Cycles c) const {
  const unsigned __int128 scaled = static_cast<unsigned __int128>(c) * 1'000'000'000U;
  return static_cast<std::uint64_t>(scaled / frequency_hz_);
}

std::string_view to_string(OpKind op) {
  switch (op) {
    case OpKind::Hash: return "hash";
    case OpKind::LookupHit: return "lookup_hit";
    case OpKind::LookupMiss: return "lookup_miss";
    case OpKind::DipSelect: return "dip_select";
    case OpKind::SwInstall: return "sw_install";
    case OpKind::FdInstall: return "fd_install";
    case OpKind::Rewrite: return "rewrite";
    case OpKind::Forward: return "forward";
    case OpKind::Poll: return "poll";
  }
  return "?";
}

OpKind parse_op_kind(std::string_view name) {
  for (auto op : {OpKind::Hash, OpKind::LookupHit, OpKind::LookupMiss, OpKind::DipSelect,
                  OpKind::SwInstall, OpKind::FdInstall, OpKind::Rewrite, OpKind::Forward,
                  OpKind::Poll}) {
    if (to_string(op) == name) return op;
  }
  throw Error(Errc::InvalidOp, std::string(name));
}

CostModel CostModel::uncalibrated() {
  CostModel m;
  m.c_hash = 30;
  m.c_lookup_hit = 20;
  m.c_mem_penalty = 300;
  m.c_dip_select = 15;
  m.c_sw_install = 40;
  m.c_fd_install = 500;
  m.c_rewrite = 25;
  m.c_forward = 40;
  m.c_poll = 15;
  m.cache_entries = 512;
  return m;
}

double CostModel::miss_fraction(std::uint64_t table_size) const {
  if (table_size <= cache_entries) return 0.0;
  return 1.0 - static_cast<double>(cache_entries) / static_cast<double>(table_size);
}

Cycles CostModel::lookup_cost(std::uint64_t table_size) const {
  return c_lookup_hit +
         static_cast<Cycles>(std::llround(static_cast<double>(c_mem_penalty) * miss_fraction(table_size)));
}

Cycles CostModel::cost_of(OpKind op, std::uint64_t table_size) const {
  switch (op) {
    case OpKind::Hash: return c_hash;
    case OpKind::LookupHit:
    case OpKind::LookupMiss: return lookup_cost(table_size);
    case OpKind::DipSelect: return c_dip_select;
    case OpKind::SwInstall: return c_sw_install;
    case OpKind::FdInstall: return c_fd_install;
    case OpKind::Rewrite: return c_rewrite;
    case OpKind::Forward: return c_forward;
    case OpKind::Poll: return c_poll;
  }
  throw Error(Errc::InvalidOp, "op kind " + std::to_string(static_cast<int>(op)));
}

Cycles charge(CycleClock& clock, const CostModel& model, OpKind op, std::uint64_t table_size) {
  const Cycles c = model.cost_of(op, table_size);
  clock.advance(c);
  return c;
}

double slb_packet_cycles(const CostModel& m, std::uint64_t table_size, std::uint32_t burst) {
  return static_cast<double>(m.c_poll) / burst + static_cast<double>(m.c_hash) +
         static_cast<double>(m.lookup_cost(table_size)) + static_cast<double>(m.c_rewrite) +
         static_cast<double>(m.c_forward);
}

double hnlb_packet_cycles(const CostModel& m, std::uint32_t polled_queues, std::uint32_t busy_queues,
                          std::uint32_t burst) {
  return static_cast<double>(m.c_poll) * polled_queues / (static_cast<double>(busy_queues) * burst) +
         static_cast<double>(m.c_rewrite) + static_cast<double>(m.c_forward);
}

CostModel calibrate(const CalibrationTargets& t, const CostModel& base) {
  if (t.slb_best_pps <= 0 || t.hnlb_best_pps <= t.slb_best_pps || t.burst == 0 ||
      t.scale_queues == 0 || t.gain_at_scale <= 1.0)
    throw Error(Errc::ConfigError, "calibration targets out of range");
  CostModel m = base;
  const double burst = t.burst;
  const double poll = static_cast<double>(m.c_poll);

  // HNLB best case round: empty poll of queue 0 + one full DIP-queue burst.
  const double hnlb_best = t.frequency_hz / t.hnlb_best_pps;
  const double fwd = hnlb_best - 2.0 * poll / burst - static_cast<double>(m.c_rewrite);
  if (fwd < 0) throw Error(Errc::ConfigError, "HNLB anchor unreachable with the given rewrite cost");
  m.c_forward = static_cast<Cycles>(std::llround(fwd));

  const double slb_best = t.frequency_hz / t.slb_best_pps;
  const double gap = slb_best - (poll / burst + static_cast<double>(m.c_rewrite) +
                                 static_cast<double>(m.c_forward));
  const auto match_cycles = static_cast<Cycles>(std::max<long long>(0, std::llround(gap)));
  const double base_match = static_cast<double>(base.c_hash + base.c_lookup_hit);
  const double hash_share = base_match > 0 ? static_cast<double>(base.c_hash) / base_match : 0.5;
  m.c_hash = static_cast<Cycles>(std::llround(static_cast<double>(match_cycles) * hash_share));
  m.c_lookup_hit = match_cycles - m.c_hash;

  const double hnlb_scale = hnlb_packet_cycles(m, t.scale_queues + 1, t.scale_queues, t.burst);
  const double slb_cached = slb_packet_cycles(m, 0, t.burst);
  const double miss = m.miss_fraction(t.scale_connections);
  if (miss <= 0) throw Error(Errc::ConfigError, "scale point fits in cache; penalty is unidentifiable");
  const double penalty = (t.gain_at_scale * hnlb_scale - slb_cached) / miss;
  m.c_mem_penalty = static_cast<Cycles>(std::max<long long>(0, std::llround(penalty)));
  return m;
}

}  // namespace hnlb
