#include "hnlb/pipeline.hpp"

#include <algorithm>
#include <unordered_set>

#include "hnlb/error.hpp"

namespace hnlb {

std::string_view to_string(Mode m) { return m == Mode::SLB ? "slb" : "hnlb"; }

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "slb" || s == "SLB") return Mode::SLB;
  if (s == "hnlb" || s == "HNLB") return Mode::HNLB;
  return std::nullopt;
}

LoadBalancer::LoadBalancer(const PipelineConfig& cfg, VipTable vips, const NicConfig& nic,
                           const CostModel& costs, std::uint64_t frequency_hz)
    : cfg_(cfg),
      vips_(std::move(vips)),
      nic_(nic, cfg.mode == Mode::HNLB),
      costs_(costs),
      clock_(frequency_hz) {
  if (cfg_.burst_max == 0) throw Error(Errc::ConfigError, "burst_max must be at least 1");
  if (costs_.c_poll == 0) throw Error(Errc::ConfigError, "c_poll must be at least 1 cycle");
  if (frequency_hz == 0) throw Error(Errc::ConfigError, "frequency must be positive");
  if (vips_.size() == 0) throw Error(Errc::ConfigError, "no VIPs configured");

  if (cfg_.mode == Mode::HNLB) {
    std::unordered_set<std::uint32_t> seen;
    for (const auto& [vip, pool] : vips_.pools()) {
      for (const Dip& d : pool) {
        if (!seen.insert(d.index).second)
          throw Error(Errc::ConfigError,
                      "Dip index " + std::to_string(d.index) + " used by more than one pool");
        if (d.index >= nic.n_queues)
          throw Error(Errc::ConfigError, "Dip index " + std::to_string(d.index) +
                                             " has no queue (n_queues " +
                                             std::to_string(nic.n_queues) + ")");
        queue_to_dip_.emplace(d.index + 1, d);
      }
    }
  }
  stats_.queue_drops.assign(std::size_t{nic.n_queues} + 1, 0);
  burst_buf_.reserve(cfg_.burst_max);
}

UtilConfig LoadBalancer::util_config() const {
  return cfg_.mode == Mode::SLB ? UtilConfig::single_queue(cfg_.burst_max)
                                : UtilConfig::multi_queue(cfg_.burst_max);
}

Cycles LoadBalancer::charge(OpKind op) {
  return hnlb::charge(clock_, costs_, op, connections_.size());
}

void LoadBalancer::forward(const Packet& original, const Dip& dip, PacketPath path, QueueId q) {
  ++stats_.packets_forwarded;
  if (cfg_.record_forwarding) stats_.forward_log.push_back({original.tuple, dip, path, q});
}

void LoadBalancer::deliver_arrivals(Cycles now) {
  while (feed_next_ < feed_.size() && arrival_cycles(feed_[feed_next_]) <= now) {
    const auto d = nic_.receive(feed_[feed_next_]);
    ++stats_.packets_in;
    if (d.result == EnqueueResult::Dropped) ++stats_.packets_dropped;
    ++feed_next_;
  }
}

std::optional<LoadBalancer::Routed> LoadBalancer::route_new_connection(const Packet& p) {
  const Vip vip = vip_of(p.tuple);
  if (!vips_.contains(vip)) {
    ++stats_.unknown_vip_drops;
    ++stats_.packets_dropped;
    return std::nullopt;
  }
  charge(OpKind::DipSelect);
  const Dip dip = vips_.select_dip(vip);
  charge(OpKind::SwInstall);
  connections_.install(p.tuple, dip);

  if (cfg_.mode == Mode::HNLB) {
    charge(OpKind::FdInstall);
    // The rule only sees packets that reach the NIC after it is in place.
    deliver_arrivals(clock_.now());
    if (nic_.install_rule(p.tuple, dip.index + 1) == InstallResult::TableFull)
      ++stats_.hw_table_full;
  }

  charge(OpKind::Rewrite);
  Packet out = rewrite_packet(p, dip);
  charge(OpKind::Forward);
  forward(p, dip, PacketPath::FirstPacket, kDefaultQueue);
  return Routed{dip, out};
}

std::optional<LoadBalancer::Routed> LoadBalancer::process_first_packet(const Packet& p) {
  if (connections_.lookup(p.tuple))
    throw Error(Errc::ConsistencyViolation, "first packet of a known connection");
  charge(OpKind::Hash);
  (void)hash_five_tuple(p.tuple);
  charge(OpKind::LookupMiss);
  return route_new_connection(p);
}

std::optional<Packet> LoadBalancer::process_default_queue_packet(const Packet& p) {
  charge(OpKind::Hash);
  (void)hash_five_tuple(p.tuple);
  const auto hit = connections_.lookup(p.tuple);
  charge(hit ? OpKind::LookupHit : OpKind::LookupMiss);
  if (!hit) {
    auto routed = route_new_connection(p);
    if (!routed) return std::nullopt;
    return routed->packet;
  }
  charge(OpKind::Rewrite);
  Packet out = rewrite_packet(p, *hit);
  charge(OpKind::Forward);
  forward(p, *hit, PacketPath::SoftwareHit, kDefaultQueue);
  return out;
}

std::vector<Packet> LoadBalancer::process_dip_queue_burst(QueueId q, std::span<const Packet> burst) {
  const auto it = queue_to_dip_.find(q);
  if (cfg_.mode != Mode::HNLB || it == queue_to_dip_.end())
    throw Error(Errc::InvalidQueue, "queue " + std::to_string(q) + " encodes no Dip");
  const Dip& dip = it->second;
  std::vector<Packet> out;
  out.reserve(burst.size());
  for (const Packet& p : burst) {
    charge(OpKind::Rewrite);
    out.push_back(rewrite_packet(p, dip));
    charge(OpKind::Forward);
    forward(p, dip, PacketPath::DipQueue, q);
  }
  return out;
}

void LoadBalancer::process_burst(QueueId q, std::span<const Packet> burst) {
  if (q == kDefaultQueue) {
    for (const Packet& p : burst) process_default_queue_packet(p);
  } else {
    process_dip_queue_burst(q, burst);
  }
}

void LoadBalancer::close_window_if_due(Cycles now) {
  if (cfg_.window_cycles == 0) return;
  while (now >= window_start_ + cfg_.window_cycles) {
    stats_.windows.push_back({window_start_, snapshot_and_reset(window_)});
    window_start_ += cfg_.window_cycles;
  }
}

void LoadBalancer::finish_stats() {
  stats_.residual = nic_.queues().total_occupancy();
  stats_.queue_drops = nic_.queues().drop_counts();
  stats_.end_cycles = clock_.now();
}

RunStats LoadBalancer::run(std::span<const Packet> workload, StopCondition stop) {
  feed_ = workload;
  feed_next_ = 0;
  const QueueId n_polled = cfg_.mode == Mode::HNLB ? nic_.config().n_queues + 1 : 1;
  QueueId cursor = 0;

  while (true) {
    const Cycles before = clock_.now();
    close_window_if_due(before);
    stats_.counters.ref += before - cycles_last_;
    window_.ref += before - cycles_last_;
    cycles_last_ = before;

    deliver_arrivals(before);
    if (stop.until) {
      if (before >= *stop.until) break;
    } else if (feed_next_ == feed_.size() && nic_.queues().all_empty()) {
      break;
    }

    const QueueId q = cursor;
    cursor = (cursor + 1) % n_polled;
    if (cfg_.record_polls) stats_.poll_log.push_back(q);
    charge(OpKind::Poll);
    burst_buf_.clear();
    const std::size_t got = nic_.queues().poll(q, cfg_.burst_max, burst_buf_);

    if (got > 0) {
      stats_.counters.n_p += got;
      stats_.counters.n_b += 1;
      window_.n_p += got;
      window_.n_b += 1;
      process_burst(q, burst_buf_);
      const Cycles spent = clock_.now() - before;
      stats_.counters.ops += spent;
      window_.ops += spent;
      continue;
    }

    // Nothing queued anywhere: every poll until the next arrival (or bound,
    // or window edge) comes back empty, so take them all at once.
    if (!nic_.queues().all_empty()) continue;
    std::optional<Cycles> target;
    if (feed_next_ < feed_.size()) target = arrival_cycles(feed_[feed_next_]);
    if (stop.until) target = target ? std::min(*target, *stop.until) : *stop.until;
    if (!target) continue;
    if (cfg_.window_cycles != 0) target = std::min(*target, window_start_ + cfg_.window_cycles);
    const Cycles now = clock_.now();
    if (*target <= now) continue;
    const Cycles skipped = (*target - now + costs_.c_poll - 1) / costs_.c_poll;
    clock_.advance(skipped * costs_.c_poll);
    if (cfg_.record_polls) {
      for (Cycles i = 0; i < skipped; ++i) {
        stats_.poll_log.push_back(cursor);
        cursor = (cursor + 1) % n_polled;
      }
    } else {
      cursor = static_cast<QueueId>((cursor + skipped) % n_polled);
    }
  }

  feed_ = {};
  feed_next_ = 0;
  finish_stats();
  RunStats out = stats_;
  if (cfg_.window_cycles != 0 && !(window_ == UtilCounters{}))
    out.windows.push_back({window_start_, window_});
  return out;
}

void LoadBalancer::reset_measurement() {
  stats_ = RunStats{};
  stats_.queue_drops.assign(std::size_t{nic_.config().n_queues} + 1, 0);
  nic_.queues().reset_drop_counts();
  window_ = UtilCounters{};
  cycles_last_ = clock_.now();
  window_start_ = clock_.now();
}

}  // namespace hnlb
