#include "hnlb/nic.hpp"

#include <cmath>
#include <numeric>

#include "hnlb/error.hpp"

namespace hnlb {

HardwareMatchTable::HardwareMatchTable(std::size_t capacity, QueueId n_queues)
    : capacity_(capacity), n_queues_(n_queues) {
  if (capacity == 0) throw Error(Errc::ConfigError, "hardware table capacity must be positive");
  rules_.reserve(capacity);
}

InstallResult HardwareMatchTable::install(const FiveTuple& t, QueueId q) {
  if (q == kDefaultQueue || q > n_queues_)
    throw Error(Errc::InvalidQueue, "rule target " + std::to_string(q));
  if (auto it = rules_.find(t); it != rules_.end()) {
    if (it->second != q)
      throw Error(Errc::ConsistencyViolation, "rule already targets queue " +
                                                  std::to_string(it->second));
    return InstallResult::Installed;
  }
  if (rules_.size() >= capacity_) return InstallResult::TableFull;
  rules_.emplace(t, q);
  return InstallResult::Installed;
}

QueueId HardwareMatchTable::classify(const Packet& p) const {
  auto it = rules_.find(p.tuple);
  return it == rules_.end() ? kDefaultQueue : it->second;
}

std::size_t BufferBudget::available_receive_slots(std::size_t rules) const {
  // Guard against 0.1-style fractions landing a hair above an integer.
  const double used = std::ceil(slots_per_rule * static_cast<double>(rules) - 1e-9);
  if (used >= static_cast<double>(total_slots)) return 0;
  return total_slots - static_cast<std::size_t>(used);
}

std::vector<std::size_t> BufferBudget::per_queue_capacity(std::size_t rules, QueueId n_queues,
                                                          const std::vector<QueueId>& active) const {
  std::vector<std::size_t> caps(std::size_t{n_queues} + 1, 0);
  if (active.empty()) return caps;
  const std::size_t avail = available_receive_slots(rules);
  const std::size_t share = avail / active.size();
  for (QueueId q : active) caps[q] = share;
  caps[active.front()] += avail % active.size();
  return caps;
}

NicQueues::NicQueues(QueueId n_queues)
    : queues_(std::size_t{n_queues} + 1),
      capacity_(std::size_t{n_queues} + 1, 0),
      drops_(std::size_t{n_queues} + 1, 0) {}

void NicQueues::check(QueueId q) const {
  if (q >= queues_.size()) throw Error(Errc::InvalidQueue, "queue " + std::to_string(q));
}

EnqueueResult NicQueues::enqueue(QueueId q, const Packet& p) {
  check(q);
  auto& queue = queues_[q];
  if (queue.size() >= capacity_[q]) {
    ++drops_[q];
    return EnqueueResult::Dropped;
  }
  queue.push_back(p);
  ++total_occupancy_;
  return EnqueueResult::Queued;
}

std::size_t NicQueues::poll(QueueId q, std::size_t max_burst, std::vector<Packet>& out) {
  check(q);
  if (max_burst == 0) throw Error(Errc::ConfigError, "max_burst must be at least 1");
  auto& queue = queues_[q];
  const std::size_t n = std::min(max_burst, queue.size());
  out.insert(out.end(), queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(n));
  queue.erase(queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(n));
  total_occupancy_ -= n;
  return n;
}

std::vector<Packet> NicQueues::poll(QueueId q, std::size_t max_burst) {
  std::vector<Packet> out;
  poll(q, max_burst, out);
  return out;
}

void NicQueues::set_capacity(QueueId q, std::size_t slots) {
  check(q);
  capacity_[q] = slots;
}

std::uint64_t NicQueues::total_drops() const {
  return std::accumulate(drops_.begin(), drops_.end(), std::uint64_t{0});
}

void NicQueues::reset_drop_counts() { std::fill(drops_.begin(), drops_.end(), 0); }

EmulatedNic::EmulatedNic(const NicConfig& cfg, bool hardware_steering)
    : cfg_(cfg),
      hardware_steering_(hardware_steering),
      table_(cfg.fd_capacity, cfg.n_queues),
      queues_(cfg.n_queues) {
  if (cfg.n_queues == 0) throw Error(Errc::ConfigError, "n_queues must be at least 1");
  if (hardware_steering_) {
    for (QueueId q = 0; q <= cfg.n_queues; ++q) active_.push_back(q);
  } else {
    active_.push_back(kDefaultQueue);
  }
  const std::size_t worst = cfg.budget.available_receive_slots(cfg.fd_capacity);
  if (worst < cfg.n_queues || worst < active_.size())
    throw Error(Errc::ConfigError, "receive buffer of " + std::to_string(worst) +
                                       " slots with a full rule table cannot serve " +
                                       std::to_string(active_.size()) + " queues");
  resize_queues();
}

void EmulatedNic::resize_queues() {
  const auto caps = cfg_.budget.per_queue_capacity(table_.size(), cfg_.n_queues, active_);
  for (QueueId q = 0; q < caps.size(); ++q) queues_.set_capacity(q, caps[q]);
}

EmulatedNic::Delivery EmulatedNic::receive(const Packet& p) {
  const QueueId q = hardware_steering_ ? table_.classify(p) : kDefaultQueue;
  return {q, queues_.enqueue(q, p)};
}

InstallResult EmulatedNic::install_rule(const FiveTuple& t, QueueId q) {
  const std::size_t before = table_.size();
  const InstallResult r = table_.install(t, q);
  if (table_.size() != before) resize_queues();
  return r;
}

double nic_latency_us(std::size_t rules) {
  return 95.0 + 10.0 * static_cast<double>(rules) / static_cast<double>(kLatencyReferenceRules);
}

}  // namespace hnlb
