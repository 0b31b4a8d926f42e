#pragma once

// Emulated NIC: an exact-match Flow-Director-style rule table that steers
// packets to receive queues, the receive queues themselves, and the receive
// buffer memory the rules share.

#include <cstdint>
#include <deque>
#include <unordered_map>
#include <vector>

#include "hnlb/types.hpp"

namespace hnlb {

using QueueId = std::uint32_t;

inline constexpr QueueId kDefaultQueue = 0;

enum class InstallResult { Installed, TableFull };
enum class EnqueueResult { Queued, Dropped };

class HardwareMatchTable {
 public:
  HardwareMatchTable(std::size_t capacity, QueueId n_queues);

  // Rules may only target queues 1..n_queues. Re-installing the same rule is
  // a no-op; pointing an existing key at another queue is a
  // ConsistencyViolation.
  InstallResult install(const FiveTuple& t, QueueId q);

  // Queue of the matching rule, or the default queue. Never touches p.
  QueueId classify(const Packet& p) const;

  std::size_t size() const { return rules_.size(); }
  std::size_t capacity() const { return capacity_; }
  QueueId n_queues() const { return n_queues_; }

 private:
  std::size_t capacity_;
  QueueId n_queues_;
  std::unordered_map<FiveTuple, QueueId, FiveTupleHash> rules_;
};

// Receive memory shared between rules and packet slots.
struct BufferBudget {
  std::size_t total_slots = 4096;
  double slots_per_rule = 0.25;

  // total - ceil(slots_per_rule * rules); negative budgets clamp to 0.
  std::size_t available_receive_slots(std::size_t rules) const;

  // Equal split over the active queues (listed in ascending order), any
  // remainder going to queue 0 when it is active, else to the first one.
  std::vector<std::size_t> per_queue_capacity(std::size_t rules, QueueId n_queues,
                                              const std::vector<QueueId>& active) const;
};

class NicQueues {
 public:
  explicit NicQueues(QueueId n_queues);

  EnqueueResult enqueue(QueueId q, const Packet& p);

  // Appends up to max_burst packets of queue q to out, FIFO order; returns
  // the count.
  std::size_t poll(QueueId q, std::size_t max_burst, std::vector<Packet>& out);
  std::vector<Packet> poll(QueueId q, std::size_t max_burst);

  // Shrinking below the current occupancy keeps queued packets; only new
  // arrivals are refused until the queue drains.
  void set_capacity(QueueId q, std::size_t slots);

  std::size_t occupancy(QueueId q) const { return queues_.at(q).size(); }
  std::size_t capacity(QueueId q) const { return capacity_.at(q); }
  std::uint64_t drop_count(QueueId q) const { return drops_.at(q); }
  const std::vector<std::uint64_t>& drop_counts() const { return drops_; }
  std::uint64_t total_drops() const;
  std::size_t total_occupancy() const { return total_occupancy_; }
  bool all_empty() const { return total_occupancy_ == 0; }
  QueueId n_queues() const { return static_cast<QueueId>(queues_.size() - 1); }
  void reset_drop_counts();

 private:
  void check(QueueId q) const;

  std::vector<std::deque<Packet>> queues_;
  std::vector<std::size_t> capacity_;
  std::vector<std::uint64_t> drops_;
  std::size_t total_occupancy_ = 0;
};

struct NicConfig {
  QueueId n_queues = 10;
  std::size_t fd_capacity = 8000;
  BufferBudget budget;
};

// Ties the rule table to the queues: classify on receive, and re-split the
// receive memory whenever a rule lands.
class EmulatedNic {
 public:
  // With hardware_steering off only queue 0 receives traffic and owns the
  // whole receive buffer. Throws ConfigError if a full rule table would
  // leave fewer slots than active queues.
  EmulatedNic(const NicConfig& cfg, bool hardware_steering);

  struct Delivery {
    QueueId queue;
    EnqueueResult result;
  };
  Delivery receive(const Packet& p);

  InstallResult install_rule(const FiveTuple& t, QueueId q);

  const HardwareMatchTable& table() const { return table_; }
  NicQueues& queues() { return queues_; }
  const NicQueues& queues() const { return queues_; }
  const NicConfig& config() const { return cfg_; }
  const std::vector<QueueId>& active_queues() const { return active_; }
  std::size_t available_receive_slots() const {
    return cfg_.budget.available_receive_slots(table_.size());
  }

 private:
  void resize_queues();

  NicConfig cfg_;
  bool hardware_steering_;
  std::vector<QueueId> active_;
  HardwareMatchTable table_;
  NicQueues queues_;
};

inline constexpr std::size_t kLatencyReferenceRules = 8000;

// Worst-case NIC latency with the given number of installed rules: linear
// between 95 us (empty table) and 105 us (8000 rules). Reporting only.
double nic_latency_us(std::size_t rules);

}  // namespace hnlb
