#pragma once

// Busy-poll utilization. REF counts every cycle of the receive loop, OPS
// only the iterations that actually received packets; n_p / n_b track the
// received packets and the non-empty polls.

#include <cstdint>

#include "hnlb/cost_model.hpp"

namespace hnlb {

struct UtilCounters {
  Cycles ref = 0;
  Cycles ops = 0;
  std::uint64_t n_p = 0;
  std::uint64_t n_b = 0;

  UtilCounters& operator+=(const UtilCounters& o) {
    ref += o.ref;
    ops += o.ops;
    n_p += o.n_p;
    n_b += o.n_b;
    return *this;
  }
  friend bool operator==(const UtilCounters&, const UtilCounters&) = default;
};

struct UtilConfig {
  std::uint32_t max_burst = 32;  // B
  bool clamp = false;

  // Single-queue loops use the full burst unclamped; multi-queue loops can
  // never fill it without loss, so they use half of it with the min(1, .) form.
  static UtilConfig single_queue(std::uint32_t burst_max = 32) { return {burst_max, false}; }
  static UtilConfig multi_queue(std::uint32_t burst_max = 32) {
    return {burst_max >= 2 ? burst_max / 2 : 1, true};
  }
};

// OPS / REF. Throws Errc::UndefinedWindow when REF is 0.
double compute_util(const UtilCounters& c);

// util * (1 + n_p / (n_b * B)) / 2, with the burst factor capped at 1 when
// cfg.clamp. A window without any non-empty poll yields 0.
double compute_util_plus(const UtilCounters& c, const UtilConfig& cfg);

// Returns the current window and starts a new one.
UtilCounters snapshot_and_reset(UtilCounters& c);

}  // namespace hnlb
