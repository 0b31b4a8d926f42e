#include "hnlb/metrics.hpp"

#include <algorithm>

#include "hnlb/error.hpp"

namespace hnlb {

double compute_util(const UtilCounters& c) {
  if (c.ref == 0) throw Error(Errc::UndefinedWindow, "REF is zero");
  return static_cast<double>(c.ops) / static_cast<double>(c.ref);
}

double compute_util_plus(const UtilCounters& c, const UtilConfig& cfg) {
  const double util = compute_util(c);
  if (cfg.max_burst == 0) throw Error(Errc::ConfigError, "B must be at least 1");
  if (c.n_b == 0) return 0.0;
  double burst_factor =
      (1.0 + static_cast<double>(c.n_p) / (static_cast<double>(c.n_b) * cfg.max_burst)) / 2.0;
  if (cfg.clamp) burst_factor = std::min(1.0, burst_factor);
  return util * burst_factor;
}

UtilCounters snapshot_and_reset(UtilCounters& c) {
  UtilCounters copy = c;
  c = UtilCounters{};
  return copy;
}

}  // namespace hnlb
