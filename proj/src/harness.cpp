#include "hnlb/harness.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "hnlb/error.hpp"

namespace hnlb {

double ExperimentConfig::measured_duration_s() const {
  if (rate <= 0) return idle_duration_s;
  if (duration_s > 0) return duration_s;
  return static_cast<double>(packets) / rate;
}

WorkloadSpec ExperimentConfig::workload() const {
  WorkloadSpec spec;
  spec.nb_conn = nb_conn;
  spec.pkt_size = pkt_size;
  spec.offered_rate = rate;
  spec.duration_s = measured_duration_s();
  spec.seed = seed;
  spec.vip = vip;
  spec.scheduler = scheduler;
  return spec;
}

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(Errc::ConfigError, what); }

}  // namespace

void validate(const ExperimentConfig& cfg) {
  if (cfg.nb_conn < 1 || cfg.nb_conn > kMaxConnections)
    config_error("nb_conn must be in [1, " + std::to_string(kMaxConnections) + "]");
  if (cfg.pkt_size < kMinPacketSize || cfg.pkt_size > kMaxPacketSize)
    config_error("pkt_size must be in [64, 1518]");
  if (!(cfg.rate >= 0) || !std::isfinite(cfg.rate)) config_error("rate must be >= 0");
  if (cfg.gen_max_rate > 0 && cfg.rate > cfg.gen_max_rate)
    config_error(fmt::format("rate {} exceeds the generator ceiling {}", cfg.rate, cfg.gen_max_rate));
  if (cfg.packets == 0) config_error("packets must be positive");
  if (cfg.duration_s < 0) config_error("duration must be >= 0");
  if (!(cfg.idle_duration_s > 0)) config_error("idle_duration must be positive");
  if (cfg.nic.n_queues < 1) config_error("queues must be at least 1");
  if (cfg.nic.fd_capacity < 2000 || cfg.nic.fd_capacity > 8000)
    config_error("fd_capacity must be in [2000, 8000]");
  if (!(cfg.nic.budget.slots_per_rule >= 0)) config_error("slots_per_rule must be >= 0");
  if (cfg.n_dips > cfg.nic.n_queues) config_error("more DIPs than queues");
  if (cfg.dip_count() > 253) config_error("at most 253 DIPs");
  if (cfg.burst_max < 1) config_error("burst_max must be at least 1");
  if (cfg.costs.c_poll < 1) config_error("c_poll must be at least 1");
  if (cfg.frequency_hz == 0) config_error("frequency_hz must be positive");
  if (!(cfg.warmup_rate > 0)) config_error("warmup_rate must be positive");
  if (cfg.window_ns < 0) config_error("window_ns must be >= 0");
  if (cfg.repetitions < 1) config_error("repetitions must be at least 1");
  const std::size_t worst = cfg.nic.budget.available_receive_slots(cfg.nic.fd_capacity);
  if (worst < std::size_t{cfg.nic.n_queues} + 1)
    config_error("receive buffer too small for the queues once the rule table is full");
  if (cfg.rate > 0) {
    try {
      hnlb::validate(cfg.workload());
    } catch (const Error& e) {
      config_error(e.what());
    }
  }
}

namespace {

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>) {
    r = std::from_chars(v.data(), end, out, std::chars_format::general);
  } else {
    r = std::from_chars(v.data(), end, out);
  }
  if (r.ec != std::errc{} || r.ptr != end || v.empty())
    config_error("bad value for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  config_error("bad value for " + key + ": '" + v + "'");
}

template <typename T>
Field number_field(const char* key, T ExperimentConfig::*member) {
  return {key, [member](const ExperimentConfig& c) { return fmt::format("{}", c.*member); },
          [key, member](ExperimentConfig& c, const std::string& v) {
            c.*member = parse_number<T>(key, v);
          }};
}

template <typename T>
Field cost_field(const char* key, T CostModel::*member) {
  return {key, [member](const ExperimentConfig& c) { return fmt::format("{}", c.costs.*member); },
          [key, member](ExperimentConfig& c, const std::string& v) {
            c.costs.*member = parse_number<T>(key, v);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"mode", [](const ExperimentConfig& c) { return std::string(to_string(c.mode)); },
       [](ExperimentConfig& c, const std::string& v) {
         auto m = parse_mode(v);
         if (!m) config_error("bad mode '" + v + "'");
         c.mode = *m;
       }},
      number_field("nb_conn", &ExperimentConfig::nb_conn),
      number_field("pkt_size", &ExperimentConfig::pkt_size),
      number_field("rate", &ExperimentConfig::rate),
      number_field("seed", &ExperimentConfig::seed),
      number_field("packets", &ExperimentConfig::packets),
      number_field("duration", &ExperimentConfig::duration_s),
      number_field("idle_duration", &ExperimentConfig::idle_duration_s),
      {"scheduler",
       [](const ExperimentConfig& c) {
         return std::string(c.scheduler == ConnectionScheduler::Uniform ? "uniform" : "round_robin");
       },
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "uniform") c.scheduler = ConnectionScheduler::Uniform;
         else if (v == "round_robin") c.scheduler = ConnectionScheduler::RoundRobin;
         else config_error("bad scheduler '" + v + "'");
       }},
      {"vip_ip", [](const ExperimentConfig& c) { return c.vip.ip.str(); },
       [](ExperimentConfig& c, const std::string& v) {
         auto ip = Ipv4::parse(v);
         if (!ip) config_error("bad vip_ip '" + v + "'");
         c.vip.ip = *ip;
       }},
      {"vip_port", [](const ExperimentConfig& c) { return std::to_string(c.vip.port); },
       [](ExperimentConfig& c, const std::string& v) {
         const auto port = parse_number<std::uint32_t>("vip_port", v);
         if (port > 0xffff) config_error("vip_port out of range");
         c.vip.port = static_cast<std::uint16_t>(port);
       }},
      {"vip_proto", [](const ExperimentConfig& c) { return std::string(to_string(c.vip.protocol)); },
       [](ExperimentConfig& c, const std::string& v) {
         auto p = parse_protocol(v);
         if (!p) config_error("bad vip_proto '" + v + "'");
         c.vip.protocol = *p;
       }},
      number_field("n_dips", &ExperimentConfig::n_dips),
      {"queues", [](const ExperimentConfig& c) { return std::to_string(c.nic.n_queues); },
       [](ExperimentConfig& c, const std::string& v) {
         c.nic.n_queues = parse_number<QueueId>("queues", v);
       }},
      {"fd_capacity", [](const ExperimentConfig& c) { return std::to_string(c.nic.fd_capacity); },
       [](ExperimentConfig& c, const std::string& v) {
         c.nic.fd_capacity = parse_number<std::size_t>("fd_capacity", v);
       }},
      {"total_buffer_slots",
       [](const ExperimentConfig& c) { return std::to_string(c.nic.budget.total_slots); },
       [](ExperimentConfig& c, const std::string& v) {
         c.nic.budget.total_slots = parse_number<std::size_t>("total_buffer_slots", v);
       }},
      {"slots_per_rule",
       [](const ExperimentConfig& c) { return fmt::format("{}", c.nic.budget.slots_per_rule); },
       [](ExperimentConfig& c, const std::string& v) {
         c.nic.budget.slots_per_rule = parse_number<double>("slots_per_rule", v);
       }},
      number_field("burst_max", &ExperimentConfig::burst_max),
      number_field("frequency_hz", &ExperimentConfig::frequency_hz),
      cost_field("c_hash", &CostModel::c_hash),
      cost_field("c_lookup_hit", &CostModel::c_lookup_hit),
      cost_field("c_mem_penalty", &CostModel::c_mem_penalty),
      cost_field("c_dip_select", &CostModel::c_dip_select),
      cost_field("c_sw_install", &CostModel::c_sw_install),
      cost_field("c_fd_install", &CostModel::c_fd_install),
      cost_field("c_rewrite", &CostModel::c_rewrite),
      cost_field("c_forward", &CostModel::c_forward),
      cost_field("c_poll", &CostModel::c_poll),
      cost_field("cache_entries", &CostModel::cache_entries),
      {"warmup", [](const ExperimentConfig& c) { return std::string(c.warmup ? "true" : "false"); },
       [](ExperimentConfig& c, const std::string& v) { c.warmup = parse_bool("warmup", v); }},
      number_field("warmup_rate", &ExperimentConfig::warmup_rate),
      number_field("window_ns", &ExperimentConfig::window_ns),
      number_field("gen_max_rate", &ExperimentConfig::gen_max_rate),
      number_field("repetitions", &ExperimentConfig::repetitions),
  };
  return table;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<std::pair<std::string, std::string>> to_key_values(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

void apply_key_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  }
  config_error("unknown key '" + key + "'");
}

void apply_config_text(ExperimentConfig& cfg, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) config_error("line " + std::to_string(line_no) + ": expected key = value");
    apply_key_value(cfg, trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
}

void apply_config_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config " + path.string());
  apply_config_text(cfg, in);
}

VipTable build_vip_table(const ExperimentConfig& cfg) {
  std::vector<Dip> pool;
  for (std::uint32_t i = 0; i < cfg.dip_count(); ++i)
    pool.push_back(Dip{Ipv4::from_octets(10, 0, 0, static_cast<std::uint8_t>(i + 1)), 335, i});
  VipTable table;
  table.add(cfg.vip, std::move(pool));
  return table;
}

namespace {

std::vector<Packet> shifted(std::vector<Packet> packets, std::uint64_t offset_ns) {
  for (Packet& p : packets) p.arrival_ns += offset_ns;
  return packets;
}

ExperimentReport run_once(const ExperimentConfig& cfg) {
  PipelineConfig pc;
  pc.mode = cfg.mode;
  pc.burst_max = cfg.burst_max;
  pc.window_cycles = static_cast<Cycles>(std::llround(cfg.window_ns * 1e-9 *
                                                      static_cast<double>(cfg.frequency_hz)));
  LoadBalancer lb(pc, build_vip_table(cfg), cfg.nic, cfg.costs, cfg.frequency_hz);
  const WorkloadSpec spec = cfg.workload();

  if (cfg.warmup) {
    lb.run(connection_openers(spec, cfg.warmup_rate));
    lb.reset_measurement();
  }
  const Cycles measure_start = lb.clock().now();
  // Measured traffic starts one microsecond after the loop went idle.
  const std::uint64_t start_ns = lb.clock().ns_at_cycles(lb.clock().now()) + 1000;

  RunStats stats;
  if (cfg.rate > 0) {
    const auto packets = shifted(generate(spec), start_ns);
    stats = lb.run(packets);
  } else {
    const Cycles until = lb.clock().now() + lb.clock().cycles_at_ns(static_cast<std::uint64_t>(
                                                 std::llround(cfg.idle_duration_s * 1e9)));
    stats = lb.run({}, StopCondition{until});
  }

  ExperimentReport r;
  r.mode = cfg.mode;
  r.nb_conn = cfg.nb_conn;
  r.pkt_size = cfg.pkt_size;
  r.offered_rate = cfg.rate;
  r.generated = stats.packets_in;
  r.forwarded = stats.packets_forwarded;
  r.dropped = stats.packets_dropped;
  r.residual = stats.residual;
  r.queue_drops = stats.queue_drops;
  r.counters = stats.counters;
  r.forwarded_rate = cfg.rate > 0 ? static_cast<double>(r.forwarded) / cfg.measured_duration_s() : 0.0;
  r.loss_fraction = r.generated > 0 ? static_cast<double>(r.dropped) / static_cast<double>(r.generated) : 0.0;
  const UtilConfig ucfg = lb.util_config();
  if (stats.counters.ref > 0) {
    r.util = compute_util(stats.counters);
    r.util_plus = compute_util_plus(stats.counters, ucfg);
  }
  r.hw_rules_used = lb.nic().table().size();
  r.nic_latency_us = nic_latency_us(r.hw_rules_used);
  std::vector<MetricWindow> windows = stats.windows;
  if (windows.empty()) windows.push_back({measure_start, stats.counters});
  for (const MetricWindow& w : windows) {
    MetricRow row;
    row.window_start_ns = lb.clock().ns_at_cycles(w.start);
    row.counters = w.counters;
    if (w.counters.ref > 0) {
      row.util = compute_util(w.counters);
      row.util_plus = compute_util_plus(w.counters, ucfg);
    }
    r.windows.push_back(row);
  }
  return r;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  ExperimentReport total = run_once(cfg);
  if (cfg.repetitions == 1) return total;

  // Further repetitions reseed the generator; rates and utilizations are
  // averaged, packet counts summed.
  for (std::uint32_t i = 1; i < cfg.repetitions; ++i) {
    ExperimentConfig rep = cfg;
    rep.seed = cfg.seed + i;
    const ExperimentReport r = run_once(rep);
    total.forwarded_rate += r.forwarded_rate;
    total.util += r.util;
    total.util_plus += r.util_plus;
    total.generated += r.generated;
    total.forwarded += r.forwarded;
    total.dropped += r.dropped;
    total.residual += r.residual;
    total.counters += r.counters;
    for (std::size_t q = 0; q < total.queue_drops.size(); ++q) total.queue_drops[q] += r.queue_drops[q];
    total.hw_rules_used = std::max(total.hw_rules_used, r.hw_rules_used);
  }
  const double n = cfg.repetitions;
  total.forwarded_rate /= n;
  total.util /= n;
  total.util_plus /= n;
  total.loss_fraction =
      total.generated > 0 ? static_cast<double>(total.dropped) / static_cast<double>(total.generated) : 0.0;
  total.nic_latency_us = nic_latency_us(total.hw_rules_used);
  return total;
}

SearchResult find_max_lossless_rate(const ExperimentConfig& cfg, const RateSearch& search) {
  double lo = search.lo;
  double hi = search.hi;
  if (cfg.gen_max_rate > 0) hi = std::min(hi, cfg.gen_max_rate);
  if (!(lo > 0) || !(lo < hi)) throw Error(Errc::SearchRangeError, fmt::format("empty range [{}, {}]", lo, hi));
  if (!(search.tolerance > 0)) throw Error(Errc::SearchRangeError, "tolerance must be positive");

  SearchResult out;
  auto probe = [&](double rate) {
    ExperimentConfig c = cfg;
    c.rate = rate;
    ++out.probes;
    return run_experiment(c);
  };

  ExperimentReport at_lo = probe(lo);
  if (at_lo.dropped > 0)
    throw Error(Errc::SearchRangeError, fmt::format("{} packets lost at the lower bound {}", at_lo.dropped, lo));
  ExperimentReport at_hi = probe(hi);
  if (at_hi.dropped == 0) {
    out.rate = hi;
    out.report = std::move(at_hi);
    return out;
  }
  while (hi - lo > search.tolerance * lo) {
    const double mid = lo + (hi - lo) / 2;
    ExperimentReport r = probe(mid);
    if (r.dropped == 0) {
      lo = mid;
      at_lo = std::move(r);
    } else {
      hi = mid;
    }
  }
  out.rate = lo;
  out.report = std::move(at_lo);
  return out;
}

namespace {

void validate_grid(const std::vector<SweepPoint>& grid) {
  if (grid.empty()) config_error("empty sweep grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      ExperimentConfig c = grid[i].cfg;
      if (grid[i].search) {
        if (!(grid[i].search->lo > 0) || !(grid[i].search->lo < grid[i].search->hi))
          config_error("bad search range");
        c.rate = grid[i].search->lo;
      }
      validate(c);
    } catch (const Error& e) {
      config_error("grid point " + std::to_string(i) + ": " + e.what());
    }
  }
}

ExperimentReport run_point(const SweepPoint& p) {
  if (p.search) return find_max_lossless_rate(p.cfg, *p.search).report;
  return run_experiment(p.cfg);
}

}  // namespace

std::vector<ExperimentReport> sweep_serial(const std::vector<SweepPoint>& grid) {
  validate_grid(grid);
  std::vector<ExperimentReport> rows;
  rows.reserve(grid.size());
  for (const SweepPoint& p : grid) rows.push_back(run_point(p));
  return rows;
}

std::vector<ExperimentReport> sweep_parallel(const std::vector<SweepPoint>& grid) {
  validate_grid(grid);
  std::vector<ExperimentReport> rows(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      rows[static_cast<std::size_t>(i)] = run_point(grid[static_cast<std::size_t>(i)]);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

std::string report_csv_header() {
  return "mode,nb_conn,pkt_size,offered_rate,forwarded_rate,loss_fraction,util,util_plus,"
         "hw_rules_used,nic_latency_us,generated,forwarded,dropped,residual,queue_drops,"
         "ref,ops,n_p,n_b";
}

std::string report_csv_row(const ExperimentReport& r) {
  std::string drops;
  for (std::size_t q = 0; q < r.queue_drops.size(); ++q) {
    if (q) drops += ';';
    drops += std::to_string(r.queue_drops[q]);
  }
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", to_string(r.mode), r.nb_conn,
                     r.pkt_size, r.offered_rate, r.forwarded_rate, r.loss_fraction, r.util, r.util_plus,
                     r.hw_rules_used, r.nic_latency_us, r.generated, r.forwarded, r.dropped, r.residual,
                     drops, r.counters.ref, r.counters.ops, r.counters.n_p, r.counters.n_b);
}

std::vector<std::string> config_header_lines(const ExperimentConfig& cfg) {
  std::vector<std::string> lines;
  for (const auto& [k, v] : to_key_values(cfg)) lines.push_back(k + " = " + v);
  return lines;
}

void write_report_file(std::ostream& out, const std::vector<std::string>& header_lines,
                       const std::vector<ExperimentReport>& rows, bool with_windows) {
  for (const std::string& line : header_lines) out << "# " << line << '\n';
  out << report_csv_header() << '\n';
  for (const ExperimentReport& r : rows) out << report_csv_row(r) << '\n';
  if (!with_windows) return;
  out << "# metrics\n";
  out << "row,window_start,REF,OPS,n_p,n_b,util,util_plus\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const MetricRow& w : rows[i].windows) {
      out << fmt::format("{},{},{},{},{},{},{},{}\n", i, w.window_start_ns, w.counters.ref, w.counters.ops,
                         w.counters.n_p, w.counters.n_b, w.util, w.util_plus);
    }
  }
}

}  // namespace hnlb
