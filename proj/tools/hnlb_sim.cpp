// hnlb_sim: command-line driver for the load balancer simulator.
//
//   hnlb_sim run      --mode hnlb --nb-conn 1000 --rate 8e6
//   hnlb_sim maxrate  --mode slb --nb-conn 8000
//   hnlb_sim sweep    --modes slb,hnlb --nb-conns 1,100,1000,8000 --search
//   hnlb_sim figures  --out-dir figures/

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hnlb/error.hpp"
#include "hnlb/harness.hpp"

namespace {

using hnlb::ExperimentConfig;
using hnlb::ExperimentReport;
using hnlb::Mode;
using hnlb::RateSearch;
using hnlb::SweepPoint;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::string> mode;
  std::optional<std::uint32_t> nb_conn;
  std::optional<std::uint32_t> pkt_size;
  std::optional<double> rate;
  std::optional<std::uint32_t> queues;
  std::optional<std::size_t> fd_capacity;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> packets;
  std::string out;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "Flat key = value config file");
    app->add_option("--set", overrides, "Override any config key (key=value), repeatable");
    app->add_option("--mode", mode, "slb or hnlb");
    app->add_option("--nb-conn", nb_conn, "Concurrent connections");
    app->add_option("--pkt-size", pkt_size, "Packet size in bytes");
    app->add_option("--rate", rate, "Offered rate in packets per second");
    app->add_option("--queues", queues, "DIP queues (queue 0 comes on top)");
    app->add_option("--fd-capacity", fd_capacity, "Hardware rule table capacity");
    app->add_option("--seed", seed, "Workload seed");
    app->add_option("--packets", packets, "Measured packets per run");
    app->add_option("--out", out, "Result file (default: stdout)");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_file.empty()) hnlb::apply_config_file(cfg, config_file);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw hnlb::Error(hnlb::Errc::ConfigError, "--set expects key=value");
      hnlb::apply_key_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (mode) hnlb::apply_key_value(cfg, "mode", *mode);
    if (nb_conn) cfg.nb_conn = *nb_conn;
    if (pkt_size) cfg.pkt_size = *pkt_size;
    if (rate) cfg.rate = *rate;
    if (queues) cfg.nic.n_queues = *queues;
    if (fd_capacity) cfg.nic.fd_capacity = *fd_capacity;
    if (seed) cfg.seed = *seed;
    if (packets) cfg.packets = *packets;
    return cfg;
  }
};

struct SearchOptions {
  RateSearch search;
  void attach(CLI::App* app) {
    app->add_option("--lo", search.lo, "Lower rate bound (must be lossless)");
    app->add_option("--hi", search.hi, "Upper rate bound");
    app->add_option("--tolerance", search.tolerance, "Relative resolution of the search");
  }
};

template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw hnlb::Error(hnlb::Errc::ConfigError, "cannot write " + path);
  fn(out);
}

std::vector<std::string> with_prefix(std::vector<std::string> lines, const std::string& first) {
  lines.insert(lines.begin(), first);
  return lines;
}

// ---- figures ---------------------------------------------------------------

double line_rate_pps(std::uint32_t size) {
  // 10 GbE with preamble, SFD and inter-frame gap.
  return 10e9 / ((size + 20.0) * 8.0);
}

std::vector<ExperimentReport> run_grid(const std::vector<SweepPoint>& grid) {
  return hnlb::sweep_parallel(grid);
}

void write_table(const std::filesystem::path& path, const std::string& header,
                 const std::vector<std::string>& rows, const ExperimentConfig& base) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw hnlb::Error(hnlb::Errc::ConfigError, "cannot write " + path.string());
  for (const std::string& line : hnlb::config_header_lines(base)) out << "# " << line << '\n';
  out << header << '\n';
  for (const std::string& r : rows) out << r << '\n';
}

void emit_figures(const ExperimentConfig& base, const std::filesystem::path& dir, const RateSearch& search) {
  std::filesystem::create_directories(dir);
  const Mode modes[] = {Mode::SLB, Mode::HNLB};

  {  // best case: one connection, one DIP, one queue, loss vs offered rate
    std::vector<SweepPoint> grid;
    for (Mode m : modes) {
      for (int step = 0; step <= 16; ++step) {
        SweepPoint p{base, std::nullopt};
        p.cfg.mode = m;
        p.cfg.nb_conn = 1;
        p.cfg.pkt_size = 64;
        p.cfg.nic.n_queues = 1;
        p.cfg.rate = 8e6 + 0.5e6 * step;
        grid.push_back(p);
      }
    }
    const auto rows = run_grid(grid);
    std::vector<std::string> lines;
    for (const auto& r : rows)
      lines.push_back(fmt::format("{},{},{},{}", to_string(r.mode), r.offered_rate, r.forwarded_rate, r.loss_fraction));
    write_table(dir / "best_case_throughput.csv", "mode,offered_rate,forwarded_rate,loss_fraction", lines, base);
  }

  const std::uint32_t conns[] = {1, 100, 1000, 8000};
  {  // max lossless rate vs connections
    std::vector<SweepPoint> grid;
    for (Mode m : modes) {
      for (std::uint32_t c : conns) {
        SweepPoint p{base, search};
        p.cfg.mode = m;
        p.cfg.nb_conn = c;
        p.cfg.pkt_size = 64;
        grid.push_back(p);
      }
    }
    const auto rows = run_grid(grid);
    std::vector<std::string> lines;
    for (const auto& r : rows)
      lines.push_back(fmt::format("{},{},{},{}", to_string(r.mode), r.nb_conn, r.offered_rate, r.util_plus));
    write_table(dir / "throughput_vs_connections.csv", "mode,nb_conn,max_lossless_rate,util_plus", lines, base);
  }

  const std::uint32_t sizes[] = {64, 128, 256, 512, 1024};
  {  // max lossless rate vs packet size, capped by the generator (line rate)
    std::vector<SweepPoint> grid;
    for (Mode m : modes) {
      for (std::uint32_t s : sizes) {
        SweepPoint p{base, search};
        p.cfg.mode = m;
        p.cfg.nb_conn = 1000;
        p.cfg.pkt_size = s;
        p.cfg.gen_max_rate = line_rate_pps(s);
        grid.push_back(p);
      }
    }
    const auto rows = run_grid(grid);
    std::vector<std::string> lines;
    for (const auto& r : rows)
      lines.push_back(fmt::format("{},{},{},{}", to_string(r.mode), r.pkt_size, r.offered_rate, line_rate_pps(r.pkt_size)));
    write_table(dir / "throughput_vs_size.csv", "mode,pkt_size,max_lossless_rate,generator_max_rate", lines, base);
  }

  {  // util+ vs rate per connection count
    std::vector<SweepPoint> grid;
    for (Mode m : modes) {
      for (std::uint32_t c : conns) {
        for (int mpps = 1; mpps <= 15; ++mpps) {
          SweepPoint p{base, std::nullopt};
          p.cfg.mode = m;
          p.cfg.nb_conn = c;
          p.cfg.pkt_size = 64;
          p.cfg.rate = mpps * 1e6;
          grid.push_back(p);
        }
      }
    }
    const auto rows = run_grid(grid);
    std::vector<std::string> lines;
    for (const auto& r : rows)
      lines.push_back(fmt::format("{},{},{},{},{},{}", to_string(r.mode), r.nb_conn, r.offered_rate, r.util,
                                  r.util_plus, r.loss_fraction));
    write_table(dir / "util_vs_rate_connections.csv", "mode,nb_conn,offered_rate,util,util_plus,loss_fraction",
                lines, base);
  }

  {  // util+ vs rate per packet size, 1000 connections
    std::vector<SweepPoint> grid;
    for (Mode m : modes) {
      for (std::uint32_t s : sizes) {
        const double cap = line_rate_pps(s);
        for (int step = 1; step <= 10; ++step) {
          SweepPoint p{base, std::nullopt};
          p.cfg.mode = m;
          p.cfg.nb_conn = 1000;
          p.cfg.pkt_size = s;
          p.cfg.rate = std::min(cap, 14e6) * step / 10.0;
          grid.push_back(p);
        }
      }
    }
    const auto rows = run_grid(grid);
    std::vector<std::string> lines;
    for (const auto& r : rows)
      lines.push_back(fmt::format("{},{},{},{},{},{}", to_string(r.mode), r.pkt_size, r.offered_rate, r.util,
                                  r.util_plus, r.loss_fraction));
    write_table(dir / "util_vs_rate_sizes.csv", "mode,pkt_size,offered_rate,util,util_plus,loss_fraction", lines,
                base);
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& csv, T (*parse)(const std::string&)) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = csv.find(',', start);
    const std::string item = csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(parse(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stateful L4 load balancer simulator (software vs. NIC-offloaded)"};
  app.require_subcommand(1);

  CommonOptions run_opts, max_opts, sweep_opts, fig_opts;
  SearchOptions max_search, sweep_search, fig_search;

  auto* run = app.add_subcommand("run", "Run a single experiment");
  run_opts.attach(run);
  double window_ns = -1;
  run->add_option("--window-ns", window_ns, "Utilization sub-window length in simulated ns");

  auto* maxrate = app.add_subcommand("maxrate", "Search the maximum lossless rate");
  max_opts.attach(maxrate);
  max_search.attach(maxrate);

  auto* sweep = app.add_subcommand("sweep", "Run a grid of experiments");
  sweep_opts.attach(sweep);
  sweep_search.attach(sweep);
  std::string modes_csv, conns_csv, sizes_csv, rates_csv;
  bool search = false, serial = false;
  sweep->add_option("--modes", modes_csv, "Comma-separated modes");
  sweep->add_option("--nb-conns", conns_csv, "Comma-separated connection counts");
  sweep->add_option("--pkt-sizes", sizes_csv, "Comma-separated packet sizes");
  sweep->add_option("--rates", rates_csv, "Comma-separated offered rates");
  sweep->add_flag("--search", search, "Report every point at its maximum lossless rate");
  sweep->add_flag("--serial", serial, "Run grid points one after another");

  auto* figures = app.add_subcommand("figures", "Emit CSVs for throughput and utilization plots");
  fig_opts.attach(figures);
  fig_search.attach(figures);
  std::string out_dir = "figures";
  figures->add_option("--out-dir", out_dir, "Directory for the CSV files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig cfg = run_opts.resolve();
      if (window_ns >= 0) cfg.window_ns = window_ns;
      const ExperimentReport r = hnlb::run_experiment(cfg);
      with_output(run_opts.out, [&](std::ostream& os) {
        hnlb::write_report_file(os, with_prefix(hnlb::config_header_lines(cfg), "hnlb_sim run"), {r}, true);
      });
    } else if (*maxrate) {
      const ExperimentConfig cfg = max_opts.resolve();
      const auto res = hnlb::find_max_lossless_rate(cfg, max_search.search);
      auto header = with_prefix(hnlb::config_header_lines(cfg), "hnlb_sim maxrate");
      header.push_back(fmt::format("search = lo {} hi {} tolerance {}", max_search.search.lo, max_search.search.hi,
                                   max_search.search.tolerance));
      header.push_back(fmt::format("max_lossless_rate = {}", res.rate));
      header.push_back(fmt::format("probes = {}", res.probes));
      with_output(max_opts.out, [&](std::ostream& os) { hnlb::write_report_file(os, header, {res.report}); });
    } else if (*sweep) {
      const ExperimentConfig base = sweep_opts.resolve();
      auto modes = modes_csv.empty() ? std::vector<Mode>{base.mode}
                                     : parse_list<Mode>(modes_csv, +[](const std::string& s) {
                                         auto m = hnlb::parse_mode(s);
                                         if (!m) throw hnlb::Error(hnlb::Errc::ConfigError, "bad mode " + s);
                                         return *m;
                                       });
      auto to_u32 = +[](const std::string& s) { return static_cast<std::uint32_t>(std::stoul(s)); };
      auto to_f64 = +[](const std::string& s) { return std::stod(s); };
      auto conns = conns_csv.empty() ? std::vector<std::uint32_t>{base.nb_conn} : parse_list(conns_csv, to_u32);
      auto sizes = sizes_csv.empty() ? std::vector<std::uint32_t>{base.pkt_size} : parse_list(sizes_csv, to_u32);
      auto rates = rates_csv.empty() || search ? std::vector<double>{base.rate} : parse_list(rates_csv, to_f64);

      std::vector<SweepPoint> grid;
      for (Mode m : modes)
        for (auto c : conns)
          for (auto s : sizes)
            for (double r : rates) {
              SweepPoint p{base, std::nullopt};
              p.cfg.mode = m;
              p.cfg.nb_conn = c;
              p.cfg.pkt_size = s;
              p.cfg.rate = r;
              if (search) p.search = sweep_search.search;
              grid.push_back(p);
            }
      const auto rows = serial ? hnlb::sweep_serial(grid) : hnlb::sweep_parallel(grid);
      auto header = with_prefix(hnlb::config_header_lines(base), "hnlb_sim sweep");
      header.push_back("grid.modes = " + (modes_csv.empty() ? std::string(to_string(base.mode)) : modes_csv));
      header.push_back("grid.nb_conns = " + (conns_csv.empty() ? std::to_string(base.nb_conn) : conns_csv));
      header.push_back("grid.pkt_sizes = " + (sizes_csv.empty() ? std::to_string(base.pkt_size) : sizes_csv));
      if (search) {
        header.push_back(fmt::format("grid.search = lo {} hi {} tolerance {}", sweep_search.search.lo,
                                     sweep_search.search.hi, sweep_search.search.tolerance));
      } else {
        header.push_back("grid.rates = " + (rates_csv.empty() ? fmt::format("{}", base.rate) : rates_csv));
      }
      with_output(sweep_opts.out, [&](std::ostream& os) { hnlb::write_report_file(os, header, rows); });
    } else if (*figures) {
      emit_figures(fig_opts.resolve(), out_dir, fig_search.search);
      std::cout << "wrote figure CSVs to " << out_dir << '\n';
    }
  } catch (const hnlb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
