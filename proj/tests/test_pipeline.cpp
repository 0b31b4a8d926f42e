#include <doctest.h>

#include <map>

#include "hnlb/error.hpp"
#include "hnlb/pipeline.hpp"
#include "hnlb/trafficgen.hpp"

using namespace hnlb;

namespace {

const Vip kVip{Ipv4::from_octets(42, 3, 4, 5), 443, Protocol::TCP};

VipTable pool_of(std::uint32_t n) {
  std::vector<Dip> pool;
  for (std::uint32_t i = 0; i < n; ++i) pool.push_back({Ipv4::from_octets(10, 0, 0, static_cast<std::uint8_t>(i + 1)), 335, i});
  VipTable vt;
  vt.add(kVip, pool);
  return vt;
}

LoadBalancer make_lb(Mode mode, std::uint32_t dips = 10, NicConfig nic = {}, PipelineConfig cfg = {}) {
  cfg.mode = mode;
  return LoadBalancer(cfg, pool_of(dips), nic, CostModel{});
}

Packet conn_packet(std::uint32_t k, std::uint64_t arrival_ns = 0, std::uint64_t seq = 0) {
  return {connection_tuple(k, kVip), 64, arrival_ns, seq};
}

std::vector<Packet> steady(std::uint32_t nb_conn, double rate, double duration_s, Vip vip = kVip) {
  WorkloadSpec spec;
  spec.nb_conn = nb_conn;
  spec.offered_rate = rate;
  spec.duration_s = duration_s;
  spec.vip = vip;
  return generate(spec);
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no hnlb::Error thrown");
  return Errc::ConfigError;
}

}  // namespace

TEST_CASE("first packet picks a Dip and installs the rule in HNLB") {
  auto lb = make_lb(Mode::HNLB, 1);
  const CostModel& m = lb.costs();
  const auto routed = lb.process_first_packet(conn_packet(0));
  REQUIRE(routed);
  CHECK(routed->dip.index == 0);
  CHECK(routed->packet.tuple.dst_ip == Ipv4::from_octets(10, 0, 0, 1));
  CHECK(lb.nic().table().size() == 1);
  CHECK(lb.connections().size() == 1);
  CHECK(lb.clock().now() == m.c_hash + m.lookup_cost(0) + m.c_dip_select + m.c_sw_install + m.c_fd_install +
                                m.c_rewrite + m.c_forward);
  CHECK(code_of([&] { lb.process_first_packet(conn_packet(0)); }) == Errc::ConsistencyViolation);
}

TEST_CASE("full hardware table falls back to software") {
  NicConfig nic;
  nic.fd_capacity = 1;
  auto lb = make_lb(Mode::HNLB, 2, nic);
  REQUIRE(lb.process_first_packet(conn_packet(0)));
  const auto second = lb.process_first_packet(conn_packet(1));
  REQUIRE(second);
  CHECK(lb.nic().table().size() == 1);
  CHECK(lb.stats().hw_table_full == 1);
  CHECK(lb.connections().lookup(conn_packet(1).tuple) == second->dip);
  CHECK(lb.stats().packets_forwarded == 2);
}

TEST_CASE("SLB never touches the hardware table") {
  auto lb = make_lb(Mode::SLB);
  const auto stats = lb.run(steady(100, 1e6, 0.002));
  CHECK(lb.nic().table().size() == 0);
  CHECK(stats.packets_forwarded == 2000);
}

TEST_CASE("unknown VIP is a counted drop") {
  auto lb = make_lb(Mode::HNLB);
  const Vip other{Ipv4::from_octets(42, 3, 4, 6), 443, Protocol::TCP};
  CHECK_FALSE(lb.process_first_packet({connection_tuple(0, other), 64, 0, 0}));
  CHECK(lb.stats().unknown_vip_drops == 1);
  CHECK(lb.stats().packets_dropped == 1);
  CHECK(lb.connections().size() == 0);
}

TEST_CASE("default queue hit reuses the stored Dip") {
  auto lb = make_lb(Mode::SLB, 3);
  const auto first = lb.process_first_packet(conn_packet(0));
  REQUIRE(first);
  const Cycles before = lb.clock().now();
  const auto again = lb.process_default_queue_packet(conn_packet(0));
  REQUIRE(again);
  CHECK(again->tuple.dst_ip == first->dip.ip);
  const CostModel& m = lb.costs();
  CHECK(lb.clock().now() - before == m.c_hash + m.lookup_cost(1) + m.c_rewrite + m.c_forward);

  // A miss on queue 0 behaves like process_first_packet.
  auto twin = make_lb(Mode::SLB, 3);
  twin.process_first_packet(conn_packet(0));
  const auto via_default = lb.process_default_queue_packet(conn_packet(1));
  const auto via_first = twin.process_first_packet(conn_packet(1));
  REQUIRE(via_default);
  REQUIRE(via_first);
  CHECK(*via_default == via_first->packet);
}

TEST_CASE("DIP queue burst") {
  auto lb = make_lb(Mode::HNLB);
  const CostModel& m = lb.costs();
  std::vector<Packet> burst;
  for (std::uint32_t i = 0; i < 16; ++i) burst.push_back(conn_packet(i));

  const Cycles t0 = lb.clock().now();
  const auto out = lb.process_dip_queue_burst(3, burst);
  REQUIRE(out.size() == 16);
  for (const Packet& p : out) {
    CHECK(p.tuple.dst_ip == Ipv4::from_octets(10, 0, 0, 3));
    CHECK(p.tuple.dst_port == 335);
  }
  CHECK(lb.clock().now() - t0 == 16 * (m.c_rewrite + m.c_forward));

  const Cycles t1 = lb.clock().now();
  CHECK(lb.process_dip_queue_burst(3, {}).empty());
  CHECK(lb.clock().now() == t1);

  CHECK(code_of([&] { lb.process_dip_queue_burst(0, burst); }) == Errc::InvalidQueue);
  CHECK(code_of([&] { lb.process_dip_queue_burst(11, burst); }) == Errc::InvalidQueue);
  auto slb = make_lb(Mode::SLB);
  CHECK(code_of([&] { slb.process_dip_queue_burst(1, burst); }) == Errc::InvalidQueue);
}

TEST_CASE("DIP queue path is cheaper than the software path at any table size") {
  for (std::uint32_t conns : {1u, 100u, 1000u, 8000u}) {
    auto lb = make_lb(Mode::HNLB);
    for (std::uint32_t k = 0; k < conns; ++k) lb.process_first_packet(conn_packet(k));
    std::vector<Packet> burst;
    for (std::uint32_t i = 0; i < 32; ++i) burst.push_back(conn_packet(i % conns));

    Cycles t = lb.clock().now();
    for (const Packet& p : burst) lb.process_default_queue_packet(p);
    const Cycles software = lb.clock().now() - t;
    t = lb.clock().now();
    lb.process_dip_queue_burst(1, burst);
    const Cycles hardware = lb.clock().now() - t;
    CHECK(hardware < software);
  }
}

TEST_CASE("no traffic: REF grows, OPS stays zero") {
  for (Mode mode : {Mode::SLB, Mode::HNLB}) {
    auto lb = make_lb(mode);
    const auto stats = lb.run({}, StopCondition{2'200'000});
    CHECK(stats.counters.ops == 0);
    CHECK(stats.counters.ref > 0);
    CHECK(compute_util(stats.counters) == 0.0);
    CHECK(compute_util_plus(stats.counters, lb.util_config()) == 0.0);
  }
}

TEST_CASE("saturated loop approaches full utilization") {
  auto lb = make_lb(Mode::SLB);
  std::vector<Packet> backlog;
  for (std::uint64_t i = 0; i < 4096; ++i) backlog.push_back(conn_packet(0, 0, i));
  const auto stats = lb.run(backlog);
  CHECK(stats.packets_dropped == 0);
  CHECK(stats.counters.n_b == 4096 / 32);
  CHECK(compute_util(stats.counters) > 0.999);
  CHECK(compute_util_plus(stats.counters, lb.util_config()) > 0.999);
}

TEST_CASE("HNLB polls every queue in strict rotation") {
  PipelineConfig cfg;
  cfg.record_polls = true;
  auto lb = make_lb(Mode::HNLB, 3, {}, cfg);
  const auto stats = lb.run(steady(30, 2e6, 0.002));
  REQUIRE(stats.poll_log.size() > 1000);
  std::size_t out_of_order = 0;
  for (std::size_t i = 0; i < stats.poll_log.size(); ++i)
    if (stats.poll_log[i] != i % 11) ++out_of_order;
  CHECK(out_of_order == 0);
  CHECK(stats.packets_forwarded == 4000);
}

TEST_CASE("packets racing the rule install stay on their Dip") {
  PipelineConfig cfg;
  cfg.record_forwarding = true;
  auto lb = make_lb(Mode::HNLB, 10, {}, cfg);
  // The first packet takes ~800 cycles; the second lands before the rule.
  const std::vector<Packet> pkts{conn_packet(0, 0, 0), conn_packet(0, 10, 1), conn_packet(0, 2000, 2)};
  const auto stats = lb.run(pkts);
  REQUIRE(stats.forward_log.size() == 3);
  CHECK(stats.forward_log[0].path == PacketPath::FirstPacket);
  CHECK(stats.forward_log[1].path == PacketPath::SoftwareHit);
  CHECK(stats.forward_log[2].path == PacketPath::DipQueue);
  CHECK(stats.forward_log[1].dip == stats.forward_log[0].dip);
  CHECK(stats.forward_log[2].dip == stats.forward_log[0].dip);
  CHECK(stats.forward_log[2].queue == stats.forward_log[0].dip.index + 1);
}

TEST_CASE("connections beyond the rule table stay consistent") {
  PipelineConfig cfg;
  cfg.record_forwarding = true;
  NicConfig nic;
  nic.fd_capacity = 100;
  auto lb = make_lb(Mode::HNLB, 10, nic, cfg);
  const auto stats = lb.run(steady(500, 1e6, 0.02));
  CHECK(stats.hw_table_full > 0);
  std::map<FiveTuple, Dip> first;
  std::size_t violations = 0;
  for (const ForwardRecord& r : stats.forward_log) {
    const auto [it, fresh] = first.emplace(r.tuple, r.dip);
    if (!fresh && !(it->second == r.dip)) ++violations;
  }
  CHECK(first.size() == 500);
  CHECK(violations == 0);
}

TEST_CASE("conservation holds when the run is cut short") {
  auto lb = make_lb(Mode::SLB);
  const auto pkts = steady(1000, 20e6, 0.001);
  const auto stats = lb.run(pkts, StopCondition{lb.clock().cycles_at_ns(500'000)});
  CHECK(stats.packets_in < pkts.size());
  CHECK(stats.packets_in == stats.packets_forwarded + stats.packets_dropped + stats.residual);
  CHECK(stats.packets_dropped > 0);
}

TEST_CASE("drops appear only above the service rate") {
  auto below = make_lb(Mode::SLB);
  CHECK(below.run(steady(1, 5e6, 0.01)).packets_dropped == 0);
  auto above = make_lb(Mode::SLB);
  CHECK(above.run(steady(1, 20e6, 0.01)).packets_dropped > 0);
}

TEST_CASE("sub-windows add up to the whole run") {
  PipelineConfig cfg;
  cfg.window_cycles = 100'000;
  auto lb = make_lb(Mode::HNLB, 10, {}, cfg);
  const auto stats = lb.run(steady(100, 3e6, 0.002));
  REQUIRE(stats.windows.size() > 10);
  UtilCounters sum;
  for (const MetricWindow& w : stats.windows) sum += w.counters;
  CHECK(sum == stats.counters);
  for (std::size_t i = 1; i < stats.windows.size(); ++i)
    CHECK(stats.windows[i].start == stats.windows[i - 1].start + cfg.window_cycles);
}

TEST_CASE("invalid pipeline configurations") {
  PipelineConfig cfg;
  cfg.burst_max = 0;
  CHECK(code_of([&] { LoadBalancer(cfg, pool_of(1), {}, CostModel{}); }) == Errc::ConfigError);
  CHECK(code_of([&] { LoadBalancer({}, pool_of(11), {}, CostModel{}); }) == Errc::ConfigError);
  CostModel free_poll;
  free_poll.c_poll = 0;
  CHECK(code_of([&] { LoadBalancer({}, pool_of(1), {}, free_poll); }) == Errc::ConfigError);
}
