#include <doctest.h>

#include <random>
#include <set>

#include "hnlb/error.hpp"
#include "hnlb/nic.hpp"

using namespace hnlb;

namespace {

FiveTuple tuple_n(std::uint32_t n) {
  return {Protocol::TCP, Ipv4{0x0a000000u + n}, static_cast<std::uint16_t>(1024 + n % 60000),
          Ipv4::from_octets(42, 3, 4, 5), 443};
}

Packet packet_n(std::uint32_t n, std::uint64_t seq = 0) { return {tuple_n(n), 64, 0, seq}; }

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

TEST_CASE("hardware table install and classify") {
  HardwareMatchTable hw(8000, 10);
  CHECK(hw.classify(packet_n(1)) == kDefaultQueue);
  CHECK(hw.install(tuple_n(1), 3) == InstallResult::Installed);
  CHECK(hw.classify(packet_n(1)) == 3);
  CHECK(hw.classify(packet_n(2)) == kDefaultQueue);

  CHECK(hw.install(tuple_n(1), 3) == InstallResult::Installed);
  CHECK(hw.size() == 1);
  CHECK(code_of([&] { hw.install(tuple_n(1), 4); }) == Errc::ConsistencyViolation);
  CHECK(code_of([&] { hw.install(tuple_n(2), 0); }) == Errc::InvalidQueue);
  CHECK(code_of([&] { hw.install(tuple_n(2), 11); }) == Errc::InvalidQueue);
}

TEST_CASE("hardware table reports TableFull at capacity") {
  HardwareMatchTable hw(8000, 10);
  for (std::uint32_t i = 0; i < 8000; ++i) REQUIRE(hw.install(tuple_n(i), 1 + i % 10) == InstallResult::Installed);
  CHECK(hw.install(tuple_n(8000), 1) == InstallResult::TableFull);
  CHECK(hw.size() == 8000);
  CHECK(hw.classify(packet_n(8000)) == kDefaultQueue);
}

TEST_CASE("classify only steers ruled tuples") {
  std::mt19937 rng(3);
  HardwareMatchTable hw(8000, 10);
  std::set<std::uint32_t> ruled;
  while (ruled.size() < 500) ruled.insert(rng() % 1000);
  for (std::uint32_t n : ruled) hw.install(tuple_n(n), 1 + n % 10);

  std::size_t steered = 0, wrong = 0;
  for (std::uint32_t n = 0; n < 1000; ++n) {
    const QueueId q = hw.classify(packet_n(n));
    if (q != kDefaultQueue) ++steered;
    if ((q != kDefaultQueue) != ruled.contains(n)) ++wrong;
  }
  CHECK(steered == 500);
  CHECK(wrong == 0);
}

TEST_CASE("buffer budget") {
  const BufferBudget b;
  CHECK(b.available_receive_slots(0) == 4096);
  CHECK(b.available_receive_slots(8000) == 2096);
  CHECK(b.available_receive_slots(1) == 4095);  // ceil(0.25)
  CHECK(BufferBudget{100, 1.0}.available_receive_slots(200) == 0);

  const auto caps = b.per_queue_capacity(8000, 10, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  REQUIRE(caps.size() == 11);
  CHECK(caps[0] == 2096 / 11 + 2096 % 11);
  for (QueueId q = 1; q <= 10; ++q) CHECK(caps[q] == 2096 / 11);

  const auto single = b.per_queue_capacity(0, 10, {0});
  CHECK(single[0] == 4096);
  for (QueueId q = 1; q <= 10; ++q) CHECK(single[q] == 0);
}

TEST_CASE("queues are bounded FIFOs") {
  NicQueues nq(2);
  nq.set_capacity(1, 2);
  CHECK(nq.enqueue(1, packet_n(0, 0)) == EnqueueResult::Queued);
  CHECK(nq.enqueue(1, packet_n(0, 1)) == EnqueueResult::Queued);
  CHECK(nq.enqueue(1, packet_n(0, 2)) == EnqueueResult::Dropped);
  CHECK(nq.drop_count(1) == 1);
  CHECK(nq.total_drops() == 1);

  const auto got = nq.poll(1, 32);
  REQUIRE(got.size() == 2);
  CHECK(got[0].seq == 0);
  CHECK(got[1].seq == 1);
  CHECK(nq.poll(1, 32).empty());
  CHECK(nq.all_empty());

  CHECK(code_of([&] { nq.enqueue(3, packet_n(0)); }) == Errc::InvalidQueue);
  CHECK(code_of([&] { nq.poll(3, 1); }) == Errc::InvalidQueue);
}

TEST_CASE("poll returns at most one burst") {
  NicQueues nq(1);
  nq.set_capacity(0, 4096);
  for (std::uint64_t i = 0; i < 5; ++i) nq.enqueue(0, packet_n(0, i));
  auto five = nq.poll(0, 32);
  REQUIRE(five.size() == 5);
  for (std::uint64_t i = 0; i < 5; ++i) CHECK(five[i].seq == i);

  for (std::uint64_t i = 0; i < 100; ++i) nq.enqueue(0, packet_n(0, i));
  const auto burst = nq.poll(0, 32);
  CHECK(burst.size() == 32);
  CHECK(burst.front().seq == 0);
  CHECK(burst.back().seq == 31);
  CHECK(nq.occupancy(0) == 68);
}

TEST_CASE("emulated NIC resizes queues as rules land") {
  NicConfig cfg;
  EmulatedNic nic(cfg, true);
  CHECK(nic.active_queues().size() == 11);
  CHECK(nic.available_receive_slots() == 4096);
  for (std::uint32_t i = 0; i < 8000; ++i) nic.install_rule(tuple_n(i), 1 + i % 10);
  CHECK(nic.available_receive_slots() == 2096);
  std::size_t total = 0;
  for (QueueId q = 0; q <= 10; ++q) total += nic.queues().capacity(q);
  CHECK(total == 2096);

  const auto d = nic.receive(packet_n(7));
  CHECK(d.queue == 1 + 7 % 10);
  CHECK(d.result == EnqueueResult::Queued);

  EmulatedNic slb(cfg, false);
  CHECK(slb.active_queues() == std::vector<QueueId>{0});
  CHECK(slb.queues().capacity(0) == 4096);
  CHECK(slb.receive(packet_n(7)).queue == kDefaultQueue);
}

TEST_CASE("NIC config without room for every queue is rejected") {
  NicConfig cfg;
  cfg.budget.total_slots = 2005;  // 5 slots left with 8000 rules, 11 queues
  CHECK(code_of([&] { EmulatedNic(cfg, true); }) == Errc::ConfigError);
}

TEST_CASE("NIC latency interpolates between the two anchors") {
  CHECK(nic_latency_us(0) == 95.0);
  CHECK(nic_latency_us(4000) == 100.0);
  CHECK(nic_latency_us(8000) == 105.0);
}
