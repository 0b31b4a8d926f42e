#include <doctest.h>

#include "hnlb/error.hpp"
#include "hnlb/metrics.hpp"

using namespace hnlb;

TEST_CASE("util is OPS over REF") {
  CHECK(compute_util({1'000'000'000, 0, 0, 0}) == 0.0);
  CHECK(compute_util({1'000'000'000, 1'000'000'000, 1, 1}) == 1.0);
  CHECK(compute_util({1'000'000'000, 500'000'000, 1, 1}) == 0.5);
  try {
    compute_util({0, 0, 0, 0});
    FAIL("expected UndefinedWindow");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UndefinedWindow);
  }
}

TEST_CASE("util+ weights util by burst fill") {
  const UtilConfig slb{32, false};
  const UtilConfig hnlb{16, true};
  CHECK(compute_util_plus({1000, 1000, 320, 10}, slb) == 1.0);
  CHECK(compute_util_plus({1000, 800, 160, 10}, slb) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(compute_util_plus({1000, 1000, 320, 10}, hnlb) == 1.0);
  CHECK(compute_util_plus({1000, 0, 0, 0}, slb) == 0.0);
  CHECK_THROWS_AS(compute_util_plus({0, 0, 0, 0}, slb), Error);
}

TEST_CASE("config presets derive B from the burst size") {
  CHECK(UtilConfig::single_queue().max_burst == 32);
  CHECK_FALSE(UtilConfig::single_queue().clamp);
  CHECK(UtilConfig::multi_queue().max_burst == 16);
  CHECK(UtilConfig::multi_queue().clamp);
  CHECK(UtilConfig::multi_queue(1).max_burst == 1);
}

TEST_CASE("snapshot_and_reset") {
  UtilCounters live{100, 40, 7, 2};
  const UtilCounters first = snapshot_and_reset(live);
  CHECK(first == UtilCounters{100, 40, 7, 2});
  CHECK(live == UtilCounters{});
  CHECK(snapshot_and_reset(live) == UtilCounters{});

  UtilCounters total, windowed_sum;
  for (Cycles i = 1; i <= 50; ++i) {
    const UtilCounters step{i * 3, i, i % 5, i % 2};
    total += step;
    live += step;
    if (i % 7 == 0) windowed_sum += snapshot_and_reset(live);
  }
  windowed_sum += snapshot_and_reset(live);
  CHECK(windowed_sum == total);
}
