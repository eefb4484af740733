#include <doctest.h>

#include <cmath>

#include "ctmdp/rng.hpp"

using namespace ctmdp::rng;

TEST_CASE("identical seeds give identical streams") {
  Stream a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("substreams differ from each other and from the base stream") {
  Stream base(42);
  Stream s0 = Stream::substream(42, 0);
  Stream s1 = Stream::substream(42, 1);
  int same01 = 0, same0b = 0;
  for (int i = 0; i < 64; ++i) {
    const auto x0 = s0.next_u64();
    if (x0 == s1.next_u64()) ++same01;
    if (x0 == base.next_u64()) ++same0b;
  }
  CHECK(same01 == 0);
  CHECK(same0b == 0);
}

TEST_CASE("uniform01 stays in (0, 1]") {
  Stream s(7);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform01();
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("normal and exponential match their first two moments loosely") {
  Stream s(123);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    sumsq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sumsq / n - 1.0) < 0.02);

  double esum = 0.0;
  for (int i = 0; i < n; ++i) esum += s.exponential(2.0);
  CHECK(std::abs(esum / n - 0.5) < 0.01);
}

TEST_CASE("exponential with zero rate never fires") {
  Stream s(5);
  CHECK(std::isinf(s.exponential(0.0)));
  CHECK(std::isinf(s.exponential(-1.0)));
}
