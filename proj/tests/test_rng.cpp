#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "prepivot/rng.hpp"

using prepivot::RngStream;
using prepivot::derive_stream;

TEST_SUITE("rng") {

TEST_CASE("same seed and path replay the same sequence") {
  RngStream a(42, {1, 2, 3});
  RngStream b(42, {1, 2, 3});
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds and different paths diverge") {
  RngStream a(1, {7});
  RngStream b(2, {7});
  RngStream c(1, {8});
  CHECK(a.next_u64() != b.next_u64());
  RngStream a2(1, {7});
  CHECK(a2.next_u64() != c.next_u64());
}

TEST_CASE("child is a pure function of the path, not of draws consumed") {
  RngStream r(99, {4});
  RngStream before = r.child(5);
  for (int i = 0; i < 17; ++i) r.next_u64();
  RngStream after = r.child(5);
  for (int i = 0; i < 20; ++i) CHECK(before.next_u64() == after.next_u64());
}

TEST_CASE("derive_stream composes with child") {
  RngStream direct = derive_stream(7, {10, 20});
  RngStream walked = derive_stream(7, {}).child(10).child(20);
  for (int i = 0; i < 20; ++i) CHECK(direct.next_u64() == walked.next_u64());
}

TEST_CASE("sibling and transposed paths do not collide") {
  RngStream root(3, {});
  CHECK(root.child(0).next_u64() != root.child(1).next_u64());
  CHECK(root.child(0).child(1).next_u64() != root.child(1).child(0).next_u64());
  std::set<std::uint64_t> firsts;
  for (std::uint64_t i = 0; i < 2000; ++i) firsts.insert(root.child(i).next_u64());
  CHECK(firsts.size() == 2000);
}

TEST_CASE("uniform moments") {
  RngStream r(11, {});
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    s += u;
    s2 += u * u;
  }
  const double m = s / n, v = s2 / n - m * m;
  CHECK(std::abs(m - 0.5) < 4.0 / std::sqrt(12.0 * n));
  CHECK(std::abs(v - 1.0 / 12.0) < 0.002);
}

TEST_CASE("uniform_int is unbiased over its range") {
  RngStream r(13, {});
  const int n = 60000;
  int counts[6] = {0, 0, 0, 0, 0, 0};
  for (int i = 0; i < n; ++i) ++counts[r.uniform_int(6)];
  const double expect = n / 6.0;
  const double se = std::sqrt(n * (1.0 / 6.0) * (5.0 / 6.0));
  for (int c : counts) CHECK(std::abs(c - expect) < 4.5 * se);
}

TEST_CASE("normal moments and tails") {
  RngStream r(17, {});
  const int n = 400000;
  double s = 0, s2 = 0, s3 = 0;
  int above196 = 0, above35 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
    s3 += z * z * z;
    if (z > 1.959964) ++above196;
    if (z > 3.5) ++above35;
  }
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s3 / n) < 4.0 * std::sqrt(15.0 / n));
  // P(Z > 1.959964) = 0.025, P(Z > 3.5) = 2.326e-4.
  CHECK(std::abs(above196 / double(n) - 0.025) <
        4.5 * std::sqrt(0.025 * 0.975 / n));
  const double ptail = 2.326e-4;
  CHECK(std::abs(above35 / double(n) - ptail) <
        4.5 * std::sqrt(ptail * (1 - ptail) / n));
}

TEST_CASE("exponential mean") {
  RngStream r(19, {});
  const int n = 200000;
  double s = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.exponential(8.0);
    CHECK(x >= 0.0);
    s += x;
  }
  CHECK(std::abs(s / n - 8.0) < 4.0 * 8.0 / std::sqrt(double(n)));
}

}  // TEST_SUITE
