#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "exleak/rng.hpp"

using namespace exleak;

TEST_SUITE("rng") {
  TEST_CASE("outputs are a pure function of key and counter") {
    CounterRng a(42), b(42), c(43);
    std::vector<std::uint64_t> xa, xb, xc;
    for (int i = 0; i < 8; ++i) {
      xa.push_back(a.next_u64());
      xb.push_back(b.next_u64());
      xc.push_back(c.next_u64());
    }
    CHECK(xa == xb);
    CHECK(xa != xc);
  }

  TEST_CASE("derive_key depends on path order") {
    CHECK(derive_key(1, {2, 3}) == derive_key(1, {2, 3}));
    CHECK(derive_key(1, {2, 3}) != derive_key(1, {3, 2}));
    CHECK(derive_key(1, {2}) != derive_key(2, {2}));
    CHECK(hash_tag("knn") != hash_tag("lda"));
  }

  TEST_CASE("uniform and below stay in range") {
    CounterRng r(7);
    for (int i = 0; i < 10000; ++i) {
      const double u = r.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      REQUIRE(r.below(7) < 7u);
    }
  }

  TEST_CASE("normal has roughly unit moments") {
    CounterRng r(99);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double z = r.normal();
      sum += z;
      sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
  }

  TEST_CASE("shuffle is a seeded permutation") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto a = v, b = v;
    CounterRng r1(5), r2(5);
    shuffle(a, r1);
    shuffle(b, r2);
    CHECK(a == b);
    CHECK(a != v);
    std::sort(a.begin(), a.end());
    CHECK(a == v);
  }
}
