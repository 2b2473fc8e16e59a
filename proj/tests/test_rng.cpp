#include <doctest.h>

#include <set>

#include "tailfuse/rng.hpp"

using namespace tailfuse;

TEST_CASE("substreams are deterministic and purpose-separated") {
  Rng a = make_stream(42, "shuffle");
  Rng b = make_stream(42, "shuffle");
  Rng c = make_stream(42, "crop");
  CHECK(a.next_u64() == b.next_u64());
  Rng a2 = make_stream(42, "shuffle");
  CHECK(a2.next_u64() != c.next_u64());

  CHECK(derive_seed(1, "x", 0) != derive_seed(1, "x", 1));
  CHECK(derive_seed(1, "x", 2, 3) != derive_seed(1, "x", 3, 2));
}

TEST_CASE("next_unit stays in [0, 1)") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("next_below covers the range without bias artifacts") {
  Rng rng(11);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) seen.insert(rng.next_below(7));
  CHECK(seen.size() == 7);
  CHECK(*seen.rbegin() == 6);
}

TEST_CASE("shuffle permutes deterministically") {
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> w = v;
  Rng a(3), b(3);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  std::sort(v.begin(), v.end());
  CHECK(v == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("gaussian moments are sane") {
  Rng rng(13);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    sum += g;
    sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}
