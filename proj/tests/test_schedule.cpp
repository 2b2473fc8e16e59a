#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "tailfuse/errors.hpp"
#include "tailfuse/rng.hpp"
#include "tailfuse/schedule.hpp"

using namespace tailfuse;

namespace {

GammaSchedule paper_decay() {
  return GammaSchedule::make(GammaMode::exp_decay, 2.0, 0.1, 20);
}

}  // namespace

TEST_CASE("exponential decay endpoints and midpoint") {
  const GammaSchedule s = paper_decay();
  CHECK(gamma_at(s, 0) == 2.0);
  CHECK(gamma_at(s, 20) == 0.1);
  // 2 * (0.05)^(1/2), evaluated with high-precision arithmetic.
  CHECK(gamma_at(s, 10) == doctest::Approx(0.44721359549995794).epsilon(1e-12));
}

TEST_CASE("linear decay midpoint is the arithmetic midpoint") {
  const auto s = GammaSchedule::make(GammaMode::linear_decay, 2.0, 0.1, 20);
  CHECK(gamma_at(s, 10) == doctest::Approx(1.05).epsilon(1e-12));
}

TEST_CASE("exponential growth mirrors decay") {
  const auto s = GammaSchedule::make(GammaMode::exp_growth, 0.1, 2.0, 20);
  // 0.1 * 20^(1/2)
  CHECK(gamma_at(s, 10) == doctest::Approx(0.44721359549995794).epsilon(1e-12));
}

TEST_CASE("constant mode ignores gamma_fin") {
  const auto s = GammaSchedule::make(GammaMode::constant, 0.7, 99.0, 5);
  for (int z = 0; z <= 5; ++z) CHECK(gamma_at(s, z) == 0.7);
}

TEST_CASE("degenerate exponential schedule returns the constant value") {
  const auto s = GammaSchedule::make(GammaMode::exp_decay, 1.3, 1.3, 10);
  for (int z = 0; z <= 10; ++z) {
    CHECK(gamma_at(s, z) == doctest::Approx(1.3).epsilon(1e-15));
  }
}

TEST_CASE("out-of-range epochs are rejected") {
  const GammaSchedule s = paper_decay();
  CHECK_THROWS_AS(gamma_at(s, 21), ConfigError);
  CHECK_THROWS_AS(gamma_at(s, -1), ConfigError);
}

TEST_CASE("invalid schedules fail at construction") {
  CHECK_THROWS_AS(GammaSchedule::make(GammaMode::exp_decay, 2.0, 0.0, 20),
                  ConfigError);
  CHECK_THROWS_AS(GammaSchedule::make(GammaMode::exp_growth, 0.0, 2.0, 20),
                  ConfigError);
  CHECK_THROWS_AS(GammaSchedule::make(GammaMode::linear_decay, 0.1, 2.0, 20),
                  ConfigError);
  CHECK_THROWS_AS(GammaSchedule::make(GammaMode::linear_growth, 2.0, 0.1, 20),
                  ConfigError);
  CHECK_THROWS_AS(GammaSchedule::make(GammaMode::exp_decay, 2.0, 0.1, 0),
                  ConfigError);
  CHECK_THROWS_AS(GammaSchedule::make(GammaMode::constant, -1.0, 0.0, 5),
                  ConfigError);
}

TEST_CASE("mode names round-trip") {
  for (GammaMode m : {GammaMode::constant, GammaMode::linear_decay,
                      GammaMode::linear_growth, GammaMode::exp_decay,
                      GammaMode::exp_growth}) {
    CHECK(gamma_mode_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(gamma_mode_from_string("cosine"), ConfigError);
}

TEST_CASE("randomized schedules: endpoints, monotonicity, range, symmetry") {
  Rng rng(20240817);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = rng.next_uniform(0.01, 8.0);
    const double b = rng.next_uniform(0.01, 8.0);
    const int z_total = 1 + static_cast<int>(rng.next_below(60));
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);

    const GammaMode decay_mode =
        trial % 2 == 0 ? GammaMode::exp_decay : GammaMode::linear_decay;
    const GammaMode growth_mode =
        trial % 2 == 0 ? GammaMode::exp_growth : GammaMode::linear_growth;
    const auto decay = GammaSchedule::make(decay_mode, hi, lo, z_total);
    const auto growth = GammaSchedule::make(growth_mode, lo, hi, z_total);

    CHECK(std::abs(gamma_at(decay, 0) - hi) <= 1e-12);
    CHECK(std::abs(gamma_at(decay, z_total) - lo) <= 1e-12);
    CHECK(std::abs(gamma_at(growth, 0) - lo) <= 1e-12);
    CHECK(std::abs(gamma_at(growth, z_total) - hi) <= 1e-12);

    double prev_decay = gamma_at(decay, 0);
    double prev_growth = gamma_at(growth, 0);
    for (int z = 1; z <= z_total; ++z) {
      const double d = gamma_at(decay, z);
      const double g = gamma_at(growth, z);
      CHECK(d <= prev_decay);
      CHECK(g >= prev_growth);
      CHECK(d >= lo);
      CHECK(d <= hi);
      CHECK(g >= lo);
      CHECK(g <= hi);
      prev_decay = d;
      prev_growth = g;
    }

    // exp_decay a->b at z equals exp_growth b->a at Z-z.
    const auto exp_decay = GammaSchedule::make(GammaMode::exp_decay, hi, lo, z_total);
    const auto exp_growth = GammaSchedule::make(GammaMode::exp_growth, lo, hi, z_total);
    for (int z = 0; z <= z_total; ++z) {
      CHECK(std::abs(gamma_at(exp_decay, z) -
                     gamma_at(exp_growth, z_total - z)) <= 1e-12);
    }
  }
}
