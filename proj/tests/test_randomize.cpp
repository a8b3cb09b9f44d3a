#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "cara/randomize.hpp"
#include "cara/rng.hpp"

using namespace cara;
using namespace cara::randomize;

namespace {

SummaryMeasure summary_for(double cate, double se, bool informed, int K = 5) {
  SummaryMeasure s;
  s.w = Vector::Constant(1, 0.0);
  s.cate = Vector::Constant(K, cate);
  s.cate_se = Vector::Constant(K, se);
  s.informed.assign(K, informed);
  return s;
}

} // namespace

TEST_CASE("h_nu saturation and center values") {
  CHECK(h_nu(2.0, 1.0, 0.1) == doctest::Approx(0.9));
  CHECK(h_nu(-2.0, 1.0, 0.1) == doctest::Approx(0.1));
  CHECK(h_nu(0.0, 1.0, 0.1) == doctest::Approx(0.5));
  CHECK(h_nu(0.0, 7.3, 0.25) == doctest::Approx(0.5));
  // interior cubic value
  CHECK(h_nu(0.5, 1.0, 0.1) == doctest::Approx(0.775).epsilon(1e-12));
}

TEST_CASE("h_nu rejects nonpositive half-width") {
  CHECK_THROWS(h_nu(0.0, 0.0, 0.1));
  CHECK_THROWS(h_nu(0.0, -1.0, 0.1));
}

TEST_CASE("h_nu range, symmetry, monotonicity, boundary continuity") {
  RngStream rng = derive_stream(21, {1});
  for (int trial = 0; trial < 500; ++trial) {
    double nu = rng.uniform(0.0, 0.49);
    double b = rng.uniform(0.01, 3.0);
    double x = rng.uniform(-4.0, 4.0);
    double h = h_nu(x, b, nu);
    CHECK(h >= nu - 1e-15);
    CHECK(h <= 1.0 - nu + 1e-15);
    // odd symmetry about 1/2
    CHECK(h_nu(-x, b, nu) == doctest::Approx(1.0 - h).epsilon(1e-12));
    // monotone in x
    double x2 = rng.uniform(-4.0, 4.0);
    if (x2 < x) std::swap(x, x2);
    CHECK(h_nu(x, b, nu) <= h_nu(x2, b, nu) + 1e-12);
  }
  // continuity at the joins
  for (double b : {0.05, 1.0, 2.5}) {
    for (double nu : {0.0, 0.1, 0.3}) {
      CHECK(std::abs(h_nu(b - 1e-9, b, nu) - h_nu(b, b, nu)) <= 1e-6);
      CHECK(std::abs(h_nu(-b + 1e-9, b, nu) - h_nu(-b, b, nu)) <= 1e-6);
    }
  }
}

TEST_CASE("surrogate_rule branches") {
  RuleConfig cfg;  // nu = 0.1, alpha = 0.05
  // uninformed: fair coin regardless of estimates
  StochasticRule rule = surrogate_rule(summary_for(3.0, 0.01, false), 2, cfg);
  CHECK(rule.p1 == doctest::Approx(0.5));
  CHECK_FALSE(rule.informed);

  // CI excludes zero: cap branch (z * 0.05 = 0.098 < 0.3)
  rule = surrogate_rule(summary_for(0.3, 0.05, true), 1, cfg);
  CHECK(rule.p1 == doctest::Approx(0.9));
  CHECK(rule.informed);
  rule = surrogate_rule(summary_for(-0.3, 0.05, true), 1, cfg);
  CHECK(rule.p1 == doctest::Approx(0.1));

  // degenerate tau = 0: sign rule
  CHECK(surrogate_rule(summary_for(0.2, 0.0, true), 1, cfg).p1 == doctest::Approx(0.9));
  CHECK(surrogate_rule(summary_for(-0.2, 0.0, true), 1, cfg).p1 == doctest::Approx(0.1));
  CHECK(surrogate_rule(summary_for(0.0, 0.0, true), 1, cfg).p1 == doctest::Approx(0.5));

  // unusable SE sentinel: fully uncertain
  double inf = std::numeric_limits<double>::infinity();
  CHECK(surrogate_rule(summary_for(0.5, inf, true), 1, cfg).p1 == doctest::Approx(0.5));
}

TEST_CASE("emitted probabilities respect the exploration floor") {
  RuleConfig cfg;
  cfg.nu = 0.17;
  RngStream rng = derive_stream(21, {2});
  for (int trial = 0; trial < 300; ++trial) {
    double cate = rng.uniform(-2, 2);
    double se = rng.uniform(0, 0.5);
    StochasticRule rule = surrogate_rule(summary_for(cate, se, true), 3, cfg);
    CHECK(rule.p1 >= cfg.nu - 1e-12);
    CHECK(rule.p1 <= 1.0 - cfg.nu + 1e-12);
    CHECK(rule.p1 + rule.p0() == doctest::Approx(1.0));
  }
}

TEST_CASE("design_rule timing") {
  RuleConfig cfg;
  const int K = 5;
  SummaryMeasure sharp = summary_for(2.0, 0.001, true);
  SummaryMeasure uninf = summary_for(0.0, 0.0, false);

  // rct never adapts
  for (int t : {1, 10, 50})
    CHECK(design_rule(Design::rct(), sharp, std::nullopt, t, K, cfg).p1 == doctest::Approx(0.5));

  // fixed(1): coin at t = 1, informed afterwards
  CHECK(design_rule(Design::fixed(1), uninf, std::nullopt, 1, K, cfg).p1 == doctest::Approx(0.5));
  CHECK(design_rule(Design::fixed(1), sharp, std::nullopt, 2, K, cfg).p1 == doctest::Approx(0.9));

  // superlearner: coin through t = K even with sharp estimates
  CHECK(design_rule(Design::superlearner(), sharp, std::nullopt, K, K, cfg).p1 ==
        doctest::Approx(0.5));
  CHECK(design_rule(Design::superlearner(), sharp, 1, K + 1, K, cfg).p1 == doctest::Approx(0.9));
  CHECK_THROWS(design_rule(Design::superlearner(), sharp, std::nullopt, K + 1, K, cfg));
}

TEST_CASE("rule config validation and z multiplier") {
  RuleConfig cfg;
  CHECK(cfg.z() == doctest::Approx(1.959963984540054).epsilon(1e-12));
  cfg.nu = 0.5;
  CHECK_THROWS(cfg.validate());
  cfg.nu = -0.01;
  CHECK_THROWS(cfg.validate());
  cfg.nu = 0.1;
  cfg.alpha = 0.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("design name round-trip") {
  CHECK(Design::parse("rct", 5).name() == "rct");
  CHECK(Design::parse("fixed4", 5).name() == "fixed4");
  CHECK(Design::parse("sl", 5).name() == "sl");
  CHECK_THROWS(Design::parse("fixed9", 5));
  CHECK_THROWS(Design::parse("bogus", 5));
}
