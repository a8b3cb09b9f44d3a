#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cara/config.hpp"
#include "cara/harness.hpp"

using namespace cara;

TEST_CASE("flat config parsing with comments and lists") {
  auto cfg = config::FlatConfig::parse_string(
      "# comment line\n"
      "scenario.kind = s2\n"
      "trial.T = 12   # trailing comment\n"
      "report.times = 7, 9, 11\n"
      "rule.nu = 0.1\n"
      "log.trial = 1\n");
  CHECK(cfg.get_string("scenario.kind", "") == "s2");
  CHECK(cfg.get_int("trial.T", 0) == 12);
  CHECK(cfg.get_double("rule.nu", 0) == doctest::Approx(0.1));
  CHECK(cfg.get_bool("log.trial", false));
  auto times = cfg.get_int_list("report.times", {});
  REQUIRE(times.size() == 3);
  CHECK(times[1] == 9);
  CHECK(cfg.get_int("missing.key", 5) == 5);
}

TEST_CASE("malformed lines are rejected") {
  CHECK_THROWS(config::FlatConfig::parse_string("no equals sign\n"));
  CHECK_THROWS(config::FlatConfig::parse_string("= value\n"));
  auto cfg = config::FlatConfig::parse_string("trial.T = twelve\n");
  CHECK_THROWS(cfg.get_int("trial.T", 0));
}

TEST_CASE("run config maps keys onto the engine structures") {
  auto flat = config::FlatConfig::parse_string(
      "scenario.kind = s2\n"
      "trial.T = 50\n"
      "trial.K = 5\n"
      "trial.cohort_size = 50\n"
      "rule.nu = 0.1\n"
      "rule.alpha = 0.05\n"
      "hal.knot_cap = 40\n"
      "hal.lambda_grid = 30\n"
      "hal.folds = 5\n"
      "mc.reps = 3\n"
      "mc.seed = 99\n"
      "mc.workers = 2\n"
      "report.times = 11,21\n"
      "run.designs = rct,fixed1,sl\n");
  harness::RunConfig rc = harness::RunConfig::from_config(flat);
  rc.validate();
  CHECK(rc.scenario_name == "s2");
  CHECK(rc.scenario.gamma.size() == 5);
  CHECK(rc.trial.total_time == 50);
  CHECK(rc.estimation.hal.knot_cap == 40);
  CHECK(rc.estimation.hal.grid_size == 30);
  CHECK(rc.reps == 3);
  CHECK(rc.seed == 99);
  CHECK(rc.designs.size() == 3);
  CHECK(rc.designs[1].name() == "fixed1");
}

TEST_CASE("glm scenario requires coefficient rows") {
  auto flat = config::FlatConfig::parse_string(
      "scenario.kind = glm\n"
      "trial.K = 2\n");
  CHECK_THROWS(harness::RunConfig::from_config(flat));
  auto ok = config::FlatConfig::parse_string(
      "scenario.kind = glm\n"
      "trial.K = 2\n"
      "trial.T = 10\n"
      "scenario.glm.k1.main = 0.1, 0.2\n"
      "scenario.glm.k1.inter = 0.0, -0.3\n"
      "scenario.glm.k2.main = 0.0, 0.1\n"
      "scenario.glm.k2.inter = 0.05, -0.2\n");
  harness::RunConfig rc = harness::RunConfig::from_config(ok);
  CHECK(rc.scenario.glm.size() == 2);
  CHECK(rc.scenario.glm[1].inter[1] == doctest::Approx(-0.2));
}
