#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cara/config.hpp"
#include "cara/dgp.hpp"
#include "cara/estimators.hpp"
#include "cara/metrics.hpp"
#include "cara/randomize.hpp"
#include "cara/trial.hpp"

namespace cara::harness {

struct RunConfig {
  dgp::ScenarioSpec scenario;
  std::string scenario_name = "s1";
  trial::TrialConfig trial;
  randomize::RuleConfig rule;
  tmle::EstimatorOptions estimation;
  int refit_interval = 1;            // CATE refit cadence in time steps
  int reps = 100;
  std::uint64_t seed = 20240501;
  int workers = 1;
  std::vector<int> report_times;     // estimation/reporting time points
  std::vector<randomize::Design> designs;
  std::string out_dir = ".";
  bool allow_partial = false;
  bool log_trial = false;

  static RunConfig from_config(const config::FlatConfig& cfg);
  void validate() const;
};

/// Replicate inputs as swappable hooks so a live run and a log replay share
/// one code path: baselines and outcomes come from the DGP or from a trial
/// log; arms are drawn or copied; each computed rule can be inspected.
struct ReplicateHooks {
  std::function<std::vector<Vector>(int t)> baselines;
  std::function<double(const trial::ParticipantRecord&, int k)> outcome;
  std::function<int(int id, double p1)> draw_arm;
  std::function<void(int id, double p1, const std::string& provenance)> on_rule;
  bool collect_records = true;
};

struct ReplicateResult {
  std::vector<metrics::RepRecord> records;
  trial::TrialHistory history;
  bool aborted = false;
  std::string abort_reason;
};

/// The sequential loop: reveal, refit CATE models, (superlearner) fit all
/// surrogate utilities and select, enroll, freeze rules at cohort start,
/// assign. Assignment at time t sees only data revealed at or before t.
ReplicateResult run_replicate_with_hooks(const RunConfig& cfg, const randomize::Design& design,
                                         int rep, const ReplicateHooks& hooks);

/// Simulation replicate with DGP-backed hooks and counter-derived streams.
ReplicateResult run_replicate(const RunConfig& cfg, const randomize::Design& design, int rep);

/// Design trajectory only (no reporting records); used by the marginal
/// counterfactual oracle.
trial::TrialHistory run_design_trajectory(const RunConfig& cfg, const randomize::Design& design,
                                          int rep);

struct ExperimentResult {
  int exit_code = 0;
  std::vector<std::string> files_written;
  int aborted_replicates = 0;
};

/// Runs every configured design x replicate on a worker pool, writes
/// per_rep.csv and aggregate.csv (plus optional trial logs). Results are a
/// pure function of the config; the worker count never changes the bytes.
ExperimentResult run_experiment(const RunConfig& cfg);

/// Oracle-only tables: true CATE grid, true ATE / optimal-rule values, and
/// the marginal counterfactual value per design and reporting time.
ExperimentResult write_truth_tables(const RunConfig& cfg);

std::string trial_log_text(const RunConfig& cfg, const randomize::Design& design, int rep,
                           const trial::TrialHistory& history);

struct AuditResult {
  int assignments_checked = 0;
  int mismatches = 0;
};

/// Replays a trial log through the replicate loop, recomputing every rule
/// from the logged history, and compares each reconstructed assignment
/// probability bit-for-bit against the log.
AuditResult audit_log(const std::string& log_path);

std::string format_double(double v);

} // namespace cara::harness
