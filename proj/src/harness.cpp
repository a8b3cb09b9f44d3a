#include "cara/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "cara/cate.hpp"
#include "cara/rng.hpp"
#include "cara/selector.hpp"

namespace cara::harness {

namespace {

constexpr std::uint64_t kBaselinePurpose = 1;
constexpr std::uint64_t kOutcomePurpose = 2;
constexpr std::uint64_t kArmPurpose = 3;

std::uint64_t design_stream_id(const randomize::Design& d) {
  switch (d.kind) {
    case randomize::DesignKind::kRct: return 0;
    case randomize::DesignKind::kFixedSurrogate: return static_cast<std::uint64_t>(d.fixed_k);
    case randomize::DesignKind::kSuperlearner: return 1000;
  }
  return 0;
}

bool contains(const std::vector<int>& v, int x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

randomize::SummaryMeasure build_summary(const Vector& w,
                                        const std::map<int, cate::CateModel>& models, int K) {
  randomize::SummaryMeasure s;
  s.w = w;
  s.cate = Vector::Zero(K);
  s.cate_se = Vector::Zero(K);
  s.informed.assign(K, false);
  for (const auto& [k, model] : models) {
    auto [b, tau] = cate::cate_at(model, w);
    s.cate[k - 1] = b;
    s.cate_se[k - 1] = tau;
    s.informed[k - 1] = true;
  }
  return s;
}

Vector candidate_vector(const trial::TrialHistory& hist, const Dataset& cc, int k) {
  Vector out(cc.size());
  for (Eigen::Index i = 0; i < cc.size(); ++i) {
    if (k == 0) {
      out[i] = 0.5;
      continue;
    }
    double p1 = hist.participant(cc.id[i]).candidate_p1[k - 1];
    if (std::isnan(p1)) throw std::logic_error("candidate rule missing for completed participant");
    out[i] = p1;
  }
  return out;
}

} // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void RunConfig::validate() const {
  scenario.validate();
  trial.validate();
  rule.validate();
  if (scenario.outcome_count != trial.outcome_count)
    throw std::invalid_argument("scenario and trial outcome counts differ");
  if (scenario.covariate_dim != trial.covariate_dim)
    throw std::invalid_argument("scenario and trial covariate dimensions differ");
  if (reps < 1) throw std::invalid_argument("need at least one replicate");
  if (refit_interval < 1) throw std::invalid_argument("refit interval must be >= 1");
  if (designs.empty()) throw std::invalid_argument("no designs configured");
}

RunConfig RunConfig::from_config(const config::FlatConfig& cfg) {
  RunConfig rc;
  std::string kind = cfg.get_string("scenario.kind", "s1");
  rc.trial.outcome_count = cfg.get_int("trial.K", 5);
  if (kind == "s1" || kind == "scenario1") {
    rc.scenario = dgp::ScenarioSpec::scenario1(rc.trial.outcome_count);
    rc.scenario_name = "s1";
  } else if (kind == "s2" || kind == "scenario2") {
    rc.scenario = dgp::ScenarioSpec::scenario2();
    rc.scenario_name = "s2";
    rc.trial.outcome_count = rc.scenario.outcome_count;
  } else if (kind == "glm" || kind == "glm_table") {
    rc.scenario.kind = dgp::ScenarioKind::kGlmTable;
    rc.scenario.outcome_count = rc.trial.outcome_count;
    rc.scenario_name = "glm";
  } else {
    throw std::runtime_error("unknown scenario.kind: " + kind);
  }
  rc.scenario.noise_sd = cfg.get_double("scenario.noise_sd", rc.scenario.noise_sd);
  rc.scenario.w_low = cfg.get_double("scenario.w_low", rc.scenario.w_low);
  rc.scenario.w_high = cfg.get_double("scenario.w_high", rc.scenario.w_high);
  rc.scenario.covariate_dim = cfg.get_int("trial.covariate_dim", 1);
  if (cfg.has("scenario.gamma")) {
    auto g = cfg.get_double_list("scenario.gamma", {});
    rc.scenario.gamma = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
  }
  if (rc.scenario.kind == dgp::ScenarioKind::kGlmTable) {
    for (int k = 1; k <= rc.scenario.outcome_count; ++k) {
      std::string base = "scenario.glm.k" + std::to_string(k);
      auto main = cfg.get_double_list(base + ".main", {});
      auto inter = cfg.get_double_list(base + ".inter", {});
      if (main.empty() || inter.empty())
        throw std::runtime_error("glm_table scenario needs " + base + ".main and .inter");
      dgp::GlmRow row;
      row.main = Eigen::Map<const Vector>(main.data(), static_cast<Eigen::Index>(main.size()));
      row.inter = Eigen::Map<const Vector>(inter.data(), static_cast<Eigen::Index>(inter.size()));
      rc.scenario.glm.push_back(std::move(row));
    }
  }

  rc.trial.total_time = cfg.get_int("trial.T", 50);
  rc.trial.covariate_dim = rc.scenario.covariate_dim;
  if (cfg.has("trial.cohort_size")) {
    auto sizes = cfg.get_int_list("trial.cohort_size", {});
    if (sizes.size() == 1) {
      rc.trial.cohort_size = sizes[0];
    } else {
      rc.trial.cohort_sizes = sizes;
    }
  }

  rc.rule.nu = cfg.get_double("rule.nu", 0.1);
  rc.rule.alpha = cfg.get_double("rule.alpha", 0.05);
  rc.estimation.alpha = rc.rule.alpha;
  rc.estimation.nu = rc.rule.nu;
  rc.estimation.hal.knot_cap = cfg.get_int("hal.knot_cap", 100);
  rc.estimation.hal.grid_size = cfg.get_int("hal.lambda_grid", 50);
  rc.estimation.hal.folds = cfg.get_int("hal.folds", 5);
  rc.estimation.hal.min_ratio = cfg.get_double("hal.min_ratio", 1e-4);
  rc.estimation.q_folds = rc.estimation.hal.folds;
  rc.refit_interval = cfg.get_int("hal.refit_interval", 1);

  rc.reps = cfg.get_int("mc.reps", 100);
  rc.seed = static_cast<std::uint64_t>(cfg.get_int("mc.seed", 20240501));
  rc.workers = cfg.get_int("mc.workers", 1);
  rc.report_times = cfg.get_int_list("report.times", {11, 21, 31, 41, 50});
  std::vector<std::string> default_designs{"rct"};
  for (int k = 1; k <= rc.trial.outcome_count; ++k)
    default_designs.push_back("fixed" + std::to_string(k));
  default_designs.push_back("sl");
  for (const std::string& name : cfg.get_string_list("run.designs", default_designs))
    rc.designs.push_back(randomize::Design::parse(name, rc.trial.outcome_count));
  rc.log_trial = cfg.get_bool("log.trial", false);
  return rc;
}

ReplicateResult run_replicate_with_hooks(const RunConfig& cfg, const randomize::Design& design,
                                         int rep, const ReplicateHooks& hooks) {
  ReplicateResult result{{}, trial::TrialHistory(cfg.trial), false, ""};
  const int K = cfg.trial.outcome_count;
  const int T = cfg.trial.total_time;
  const tmle::EstimatorOptions& est = cfg.estimation;

  std::vector<int> model_ks, record_ks;
  switch (design.kind) {
    case randomize::DesignKind::kRct:
      break;
    case randomize::DesignKind::kFixedSurrogate:
      model_ks = {design.fixed_k};
      record_ks = {design.fixed_k};
      break;
    case randomize::DesignKind::kSuperlearner:
      for (int k = 1; k <= K; ++k) {
        model_ks.push_back(k);
        record_ks.push_back(k);
      }
      break;
  }
  const bool is_sl = design.kind == randomize::DesignKind::kSuperlearner;

  std::map<int, cate::CateModel> models;
  std::optional<int> selected;

  try {
    for (int t = 1; t <= T; ++t) {
      result.history.advance_clock(t);
      result.history.reveal_outcomes(t, hooks.outcome);

      for (int k : model_ks) {
        if (t < k + 1) continue;
        bool due = !models.count(k) || ((t - (k + 1)) % cfg.refit_interval == 0);
        if (!due) continue;
        Dataset sd = result.history.surrogate_cases(t, k);
        if (sd.empty()) continue;
        models[k] = cate::fit_cate(sd, est, k, t);
      }

      std::map<int, tmle::TmleFit> sl_fits;
      if (is_sl && t >= K + 1) {
        Dataset cc = result.history.complete_cases(t);
        if (cc.size() >= 2) {
          tmle::PreparedOutcome prep = tmle::prepare_outcome(cc, est);
          for (int k = 1; k <= K; ++k)
            sl_fits[k] = tmle::tmle_psi_tk(cc, prep, candidate_vector(result.history, cc, k), est);
          try {
            selected = selector::select_surrogate(sl_fits, est.alpha);
          } catch (const std::runtime_error&) {
            // every fit degenerate: the previous selection persists
          }
        }
      }

      // reporting rows; regret and the non-optimal fraction are filled in
      // after this time point's cohort has been assigned
      std::vector<metrics::RepRecord> pending;
      if (hooks.collect_records && t >= K + 1) {
        std::vector<int> row_ks;
        if (is_sl) {
          for (int k = 1; k <= K; ++k) row_ks.push_back(k);
        } else if (contains(cfg.report_times, t)) {
          row_ks.push_back(design.kind == randomize::DesignKind::kRct ? 0 : design.fixed_k);
        }
        if (!row_ks.empty()) {
          Dataset cc = result.history.complete_cases(t);
          if (cc.size() >= 2) {
            std::optional<tmle::PreparedOutcome> prep;
            if (!is_sl) prep = tmle::prepare_outcome(cc, est);
            for (int k : row_ks) {
              tmle::TmleFit fit =
                  is_sl ? sl_fits.at(k)
                        : tmle::tmle_psi_tk(cc, *prep, candidate_vector(result.history, cc, k), est);
              metrics::RepRecord rec;
              rec.scenario = cfg.scenario_name;
              rec.design = design.name();
              rec.rep = rep;
              rec.t = t;
              rec.k = k;
              rec.psi_true_run = metrics::per_run_truth_psi(result.history, cfg.scenario, t, k);
              rec.psi_hat = fit.psi_hat;
              rec.se = fit.se;
              rec.ci_lo = fit.ci_lo;
              rec.ci_hi = fit.ci_hi;
              rec.covered = (rec.psi_true_run >= fit.ci_lo && rec.psi_true_run <= fit.ci_hi) ? 1 : 0;
              rec.epsilon_hat = fit.epsilon_hat;
              rec.eif_residual = fit.eif_residual;
              pending.push_back(std::move(rec));
            }
          }
        }
      }

      std::vector<Vector> baselines = hooks.baselines(t);
      std::vector<int> ids = result.history.enroll_cohort(t, baselines);
      for (int id : ids) {
        trial::ParticipantRecord& p = result.history.participant(id);
        randomize::SummaryMeasure summary = build_summary(p.w, models, K);
        for (int k : record_ks)
          p.candidate_p1[k - 1] = randomize::surrogate_rule(summary, k, cfg.rule).p1;

        double p1;
        std::string prov;
        switch (design.kind) {
          case randomize::DesignKind::kRct:
            p1 = 0.5;
            prov = "rct";
            break;
          case randomize::DesignKind::kFixedSurrogate:
            p1 = p.candidate_p1[design.fixed_k - 1];
            prov = design.name();
            break;
          case randomize::DesignKind::kSuperlearner:
            if (t <= K || !selected.has_value()) {
              p1 = 0.5;
              prov = "sl:coin";
            } else {
              p1 = p.candidate_p1[*selected - 1];
              prov = "sl:" + std::to_string(*selected);
            }
            break;
        }
        if (hooks.on_rule) hooks.on_rule(id, p1, prov);
        int arm = hooks.draw_arm(id, p1);
        result.history.record_assignment(id, arm, p1, prov);
      }

      if (!pending.empty()) {
        double reg = metrics::regret_at(result.history, cfg.scenario, t);
        double pn = metrics::prob_nonopt_at(result.history, cfg.scenario, t);
        for (metrics::RepRecord& rec : pending) {
          rec.regret = reg;
          rec.p_nonopt = pn;
          rec.selected_k = (is_sl && selected.has_value()) ? *selected : -1;
          result.records.push_back(std::move(rec));
        }
      }
      result.history.check_reveal_invariant();
    }
  } catch (const std::exception& e) {
    result.aborted = true;
    result.abort_reason = e.what();
    result.records.clear();
  }
  return result;
}

namespace {

ReplicateHooks dgp_hooks(const RunConfig& cfg, const randomize::Design& design, int rep) {
  const std::uint64_t did = design_stream_id(design);
  const std::uint64_t urep = static_cast<std::uint64_t>(rep);
  ReplicateHooks hooks;
  hooks.baselines = [&cfg, did, urep](int t) {
    RngStream s = derive_stream(cfg.seed, {did, urep, kBaselinePurpose, static_cast<std::uint64_t>(t)});
    std::vector<Vector> out;
    int count = cfg.trial.cohort_at(t);
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(dgp::sample_baseline(cfg.scenario, s));
    return out;
  };
  hooks.outcome = [&cfg, did, urep](const trial::ParticipantRecord& p, int k) {
    RngStream s = derive_stream(cfg.seed, {did, urep, kOutcomePurpose,
                                           static_cast<std::uint64_t>(p.id),
                                           static_cast<std::uint64_t>(k)});
    return dgp::cond_mean(cfg.scenario, k, p.arm, p.w) + cfg.scenario.noise_sd * s.normal();
  };
  hooks.draw_arm = [&cfg, did, urep](int id, double p1) {
    RngStream s = derive_stream(cfg.seed, {did, urep, kArmPurpose, static_cast<std::uint64_t>(id)});
    return s.bernoulli(p1);
  };
  return hooks;
}

} // namespace

ReplicateResult run_replicate(const RunConfig& cfg, const randomize::Design& design, int rep) {
  return run_replicate_with_hooks(cfg, design, rep, dgp_hooks(cfg, design, rep));
}

trial::TrialHistory run_design_trajectory(const RunConfig& cfg, const randomize::Design& design,
                                          int rep) {
  ReplicateHooks hooks = dgp_hooks(cfg, design, rep);
  hooks.collect_records = false;
  ReplicateResult r = run_replicate_with_hooks(cfg, design, rep, hooks);
  if (r.aborted) throw std::runtime_error("counterfactual trajectory aborted: " + r.abort_reason);
  return std::move(r.history);
}

std::string trial_log_text(const RunConfig& cfg, const randomize::Design& design, int rep,
                           const trial::TrialHistory& history) {
  std::ostringstream out;
  const int K = cfg.trial.outcome_count;
  out << "# carasim trial log v1\n";
  out << "# meta: design=" << design.name() << ";scenario=" << cfg.scenario_name
      << ";rep=" << rep << ";K=" << K << ";T=" << cfg.trial.total_time
      << ";covariate_dim=" << cfg.trial.covariate_dim << ";nu=" << format_double(cfg.rule.nu)
      << ";alpha=" << format_double(cfg.rule.alpha)
      << ";knot_cap=" << cfg.estimation.hal.knot_cap
      << ";lambda_grid=" << cfg.estimation.hal.grid_size
      << ";folds=" << cfg.estimation.hal.folds
      << ";min_ratio=" << format_double(cfg.estimation.hal.min_ratio)
      << ";refit_interval=" << cfg.refit_interval << ";q_folds=" << cfg.estimation.q_folds << "\n";
  out << "id,entry_time";
  for (int j = 0; j < cfg.trial.covariate_dim; ++j) out << ",w" << j;
  out << ",arm,assign_prob,rule_provenance";
  for (int k = 1; k <= K; ++k) out << ",y" << k;
  out << "\n";
  for (int i = 0; i < history.participant_count(); ++i) {
    const trial::ParticipantRecord& p = history.participant(i);
    out << p.id << "," << p.entry_time;
    for (int j = 0; j < cfg.trial.covariate_dim; ++j) out << "," << format_double(p.w[j]);
    out << "," << p.arm << "," << format_double(p.assign_prob) << "," << p.rule_provenance;
    for (int k = 1; k <= K; ++k) {
      out << ",";
      if (p.outcomes[k - 1].has_value()) out << format_double(*p.outcomes[k - 1]);
    }
    out << "\n";
  }
  return out.str();
}

namespace {

struct TaskResult {
  std::vector<metrics::RepRecord> records;
  bool aborted = false;
  std::string abort_reason;
  std::string log_text;
  std::string log_name;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  out << text;
}

std::string per_rep_csv(const std::vector<metrics::RepRecord>& records) {
  std::ostringstream out;
  out << "scenario,design,rep,t,k,psi_true_run,psi_hat,se,ci_lo,ci_hi,covered,"
         "epsilon_hat,eif_residual,selected_k,regret,p_nonopt\n";
  for (const auto& r : records) {
    out << r.scenario << "," << r.design << "," << r.rep << "," << r.t << "," << r.k << ","
        << format_double(r.psi_true_run) << "," << format_double(r.psi_hat) << ","
        << format_double(r.se) << "," << format_double(r.ci_lo) << "," << format_double(r.ci_hi)
        << "," << r.covered << "," << format_double(r.epsilon_hat) << ","
        << format_double(r.eif_residual) << ",";
    if (r.selected_k >= 0) out << r.selected_k;
    out << ",";
    if (!std::isnan(r.regret)) out << format_double(r.regret);
    out << ",";
    if (!std::isnan(r.p_nonopt)) out << format_double(r.p_nonopt);
    out << "\n";
  }
  return out.str();
}

std::string aggregate_csv(const metrics::McReport& report) {
  std::ostringstream out;
  out << "scenario,design,t,k,n_reps,truth_mean,bias,variance,coverage,regret_mean,"
         "p_nonopt_mean,sel_freq\n";
  for (const auto& row : report) {
    out << row.scenario << "," << row.design << "," << row.t << "," << row.k << "," << row.n_reps
        << "," << format_double(row.truth_mean) << "," << format_double(row.bias) << ","
        << format_double(row.variance) << "," << format_double(row.coverage) << ","
        << format_double(row.regret_mean) << "," << format_double(row.p_nonopt_mean) << ","
        << format_double(row.sel_freq) << "\n";
  }
  return out.str();
}

void run_pool(int workers, int task_count, const std::function<void(int)>& body) {
  if (workers <= 1) {
    for (int i = 0; i < task_count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  int spawn = std::min(workers, task_count);
  pool.reserve(spawn);
  for (int w = 0; w < spawn; ++w) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < task_count; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

} // namespace

ExperimentResult run_experiment(const RunConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);

  const int designs = static_cast<int>(cfg.designs.size());
  const int task_count = designs * cfg.reps;
  std::vector<TaskResult> results(task_count);

  run_pool(cfg.workers, task_count, [&](int task) {
    const int d = task / cfg.reps;
    const int rep = task % cfg.reps;
    ReplicateResult r = run_replicate(cfg, cfg.designs[d], rep);
    TaskResult& out = results[task];
    out.records = std::move(r.records);
    out.aborted = r.aborted;
    out.abort_reason = r.abort_reason;
    if (cfg.log_trial && !r.aborted) {
      out.log_name = "trial_log_" + cfg.scenario_name + "_" + cfg.designs[d].name() + "_rep" +
                     std::to_string(rep) + ".csv";
      out.log_text = trial_log_text(cfg, cfg.designs[d], rep, r.history);
    }
  });

  ExperimentResult res;
  std::vector<metrics::RepRecord> all_records;
  std::ostringstream diagnostics;
  for (int task = 0; task < task_count; ++task) {
    TaskResult& t = results[task];
    if (t.aborted) {
      ++res.aborted_replicates;
      diagnostics << cfg.designs[task / cfg.reps].name() << " rep " << (task % cfg.reps)
                  << " aborted: " << t.abort_reason << "\n";
      continue;
    }
    all_records.insert(all_records.end(), t.records.begin(), t.records.end());
  }

  std::string per_rep_path = cfg.out_dir + "/per_rep.csv";
  write_file(per_rep_path, per_rep_csv(all_records));
  res.files_written.push_back(per_rep_path);
  std::string agg_path = cfg.out_dir + "/aggregate.csv";
  write_file(agg_path, aggregate_csv(metrics::aggregate(all_records)));
  res.files_written.push_back(agg_path);
  for (TaskResult& t : results) {
    if (t.log_name.empty()) continue;
    std::string path = cfg.out_dir + "/" + t.log_name;
    write_file(path, t.log_text);
    res.files_written.push_back(path);
  }
  if (res.aborted_replicates > 0) {
    std::string diag_path = cfg.out_dir + "/diagnostics.txt";
    write_file(diag_path, diagnostics.str());
    res.files_written.push_back(diag_path);
    if (!cfg.allow_partial) res.exit_code = 1;
  }
  return res;
}

ExperimentResult write_truth_tables(const RunConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);
  ExperimentResult res;
  const int K = cfg.scenario.outcome_count;

  {
    std::ostringstream out;
    out << "scenario,k,w,cate,optimal_arm\n";
    if (cfg.scenario.covariate_dim == 1) {
      for (int k = 1; k <= K; ++k) {
        for (int g = 0; g <= 100; ++g) {
          double wv = cfg.scenario.w_low + (cfg.scenario.w_high - cfg.scenario.w_low) * g / 100.0;
          Vector w = Vector::Constant(1, wv);
          out << cfg.scenario_name << "," << k << "," << format_double(wv) << ","
              << format_double(dgp::true_cate(cfg.scenario, k, w)) << ","
              << dgp::optimal_rule(cfg.scenario, k, w) << "\n";
        }
      }
    }
    std::string path = cfg.out_dir + "/truth_cate.csv";
    write_file(path, out.str());
    res.files_written.push_back(path);
  }
  {
    std::ostringstream out;
    out << "scenario,k,true_ate,true_rule_value\n";
    for (int k = 1; k <= K; ++k) {
      out << cfg.scenario_name << "," << k << "," << format_double(dgp::true_ate(cfg.scenario, k));
      out << ",";
      if (cfg.scenario.covariate_dim == 1)
        out << format_double(dgp::true_rule_value(cfg.scenario, k));
      out << "\n";
    }
    std::string path = cfg.out_dir + "/truth_values.csv";
    write_file(path, out.str());
    res.files_written.push_back(path);
  }
  {
    std::ostringstream out;
    out << "scenario,design,t,reps,psi_marginal\n";
    std::vector<int> times;
    for (int t : cfg.report_times)
      if (t >= cfg.trial.outcome_count + 1 && t <= cfg.trial.total_time) times.push_back(t);
    for (const auto& design : cfg.designs) {
      // one trajectory per rep, streamed through every reporting time
      std::vector<double> acc(times.size(), 0.0);
      for (int rep = 0; rep < cfg.reps; ++rep) {
        trial::TrialHistory history = run_design_trajectory(cfg, design, rep);
        for (size_t ti = 0; ti < times.size(); ++ti) {
          const int cutoff = times[ti] - cfg.trial.outcome_count;
          double sum = 0.0;
          int n = 0;
          for (int i = 0; i < history.participant_count(); ++i) {
            const auto& p = history.participant(i);
            if (p.entry_time > cutoff) continue;
            sum += dgp::cond_mean(cfg.scenario, cfg.trial.outcome_count, p.arm, p.w);
            ++n;
          }
          if (n > 0) acc[ti] += sum / n / cfg.reps;
        }
      }
      for (size_t ti = 0; ti < times.size(); ++ti)
        out << cfg.scenario_name << "," << design.name() << "," << times[ti] << "," << cfg.reps
            << "," << format_double(acc[ti]) << "\n";
    }
    std::string path = cfg.out_dir + "/truth_marginal_psi.csv";
    write_file(path, out.str());
    res.files_written.push_back(path);
  }
  return res;
}

namespace {

struct LogRow {
  int id = 0;
  int entry_time = 0;
  Vector w;
  int arm = 0;
  double assign_prob = 0.0;
  std::string provenance;
  std::vector<std::optional<double>> y;
};

std::map<std::string, std::string> parse_meta(const std::string& line) {
  std::map<std::string, std::string> meta;
  std::string body = line.substr(line.find("meta:") + 5);
  std::stringstream ss(body);
  std::string kv;
  while (std::getline(ss, kv, ';')) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) continue;
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    while (!key.empty() && key.front() == ' ') key.erase(key.begin());
    meta[key] = value;
  }
  return meta;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

} // namespace

AuditResult audit_log(const std::string& log_path) {
  std::ifstream in(log_path);
  if (!in) throw std::runtime_error("cannot open trial log: " + log_path);
  std::string line;
  std::map<std::string, std::string> meta;
  std::vector<LogRow> rows;
  int covariate_dim = 1, outcome_count = 1;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("meta:") != std::string::npos) meta = parse_meta(line);
      continue;
    }
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    if (meta.empty()) throw std::runtime_error("trial log missing its meta line");
    covariate_dim = std::stoi(meta.at("covariate_dim"));
    outcome_count = std::stoi(meta.at("K"));
    std::vector<std::string> f = split_csv_line(line);
    size_t expect = 5 + static_cast<size_t>(covariate_dim) + static_cast<size_t>(outcome_count);
    if (f.size() != expect) throw std::runtime_error("malformed trial log row");
    LogRow row;
    size_t c = 0;
    row.id = std::stoi(f[c++]);
    row.entry_time = std::stoi(f[c++]);
    row.w.resize(covariate_dim);
    for (int j = 0; j < covariate_dim; ++j) row.w[j] = std::stod(f[c++]);
    row.arm = std::stoi(f[c++]);
    row.assign_prob = std::stod(f[c++]);
    row.provenance = f[c++];
    row.y.resize(outcome_count);
    for (int k = 0; k < outcome_count; ++k) {
      if (!f[c].empty()) row.y[k] = std::stod(f[c]);
      ++c;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("trial log has no participant rows");

  RunConfig cfg;
  cfg.trial.outcome_count = outcome_count;
  cfg.trial.total_time = std::stoi(meta.at("T"));
  cfg.trial.covariate_dim = covariate_dim;
  cfg.trial.cohort_sizes.assign(cfg.trial.total_time, 0);
  for (const LogRow& r : rows) cfg.trial.cohort_sizes[r.entry_time - 1]++;
  cfg.rule.nu = std::stod(meta.at("nu"));
  cfg.rule.alpha = std::stod(meta.at("alpha"));
  cfg.estimation.alpha = cfg.rule.alpha;
  cfg.estimation.nu = cfg.rule.nu;
  cfg.estimation.hal.knot_cap = std::stoi(meta.at("knot_cap"));
  cfg.estimation.hal.grid_size = std::stoi(meta.at("lambda_grid"));
  cfg.estimation.hal.folds = std::stoi(meta.at("folds"));
  cfg.estimation.hal.min_ratio = std::stod(meta.at("min_ratio"));
  cfg.estimation.q_folds = std::stoi(meta.at("q_folds"));
  cfg.refit_interval = std::stoi(meta.at("refit_interval"));
  cfg.scenario.outcome_count = outcome_count;
  cfg.scenario.covariate_dim = covariate_dim;

  randomize::Design design = randomize::Design::parse(meta.at("design"), outcome_count);

  AuditResult audit;
  ReplicateHooks hooks;
  hooks.collect_records = false;
  hooks.baselines = [&rows](int t) {
    std::vector<Vector> out;
    for (const LogRow& r : rows)
      if (r.entry_time == t) out.push_back(r.w);
    return out;
  };
  hooks.outcome = [&rows](const trial::ParticipantRecord& p, int k) {
    const std::optional<double>& v = rows.at(p.id).y[k - 1];
    if (!v.has_value()) throw std::runtime_error("trial log is missing a revealed outcome");
    return *v;
  };
  hooks.draw_arm = [&rows](int id, double) { return rows.at(id).arm; };
  hooks.on_rule = [&rows, &audit](int id, double p1, const std::string& provenance) {
    const LogRow& r = rows.at(id);
    // compare in the logged representation so 1 - p1 rounds identically
    double expected = r.arm == 1 ? p1 : 1.0 - p1;
    ++audit.assignments_checked;
    if (expected != r.assign_prob || provenance != r.provenance) ++audit.mismatches;
  };

  ReplicateResult result = run_replicate_with_hooks(cfg, design, 0, hooks);
  if (result.aborted) throw std::runtime_error("audit replay aborted: " + result.abort_reason);
  return audit;
}

} // namespace cara::harness

