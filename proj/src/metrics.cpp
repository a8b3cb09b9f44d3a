#include "cara/metrics.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <tuple>

namespace cara::metrics {

double per_run_truth_psi(const trial::TrialHistory& history, const dgp::ScenarioSpec& spec,
                         int t, int k) {
  const int K = history.config().outcome_count;
  if (t < K + 1) throw std::invalid_argument("no completed participants before t = K + 1");
  const int cutoff = t - K;
  double acc = 0.0;
  int n = 0;
  for (int i = 0; i < history.participant_count(); ++i) {
    const auto& p = history.participant(i);
    if (p.entry_time > cutoff) continue;
    double p1 = 0.5;
    if (k > 0) {
      p1 = p.candidate_p1[k - 1];
      if (std::isnan(p1)) throw std::logic_error("candidate rule was not recorded for this design");
    }
    acc += dgp::cond_mean(spec, K, 1, p.w) * p1 + dgp::cond_mean(spec, K, 0, p.w) * (1.0 - p1);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("no completed participants at this time");
  return acc / n;
}

double marginal_psi_oracle(const dgp::ScenarioSpec& spec, int t, int reps,
                           const std::function<trial::TrialHistory(int)>& run_design) {
  if (reps < 1) throw std::invalid_argument("need at least one counterfactual run");
  double grand = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    trial::TrialHistory history = run_design(rep);
    const int K = history.config().outcome_count;
    const int cutoff = t - K;
    double acc = 0.0;
    int n = 0;
    for (int i = 0; i < history.participant_count(); ++i) {
      const auto& p = history.participant(i);
      if (p.entry_time > cutoff) continue;
      acc += dgp::cond_mean(spec, K, p.arm, p.w);
      ++n;
    }
    if (n == 0) throw std::invalid_argument("no completed participants at this time");
    grand += acc / n;
  }
  return grand / reps;
}

double regret_at(const trial::TrialHistory& history, const dgp::ScenarioSpec& spec, int t) {
  const int K = history.config().outcome_count;
  double acc = 0.0;
  int n = 0;
  for (int i = 0; i < history.participant_count(); ++i) {
    const auto& p = history.participant(i);
    if (p.entry_time != t) continue;
    ++n;
    if (p.arm != dgp::optimal_rule(spec, K, p.w))
      acc += std::abs(dgp::true_cate(spec, K, p.w));
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return acc / n;
}

double prob_nonopt_at(const trial::TrialHistory& history, const dgp::ScenarioSpec& spec, int t) {
  const int K = history.config().outcome_count;
  int mismatched = 0, n = 0;
  for (int i = 0; i < history.participant_count(); ++i) {
    const auto& p = history.participant(i);
    if (p.entry_time != t) continue;
    ++n;
    if (p.arm != dgp::optimal_rule(spec, K, p.w)) ++mismatched;
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(mismatched) / n;
}

McReport aggregate(const std::vector<RepRecord>& records) {
  using Key = std::tuple<std::string, std::string, int, int>;
  struct Cell {
    int n = 0;
    double truth_sum = 0, bias_sum = 0, psi_sum = 0, psi_sq_sum = 0;
    int covered = 0, selected = 0;
    double regret_sum = 0, p_nonopt_sum = 0;
  };
  std::map<Key, Cell> cells;
  for (const RepRecord& r : records) {
    Cell& c = cells[{r.scenario, r.design, r.t, r.k}];
    ++c.n;
    c.truth_sum += r.psi_true_run;
    c.bias_sum += r.psi_hat - r.psi_true_run;
    c.psi_sum += r.psi_hat;
    c.psi_sq_sum += r.psi_hat * r.psi_hat;
    c.covered += r.covered;
    if (r.selected_k == r.k) ++c.selected;
    c.regret_sum += r.regret;
    c.p_nonopt_sum += r.p_nonopt;
  }
  McReport report;
  report.reserve(cells.size());
  for (const auto& [key, c] : cells) {
    AggregateRow row;
    row.scenario = std::get<0>(key);
    row.design = std::get<1>(key);
    row.t = std::get<2>(key);
    row.k = std::get<3>(key);
    row.n_reps = c.n;
    row.truth_mean = c.truth_sum / c.n;
    row.bias = c.bias_sum / c.n;
    double mean_psi = c.psi_sum / c.n;
    row.variance = std::max(0.0, c.psi_sq_sum / c.n - mean_psi * mean_psi);
    row.coverage = static_cast<double>(c.covered) / c.n;
    row.regret_mean = c.regret_sum / c.n;
    row.p_nonopt_mean = c.p_nonopt_sum / c.n;
    row.sel_freq = static_cast<double>(c.selected) / c.n;
    report.push_back(std::move(row));
  }
  return report;
}

} // namespace cara::metrics
