#include "cara/trial.hpp"

#include <cmath>
#include <limits>

namespace cara::trial {

int TrialConfig::cohort_at(int t) const {
  if (t < 1 || t > total_time) return 0;
  if (cohort_sizes.empty()) return cohort_size;
  return cohort_sizes[t - 1];
}

int TrialConfig::cumulative_at(int t) const {
  int n = 0;
  for (int s = 1; s <= std::min(t, total_time); ++s) n += cohort_at(s);
  return n;
}

void TrialConfig::validate() const {
  if (total_time < outcome_count + 1)
    throw std::invalid_argument("total_time must be at least outcome_count + 1");
  if (outcome_count < 1) throw std::invalid_argument("outcome_count must be >= 1");
  if (covariate_dim < 1) throw std::invalid_argument("covariate_dim must be >= 1");
  if (!cohort_sizes.empty() && static_cast<int>(cohort_sizes.size()) != total_time)
    throw std::invalid_argument("cohort schedule length must equal total_time");
  for (int t = 1; t <= total_time; ++t)
    if (cohort_at(t) < 0) throw std::invalid_argument("cohort sizes must be nonnegative");
  if (cohort_size < 0) throw std::invalid_argument("cohort sizes must be nonnegative");
}

TrialHistory::TrialHistory(TrialConfig config) : config_(std::move(config)) {
  config_.validate();
}

void TrialHistory::advance_clock(int t) {
  if (t != clock_ + 1) throw std::logic_error("clock must advance one step at a time");
  clock_ = t;
}

int TrialHistory::enrolled_by(int t) const {
  int n = 0;
  for (const auto& p : participants_)
    if (p.entry_time <= t) ++n;
  return n;
}

std::vector<int> TrialHistory::enroll_cohort(int t, const std::vector<Vector>& baselines) {
  if (t != clock_) throw std::logic_error("enrollment time must match the clock");
  if (t > config_.total_time && !baselines.empty())
    throw std::invalid_argument("cannot enroll after the trial horizon");
  std::vector<int> ids;
  ids.reserve(baselines.size());
  for (const auto& w : baselines) {
    if (w.size() != config_.covariate_dim)
      throw std::invalid_argument("baseline dimension mismatch");
    ParticipantRecord p;
    p.id = static_cast<int>(participants_.size());
    p.entry_time = t;
    p.w = w;
    p.outcomes.assign(config_.outcome_count, std::nullopt);
    p.candidate_p1 = Vector::Constant(config_.outcome_count,
                                      std::numeric_limits<double>::quiet_NaN());
    ids.push_back(p.id);
    participants_.push_back(std::move(p));
  }
  return ids;
}

int TrialHistory::reveal_outcomes(
    int t, const std::function<double(const ParticipantRecord&, int)>& sampler) {
  if (t != clock_) throw std::logic_error("reveal time must match the clock");
  int revealed = 0;
  for (auto& p : participants_) {
    int k = t - p.entry_time;
    if (k < 1 || k > config_.outcome_count) continue;
    if (p.outcomes[k - 1].has_value()) throw std::logic_error("outcome slot already revealed");
    p.outcomes[k - 1] = sampler(p, k);
    ++revealed;
  }
  return revealed;
}

void TrialHistory::record_assignment(int id, int arm, double p1, const std::string& provenance) {
  ParticipantRecord& p = participants_.at(id);
  if (p.arm != -1) throw std::logic_error("arm already assigned");
  if (arm != 0 && arm != 1) throw std::invalid_argument("arm must be 0 or 1");
  p.arm = arm;
  p.assign_p1 = p1;
  p.assign_prob = arm == 1 ? p1 : 1.0 - p1;
  p.rule_provenance = provenance;
}

Dataset TrialHistory::gather(int t, int k) const {
  Dataset d;
  std::vector<const ParticipantRecord*> rows;
  for (const auto& p : participants_) {
    if (p.entry_time + k <= t && p.outcomes[k - 1].has_value()) rows.push_back(&p);
  }
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  d.w.resize(n, config_.covariate_dim);
  d.a.resize(n);
  d.g0.resize(n);
  d.y.resize(n);
  d.id.reserve(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const ParticipantRecord& p = *rows[i];
    d.w.row(i) = p.w.transpose();
    d.a[i] = p.arm;
    d.g0[i] = p.assign_prob;
    d.y[i] = *p.outcomes[k - 1];
    d.id.push_back(p.id);
  }
  return d;
}

Dataset TrialHistory::complete_cases(int t) const {
  if (t > clock_) throw std::logic_error("cannot look past the clock");
  if (t <= config_.outcome_count) return Dataset{};
  return gather(t, config_.outcome_count);
}

Dataset TrialHistory::surrogate_cases(int t, int k) const {
  if (t > clock_) throw std::logic_error("cannot look past the clock");
  if (k < 1 || k > config_.outcome_count) throw std::invalid_argument("outcome index out of range");
  return gather(t, k);
}

void TrialHistory::check_reveal_invariant() const {
  for (const auto& p : participants_) {
    for (int k = 1; k <= config_.outcome_count; ++k) {
      bool filled = p.outcomes[k - 1].has_value();
      bool due = clock_ >= p.entry_time + k;
      if (filled != due) throw std::logic_error("reveal discipline violated");
    }
  }
}

} // namespace cara::trial
