#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cara/types.hpp"

namespace cara::trial {

struct TrialConfig {
  int total_time = 50;               // T
  int outcome_count = 5;             // K; outcome k is revealed k steps after entry
  std::vector<int> cohort_sizes;     // per-t schedule; empty means constant
  int cohort_size = 50;              // constant E(t) when cohort_sizes is empty
  int covariate_dim = 1;

  int cohort_at(int t) const;        // E(t), 1-based t
  int cumulative_at(int t) const;    // N(t)
  void validate() const;
};

struct ParticipantRecord {
  int id = -1;
  int entry_time = 0;
  Vector w;
  int arm = -1;                       // -1 until assigned
  double assign_prob = 0.0;           // g0(arm | C), set at assignment
  double assign_p1 = 0.0;             // g0(1 | C), kept for audit replay
  std::string rule_provenance;
  std::vector<std::optional<double>> outcomes;  // slot k-1 holds Y_k
  Vector candidate_p1;                // g*_k(1|C) per surrogate; NaN if not tracked
};

/// Sequential trial state: append-only enrollment, delayed outcome reveal.
/// Estimators must only ever see outcome slots whose reveal time t_i + k is
/// at or before the clock; the accessors below enforce that by construction.
class TrialHistory {
 public:
  explicit TrialHistory(TrialConfig config);

  const TrialConfig& config() const { return config_; }
  int clock() const { return clock_; }
  void advance_clock(int t);          // move to time t (must be clock+1)

  int participant_count() const { return static_cast<int>(participants_.size()); }
  int enrolled_by(int t) const;       // N(t)
  const ParticipantRecord& participant(int i) const { return participants_[i]; }
  ParticipantRecord& participant(int i) { return participants_[i]; }

  /// Appends a cohort at time t with unassigned arms. Returns new ids.
  std::vector<int> enroll_cohort(int t, const std::vector<Vector>& baselines);

  /// Fills the outcome slot k = t - t_i for every participant with
  /// 1 <= t - t_i <= K. sampler(i, k) supplies Y_{i,k}. Returns count filled.
  int reveal_outcomes(int t, const std::function<double(const ParticipantRecord&, int)>& sampler);

  void record_assignment(int id, int arm, double p1, const std::string& provenance);

  /// (w, a, g0, Y_K) for the n_t = N(t-K) participants with final outcome
  /// observed by time t. Empty when t <= K.
  Dataset complete_cases(int t) const;

  /// (w, a, g0, Y_k) for the N(t-k) participants whose Y_k is revealed by t.
  Dataset surrogate_cases(int t, int k) const;

  /// Full-scan check of the reveal discipline; throws on violation.
  void check_reveal_invariant() const;

 private:
  TrialConfig config_;
  int clock_ = 0;
  std::vector<ParticipantRecord> participants_;

  Dataset gather(int t, int k) const;
};

} // namespace cara::trial
