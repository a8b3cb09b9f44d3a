#pragma once

#include <vector>

#include "cara/types.hpp"

namespace cara::hal {

/// One spline basis column. Zero-order columns are tensor-product
/// indicators prod_j 1(u_j <= x_j) over the coordinate subset; first-order
/// columns are univariate hinges (x_c - u) * 1(x_c >= u).
struct BasisColumn {
  std::vector<int> coords;
  Vector knots;
};

struct HalBasis {
  int order = 1;   // m in {0, 1}
  int input_dim = 0;
  std::vector<BasisColumn> columns;

  Eigen::Index column_count() const { return static_cast<Eigen::Index>(columns.size()); }
  double eval_column(int j, const Eigen::Ref<const Vector>& x) const;
  /// n x p design, intercept not included.
  Matrix evaluate(const Eigen::Ref<const Matrix>& x) const;
};

/// Knots are the observed data points: every nonempty coordinate subset for
/// order 0, per-coordinate sections for order 1. When the candidate count
/// exceeds cap, an evenly spaced subsample of the sorted knots is kept per
/// section, proportional to section size (deterministic).
HalBasis build_basis(const Eigen::Ref<const Matrix>& x, int order, int cap);

struct HalFit {
  HalBasis basis;
  double intercept = 0.0;
  Vector beta;                 // dense over basis columns
  double lambda = 0.0;         // selected penalty
  double l1_bound = 0.0;       // achieved ||beta||_1, the selected variation bound
  double cv_mse = 0.0;         // cross-validated weighted MSE at the selected penalty
  double loss = 0.0;           // in-sample weighted MSE of the refit
  std::vector<int> active;     // indices with beta != 0
  Matrix covariance;           // over {intercept} + active, HC0 sandwich
  bool covariance_ok = false;
};

struct PathResult {
  Vector lambdas;
  Vector intercepts;
  Matrix betas;                // p x L
};

struct FitOptions {
  int knot_cap = 100;
  int folds = 5;
  int grid_size = 50;
  double min_ratio = 1e-4;     // lambda_min = min_ratio * lambda_max
  double gram_ridge = 1e-8;
  double kkt_tol = 1e-9;       // violator screen tolerance, scaled by lambda_max
};

/// Smallest penalty at which every penalized coefficient is zero.
double lambda_max(const Matrix& phi, const Vector& y, const Vector& weights);

Vector make_lambda_grid(double lam_max, int size, double min_ratio);

/// Weighted lasso path solved by active-set refinement with warm starts;
/// the intercept is unpenalized. Grid must be strictly decreasing with
/// grid[0] >= lambda_max. Each solution satisfies the KKT conditions
/// essentially exactly (duality gap far below 1e-7).
PathResult fit_path(const Matrix& phi, const Vector& y, const Vector& weights,
                    const Vector& grid, const FitOptions& opts = FitOptions{});

/// Per-penalty cross-validated weighted SSE over an arbitrary design, folds
/// by row index mod V. Each fold's path is warm-started from the fold's own
/// lambda_max when that exceeds the grid head.
Vector cv_path_sse(const Matrix& phi, const Vector& y, const Vector& weights,
                   const Vector& grid, int folds, const FitOptions& opts = FitOptions{});

/// V-fold cross-validated penalty selection (folds by row index mod V),
/// refit on all data. Falls back to leave-one-out when n < V; returns an
/// intercept-only fit when n < 2.
HalFit cv_select(const HalBasis& basis, const Eigen::Ref<const Matrix>& x, const Vector& y,
                 const Vector& weights, const FitOptions& opts = FitOptions{});

/// cv_select against an explicit penalty grid.
HalFit cv_select_grid(const HalBasis& basis, const Eigen::Ref<const Matrix>& x, const Vector& y,
                      const Vector& weights, const Vector& grid,
                      const FitOptions& opts = FitOptions{});

Vector predict(const HalFit& fit, const Eigen::Ref<const Matrix>& x);

/// Delta-method standard error of the fitted function at each row of x,
/// from the working-model sandwich over {intercept} + active columns.
/// Rows come back as +infinity when the covariance was flagged unusable.
Vector pointwise_se(const HalFit& fit, const Eigen::Ref<const Matrix>& x);

/// HC0 sandwich for the working least-squares model: inv(Gram) meat
/// inv(Gram) with Gram = (1/n) X'WX + ridge I and meat =
/// (1/n^2) sum_i w_i^2 r_i^2 x_i x_i'. Returns false when the solve fails
/// to produce finite entries.
bool working_covariance(const Matrix& x_cols, const Vector& weights, const Vector& resid,
                        double ridge, Matrix& cov_out);

/// Max KKT violation of a candidate solution: penalized-coordinate
/// gradients must lie in [-lambda, lambda], with equality to
/// lambda * sign(beta_j) on the active set, and the intercept score must
/// vanish.
double kkt_violation(const Matrix& phi, const Vector& y, const Vector& weights,
                     double intercept, const Vector& beta, double lambda);

/// Primal-dual gap of a candidate solution (0 at the optimum).
double duality_gap(const Matrix& phi, const Vector& y, const Vector& weights,
                   double intercept, const Vector& beta, double lambda);

} // namespace cara::hal
