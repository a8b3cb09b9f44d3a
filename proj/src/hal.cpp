#include "cara/hal.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>

namespace cara::hal {

namespace {

inline double soft_threshold(double z, double lam) {
  if (z > lam) return z - lam;
  if (z < -lam) return z + lam;
  return 0.0;
}

void require_finite(const Matrix& phi, const Vector& y, const Vector& w) {
  if (!phi.allFinite() || !y.allFinite() || !w.allFinite())
    throw std::invalid_argument("non-finite inputs to lasso solver");
  if ((w.array() < 0).any()) throw std::invalid_argument("negative weights");
}

// Solver state on sqrt-weight-scaled data: rows of phi and y are multiplied
// by sqrt(w_i) so the weighted problem becomes unweighted. Columns and
// response are then centered against the intercept direction u = sqrt(w);
// with an unpenalized intercept this is exact and keeps the intercept score
// at zero throughout. The intercept is recovered afterwards. The normal
// equations are cached once: the active-set solver below works entirely on
// the Gram matrix.
struct SolverWork {
  Matrix sphi;       // n x p, scaled and centered columns
  Vector sy;         // scaled and centered response
  Vector u;          // sqrt weights
  Matrix gram;       // (1/n) sphi' sphi
  Vector cvec;       // (1/n) sphi' sy
  Vector col_sq;     // gram diagonal
  Vector col_mean;   // u'sphi_j / u'u before centering
  double y_mean = 0; // weighted mean of y
  double usq = 0;    // ||u||^2 = sum w
  Eigen::Index n = 0, p = 0;

  SolverWork(const Matrix& phi, const Vector& y, const Vector& w) {
    n = y.size();
    p = phi.cols();
    u = w.array().sqrt();
    usq = w.sum();
    if (usq <= 0) throw std::invalid_argument("all weights are zero");
    sy = u.array() * y.array();
    y_mean = u.dot(sy) / usq;
    sy.noalias() -= y_mean * u;
    sphi = u.asDiagonal() * phi;
    col_mean.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      col_mean[j] = u.dot(sphi.col(j)) / usq;
      sphi.col(j).noalias() -= col_mean[j] * u;
    }
    gram.noalias() = sphi.transpose() * sphi / static_cast<double>(n);
    cvec.noalias() = sphi.transpose() * sy / static_cast<double>(n);
    col_sq = gram.diagonal();
  }

  double intercept_for(const Vector& beta) const { return y_mean - col_mean.dot(beta); }
};

double kkt_from_grad(const Vector& grad, const Vector& beta, double lam) {
  double viol = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta[j] == 0.0)
      viol = std::max(viol, std::abs(grad[j]) - lam);
    else
      viol = std::max(viol, std::abs(grad[j] - lam * (beta[j] > 0 ? 1.0 : -1.0)));
  }
  return std::max(viol, 0.0);
}

// Fixed-penalty active-set solve: exact least-squares refinement on the
// working active set with sign line-searches on zero crossings, then a
// screen of the full gradient for violators. Warm-started along the path.
void solve_one(const SolverWork& w, double lam, double add_tol, Vector& beta) {
  const Eigen::Index p = w.p;
  if (p == 0) return;
  std::vector<int> active;
  for (Eigen::Index j = 0; j < p; ++j)
    if (beta[j] != 0.0) active.push_back(static_cast<int>(j));

  Vector grad = w.cvec - w.gram * beta;  // (1/n) phi' resid
  const double ridge = 1e-12 * std::max(1.0, w.col_sq.maxCoeff());
  const int max_outer = static_cast<int>(10 * p + 100);

  for (int outer = 0; outer < max_outer; ++outer) {
    // exact refinement at the current active set
    for (int refine = 0; refine < 4 * static_cast<int>(active.size()) + 12; ++refine) {
      const Eigen::Index m = static_cast<Eigen::Index>(active.size());
      if (m == 0) break;
      Matrix gaa(m, m);
      Vector rhs(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        int jr = active[r];
        rhs[r] = w.cvec[jr] - lam * (beta[jr] > 0 ? 1.0 : -1.0);
        for (Eigen::Index c = 0; c < m; ++c) gaa(r, c) = w.gram(active[r], active[c]);
      }
      gaa.diagonal().array() += ridge;
      Vector target = gaa.ldlt().solve(rhs);
      // walk toward the solve target, dropping the first sign crossing
      double step = 1.0;
      int drop = -1;
      for (Eigen::Index r = 0; r < m; ++r) {
        int j = active[r];
        double from = beta[j], to = target[r];
        if ((from > 0 && to < 0) || (from < 0 && to > 0)) {
          double alpha = from / (from - to);
          if (alpha < step) {
            step = alpha;
            drop = static_cast<int>(r);
          }
        }
      }
      if (drop < 0) {
        for (Eigen::Index r = 0; r < m; ++r) beta[active[r]] = target[r];
        break;
      }
      for (Eigen::Index r = 0; r < m; ++r) {
        int j = active[r];
        beta[j] += step * (target[r] - beta[j]);
      }
      beta[active[drop]] = 0.0;
      active.erase(active.begin() + drop);
    }

    // screen for the worst violator among the inactive columns
    grad = w.cvec - w.gram * beta;
    int worst = -1;
    double worst_excess = add_tol;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (beta[j] != 0.0 || w.col_sq[j] <= 0.0) continue;
      double excess = std::abs(grad[j]) - lam;
      if (excess > worst_excess) {
        worst_excess = excess;
        worst = static_cast<int>(j);
      }
    }
    if (worst < 0) return;
    beta[worst] = grad[worst] > 0 ? 1e-300 : -1e-300;  // seed the sign
    active.push_back(worst);
  }
}

std::vector<double> section_knots_1d(const Eigen::Ref<const Matrix>& x, int j) {
  std::vector<double> vals(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) vals[i] = x(i, j);
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  return vals;
}

} // namespace

double HalBasis::eval_column(int j, const Eigen::Ref<const Vector>& x) const {
  const BasisColumn& c = columns[j];
  double v = 1.0;
  for (size_t m = 0; m < c.coords.size(); ++m) {
    double xi = x[c.coords[m]];
    double u = c.knots[static_cast<Eigen::Index>(m)];
    if (order == 0) {
      if (xi < u) return 0.0;
    } else {
      if (xi < u) return 0.0;
      v *= xi - u;
    }
  }
  return v;
}

Matrix HalBasis::evaluate(const Eigen::Ref<const Matrix>& x) const {
  Matrix out(x.rows(), column_count());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Vector row = x.row(i).transpose();
    for (Eigen::Index j = 0; j < column_count(); ++j)
      out(i, j) = eval_column(static_cast<int>(j), row);
  }
  return out;
}

HalBasis build_basis(const Eigen::Ref<const Matrix>& x, int order, int cap) {
  if (order != 0 && order != 1) throw std::invalid_argument("spline order must be 0 or 1");
  if (cap < 1) throw std::invalid_argument("knot cap must be positive");
  const int d = static_cast<int>(x.cols());
  HalBasis basis;
  basis.order = order;
  basis.input_dim = d;
  if (d == 0 || x.rows() == 0) return basis;
  if (d > 16) throw std::invalid_argument("covariate dimension too large for subset basis");

  // sections: coordinate subsets with their sorted unique knot tuples
  struct Section {
    std::vector<int> coords;
    std::vector<std::vector<double>> knots; // each entry one knot tuple
  };
  std::vector<Section> sections;
  if (order == 1) {
    for (int j = 0; j < d; ++j) {
      Section s;
      s.coords = {j};
      for (double v : section_knots_1d(x, j)) s.knots.push_back({v});
      sections.push_back(std::move(s));
    }
  } else {
    for (unsigned mask = 1; mask < (1u << d); ++mask) {
      Section s;
      for (int j = 0; j < d; ++j)
        if (mask & (1u << j)) s.coords.push_back(j);
      std::vector<std::vector<double>> tuples(x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (int j : s.coords) tuples[i].push_back(x(i, j));
      std::sort(tuples.begin(), tuples.end());
      tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());
      s.knots = std::move(tuples);
      sections.push_back(std::move(s));
    }
  }

  size_t total = 0;
  for (const auto& s : sections) total += s.knots.size();
  std::vector<size_t> keep(sections.size());
  if (total <= static_cast<size_t>(cap)) {
    for (size_t i = 0; i < sections.size(); ++i) keep[i] = sections[i].knots.size();
  } else {
    size_t assigned = 0;
    for (size_t i = 0; i < sections.size(); ++i) {
      keep[i] = std::max<size_t>(
          1, static_cast<size_t>(std::floor(static_cast<double>(cap) * sections[i].knots.size() /
                                            static_cast<double>(total))));
      keep[i] = std::min(keep[i], sections[i].knots.size());
      assigned += keep[i];
    }
    while (assigned > static_cast<size_t>(cap)) {
      size_t big = 0;
      for (size_t i = 1; i < sections.size(); ++i)
        if (keep[i] > keep[big]) big = i;
      if (keep[big] <= 1) break;
      --keep[big];
      --assigned;
    }
  }

  for (size_t i = 0; i < sections.size(); ++i) {
    const Section& s = sections[i];
    size_t m = s.knots.size(), k = keep[i];
    for (size_t r = 0; r < k; ++r) {
      // evenly spaced order statistics of the sorted knots
      size_t idx = k == m ? r
                          : static_cast<size_t>(std::floor((r + 0.5) * static_cast<double>(m) /
                                                           static_cast<double>(k)));
      BasisColumn col;
      col.coords = s.coords;
      col.knots = Eigen::Map<const Vector>(s.knots[idx].data(),
                                           static_cast<Eigen::Index>(s.knots[idx].size()));
      basis.columns.push_back(std::move(col));
    }
  }
  return basis;
}

double lambda_max(const Matrix& phi, const Vector& y, const Vector& weights) {
  require_finite(phi, y, weights);
  const double n = static_cast<double>(y.size());
  double wsum = weights.sum();
  if (wsum <= 0) throw std::invalid_argument("all weights are zero");
  double b0 = weights.dot(y) / wsum;
  if (phi.cols() == 0) return 0.0;
  Vector wr = weights.array() * (y.array() - b0);
  return (phi.transpose() * wr).cwiseAbs().maxCoeff() / n;
}

Vector make_lambda_grid(double lam_max, int size, double min_ratio) {
  if (size < 1) throw std::invalid_argument("grid size must be positive");
  if (lam_max <= 0) return Vector::Zero(size);
  Vector grid(size);
  if (size == 1) {
    grid[0] = lam_max;
    return grid;
  }
  double log_hi = std::log(lam_max), log_lo = std::log(lam_max * min_ratio);
  for (int i = 0; i < size; ++i)
    grid[i] = std::exp(log_hi + (log_lo - log_hi) * i / (size - 1));
  return grid;
}

PathResult fit_path(const Matrix& phi, const Vector& y, const Vector& weights,
                    const Vector& grid, const FitOptions& opts) {
  require_finite(phi, y, weights);
  if (grid.size() == 0) throw std::invalid_argument("empty penalty grid");
  for (Eigen::Index l = 1; l < grid.size(); ++l)
    if (!(grid[l] < grid[l - 1])) throw std::invalid_argument("grid must be strictly decreasing");
  const double lam_top = lambda_max(phi, y, weights);
  if (grid[0] < lam_top * (1.0 - 1e-10))
    throw std::invalid_argument("grid must start at or above lambda_max");

  SolverWork work(phi, y, weights);
  PathResult out;
  out.lambdas = grid;
  out.intercepts.resize(grid.size());
  out.betas.resize(phi.cols(), grid.size());

  double add_tol = opts.kkt_tol * std::max(1.0, lam_top);
  Vector beta = Vector::Zero(phi.cols());
  for (Eigen::Index l = 0; l < grid.size(); ++l) {
    solve_one(work, grid[l], add_tol, beta);
    out.intercepts[l] = work.intercept_for(beta);
    out.betas.col(l) = beta;
  }
  return out;
}

double kkt_violation(const Matrix& phi, const Vector& y, const Vector& weights,
                     double intercept, const Vector& beta, double lambda) {
  const double n = static_cast<double>(y.size());
  Vector r = y - Vector::Constant(y.size(), intercept) - phi * beta;
  Vector wr = weights.array() * r.array();
  double viol = std::abs(wr.sum()) / n;
  if (phi.cols() > 0) {
    Vector grad = phi.transpose() * wr / n;
    viol = std::max(viol, kkt_from_grad(grad, beta, lambda));
  }
  return viol;
}

double duality_gap(const Matrix& phi, const Vector& y, const Vector& weights,
                   double intercept, const Vector& beta, double lambda) {
  const double n = static_cast<double>(y.size());
  Vector r = y - Vector::Constant(y.size(), intercept) - phi * beta;
  Vector theta = (weights.array() * r.array()) / n;
  double wsum = weights.sum();
  if (wsum <= 0) throw std::invalid_argument("all weights are zero");
  // enforce the intercept's dual feasibility constraint 1'theta = 0
  theta.noalias() -= (theta.sum() / wsum) * weights;
  double gmax = 0.0;
  if (phi.cols() > 0) gmax = (phi.transpose() * theta).cwiseAbs().maxCoeff();
  double s = gmax > lambda && gmax > 0 ? lambda / gmax : 1.0;
  theta *= s;
  double primal = (weights.array() * r.array().square()).sum() / (2.0 * n) +
                  lambda * beta.lpNorm<1>();
  double quad = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (weights[i] > 0) quad += theta[i] * theta[i] / weights[i];
  double dual = theta.dot(y) - 0.5 * n * quad;
  return primal - dual;
}

bool working_covariance(const Matrix& x_cols, const Vector& weights, const Vector& resid,
                        double ridge, Matrix& cov_out) {
  const double n = static_cast<double>(x_cols.rows());
  const Eigen::Index q = x_cols.cols();
  Matrix gram = x_cols.transpose() * weights.asDiagonal() * x_cols / n;
  gram.diagonal().array() += ridge;
  Vector meat_w = (weights.array() * resid.array()).square() / (n * n);
  Matrix meat = x_cols.transpose() * meat_w.asDiagonal() * x_cols;
  Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success) return false;
  Matrix inv_meat = ldlt.solve(meat);
  if (!inv_meat.allFinite()) return false;
  cov_out = ldlt.solve(inv_meat.transpose()).transpose();
  if (!cov_out.allFinite()) return false;
  // a singular Gram can still "solve"; verify the reconstruction
  double recon = (gram * cov_out * gram - meat).norm();
  if (!(recon <= 1e-6 * (1.0 + meat.norm()))) return false;
  // symmetrize away solve round-off
  cov_out = 0.5 * (cov_out + cov_out.transpose()).eval();
  return true;
}

namespace {

HalFit intercept_only_fit(const HalBasis& basis, const Vector& y, const Vector& weights) {
  HalFit fit;
  fit.basis = basis;
  fit.beta = Vector::Zero(basis.column_count());
  double wsum = weights.sum();
  fit.intercept = wsum > 0 ? weights.dot(y) / wsum : 0.0;
  Vector r = y.array() - fit.intercept;
  fit.loss = wsum > 0 ? (weights.array() * r.array().square()).sum() / wsum : 0.0;
  Matrix ones = Matrix::Ones(y.size(), 1);
  fit.covariance_ok = working_covariance(ones, weights, r, 1e-8, fit.covariance);
  return fit;
}

void finalize_fit(HalFit& fit, const Matrix& phi, const Vector& y, const Vector& weights,
                  double ridge) {
  fit.active.clear();
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j)
    if (fit.beta[j] != 0.0) fit.active.push_back(static_cast<int>(j));
  fit.l1_bound = fit.beta.lpNorm<1>();
  Vector pred = Vector::Constant(y.size(), fit.intercept);
  if (!fit.active.empty()) {
    for (int j : fit.active) pred.noalias() += fit.beta[j] * phi.col(j);
  }
  Vector r = y - pred;
  double wsum = weights.sum();
  fit.loss = (weights.array() * r.array().square()).sum() / wsum;
  Matrix xa(y.size(), 1 + static_cast<Eigen::Index>(fit.active.size()));
  xa.col(0).setOnes();
  for (size_t m = 0; m < fit.active.size(); ++m) xa.col(1 + static_cast<Eigen::Index>(m)) = phi.col(fit.active[m]);
  fit.covariance_ok = working_covariance(xa, weights, r, ridge, fit.covariance);
}

} // namespace

Vector cv_path_sse(const Matrix& phi, const Vector& y, const Vector& weights,
                   const Vector& grid, int folds, const FitOptions& opts) {
  const Eigen::Index n = y.size();
  folds = std::max(2, std::min<int>(folds, static_cast<int>(n)));
  const Eigen::Index L = grid.size();
  Vector cv_sse = Vector::Zero(L);
  for (int v = 0; v < folds; ++v) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < n; ++i) (i % folds == v ? te : tr).push_back(i);
    if (tr.empty() || te.empty()) continue;
    Matrix phi_tr(tr.size(), phi.cols()), phi_te(te.size(), phi.cols());
    Vector y_tr(tr.size()), w_tr(tr.size()), y_te(te.size()), w_te(te.size());
    for (size_t i = 0; i < tr.size(); ++i) {
      phi_tr.row(static_cast<Eigen::Index>(i)) = phi.row(tr[i]);
      y_tr[static_cast<Eigen::Index>(i)] = y[tr[i]];
      w_tr[static_cast<Eigen::Index>(i)] = weights[tr[i]];
    }
    for (size_t i = 0; i < te.size(); ++i) {
      phi_te.row(static_cast<Eigen::Index>(i)) = phi.row(te[i]);
      y_te[static_cast<Eigen::Index>(i)] = y[te[i]];
      w_te[static_cast<Eigen::Index>(i)] = weights[te[i]];
    }
    if (w_tr.sum() <= 0) continue;
    // fold grid must start at the fold's own lambda_max
    double fold_top = lambda_max(phi_tr, y_tr, w_tr);
    Vector fold_grid;
    if (grid[0] >= fold_top * (1.0 - 1e-10)) {
      fold_grid = grid;
    } else {
      fold_grid.resize(L + 1);
      fold_grid[0] = fold_top;
      fold_grid.tail(L) = grid;
    }
    PathResult path = fit_path(phi_tr, y_tr, w_tr, fold_grid, opts);
    Eigen::Index off = fold_grid.size() - L;
    for (Eigen::Index l = 0; l < L; ++l) {
      Vector pred = Vector::Constant(te.size(), path.intercepts[off + l]);
      pred.noalias() += phi_te * path.betas.col(off + l);
      cv_sse[l] += (w_te.array() * (y_te - pred).array().square()).sum();
    }
  }
  return cv_sse;
}

HalFit cv_select_grid(const HalBasis& basis, const Eigen::Ref<const Matrix>& x, const Vector& y,
                      const Vector& weights, const Vector& grid, const FitOptions& opts) {
  const Eigen::Index n = y.size();
  if (n < 2 || basis.column_count() == 0) return intercept_only_fit(basis, y, weights);
  Matrix phi = basis.evaluate(x);
  const Eigen::Index L = grid.size();
  Vector cv_sse = cv_path_sse(phi, y, weights, grid, opts.folds, opts);
  Eigen::Index best = 0;
  for (Eigen::Index l = 1; l < L; ++l)
    if (cv_sse[l] < cv_sse[best]) best = l;

  // the refit path must also start at the full-data lambda_max
  double lam_top = lambda_max(phi, y, weights);
  Vector refit_grid;
  Eigen::Index off = 0;
  if (grid[0] >= lam_top * (1.0 - 1e-10)) {
    refit_grid = grid.head(best + 1);
  } else {
    refit_grid.resize(best + 2);
    refit_grid[0] = lam_top;
    refit_grid.tail(best + 1) = grid.head(best + 1);
    off = 1;
  }
  PathResult refit = fit_path(phi, y, weights, refit_grid, opts);
  HalFit fit;
  fit.basis = basis;
  fit.intercept = refit.intercepts[off + best];
  fit.beta = refit.betas.col(off + best);
  fit.lambda = grid[best];
  fit.cv_mse = cv_sse[best] / weights.sum();
  finalize_fit(fit, phi, y, weights, opts.gram_ridge);
  return fit;
}

HalFit cv_select(const HalBasis& basis, const Eigen::Ref<const Matrix>& x, const Vector& y,
                 const Vector& weights, const FitOptions& opts) {
  const Eigen::Index n = y.size();
  if (n < 2 || basis.column_count() == 0) return intercept_only_fit(basis, y, weights);
  Matrix phi = basis.evaluate(x);
  double lam_top = lambda_max(phi, y, weights);
  if (lam_top <= 0) return intercept_only_fit(basis, y, weights);
  Vector grid = make_lambda_grid(lam_top, opts.grid_size, opts.min_ratio);
  return cv_select_grid(basis, x, y, weights, grid, opts);
}

Vector predict(const HalFit& fit, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != fit.basis.input_dim && fit.basis.input_dim != 0)
    throw std::invalid_argument("prediction dimension mismatch");
  Vector out = Vector::Constant(x.rows(), fit.intercept);
  for (int j : fit.active) {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      out[i] += fit.beta[j] * fit.basis.eval_column(j, x.row(i).transpose());
  }
  return out;
}

Vector pointwise_se(const HalFit& fit, const Eigen::Ref<const Matrix>& x) {
  Vector out(x.rows());
  if (!fit.covariance_ok) {
    out.setConstant(std::numeric_limits<double>::infinity());
    return out;
  }
  const Eigen::Index q = 1 + static_cast<Eigen::Index>(fit.active.size());
  Vector v(q);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    v[0] = 1.0;
    for (size_t m = 0; m < fit.active.size(); ++m)
      v[1 + static_cast<Eigen::Index>(m)] =
          fit.basis.eval_column(fit.active[m], x.row(i).transpose());
    double q2 = v.dot(fit.covariance * v);
    out[i] = q2 > 0 ? std::sqrt(q2) : 0.0;
  }
  return out;
}

} // namespace cara::hal
