#include "cara/selector.hpp"

#include "cara/stats.hpp"

namespace cara::selector {

int select_surrogate(const std::map<int, tmle::TmleFit>& fits, double alpha) {
  const double z = stats::z_quantile(alpha);
  int best_k = -1;
  double best_bound = 0.0;
  for (const auto& [k, fit] : fits) {
    if (fit.degenerate) continue;
    double bound = fit.psi_hat - z * fit.se;
    if (best_k < 0 || bound > best_bound) {
      best_k = k;
      best_bound = bound;
    }
  }
  if (best_k < 0) throw std::runtime_error("no valid surrogate-utility fit to select from");
  return best_k;
}

} // namespace cara::selector
