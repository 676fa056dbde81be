#ifndef STIC_TESTS_SUPPORT_CHECKS_HPP
#define STIC_TESTS_SUPPORT_CHECKS_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace testsupport {

// Central finite differences of a scalar function of a flat vector.
inline std::vector<double> numeric_grad(const std::function<double(const std::vector<double>&)>& fn,
                                        const std::vector<double>& x, double h = 1e-5) {
  std::vector<double> g(x.size());
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    double up = fn(probe);
    probe[i] = x[i] - h;
    double down = fn(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Worst relative disagreement between two gradient vectors. The denominator
// is floored at 1 so near-zero entries are compared absolutely instead of
// amplifying rounding noise.
inline double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    double denom = std::max({1.0, std::fabs(analytic[i]), std::fabs(numeric[i])});
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace testsupport

#endif
