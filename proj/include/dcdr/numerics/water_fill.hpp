#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>
#include <utility>

#include "dcdr/errors.hpp"
#include "dcdr/numerics/bisect.hpp"

namespace dcdr::numerics {

/// Separable box-constrained allocation with one weighted equality:
///   x_i(nu) = clamp(center_i - slope_i * nu, lo_i, hi_i),  sum_i w_i x_i(nu) = target.
/// slope_i > 0 and w_i > 0, so the weighted sum is continuous and nonincreasing in nu.
struct WaterFillProblem {
  Eigen::VectorXd center;
  Eigen::VectorXd slope;
  Eigen::VectorXd weight;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  double target = 0.0;
};

struct WaterFillResult {
  Eigen::VectorXd x;
  double multiplier = 0.0;
  int bisection_iterations = 0;
  /// true when every component sits on a bound and the multiplier is not unique
  bool flat = false;
};

inline Eigen::VectorXd water_fill_eval(const WaterFillProblem& p, double nu) {
  Eigen::VectorXd x(p.center.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x[i] = std::clamp(p.center[i] - p.slope[i] * nu, p.lo[i], p.hi[i]);
  return x;
}

/**
 * Solves the allocation by bisection on the multiplier followed by an exact
 * re-solve on the free set. The initial bracket is the pair of multipliers at
 * which every component saturates at its upper or lower bound; callers may
 * supply another one, which is expanded automatically if it misses the root.
 */
inline WaterFillResult water_fill(const WaterFillProblem& p,
                                  std::optional<std::pair<double, double>> bracket = {},
                                  double x_tol = 1e-10) {
  const Eigen::Index n = p.center.size();
  if (n == 0) throw PreconditionError("water_fill: empty problem");
  const double wlo = p.weight.dot(p.lo);
  const double whi = p.weight.dot(p.hi);
  const double scale = std::max({1.0, std::abs(p.target), std::abs(whi)});
  if (p.target < wlo - 1e-12 * scale || p.target > whi + 1e-12 * scale)
    throw InfeasibleSlot("weighted equality unreachable inside the box");

  // nu_up[i]: at or below this, x_i sits at hi; nu_down[i]: at or above, x_i sits at lo.
  Eigen::VectorXd nu_up(n), nu_down(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    nu_up[i] = (p.center[i] - p.hi[i]) / p.slope[i];
    nu_down[i] = (p.center[i] - p.lo[i]) / p.slope[i];
  }
  auto residual = [&](double nu) { return p.weight.dot(water_fill_eval(p, nu)) - p.target; };

  double lo = nu_up.minCoeff();
  double hi = nu_down.maxCoeff();
  if (bracket) std::tie(lo, hi) = *bracket;
  if (lo > hi) std::swap(lo, hi);

  BisectOptions opt;
  opt.x_tol = x_tol * std::max({1.0, std::abs(lo), std::abs(hi)});
  const BisectResult br = bisect_bracketed(residual, lo, hi, opt);

  WaterFillResult out;
  out.bisection_iterations = br.iterations;
  double nu = br.x;

  // Exact finish: the residual is piecewise linear with knots at nu_up and
  // nu_down, so locate the segment holding the root and solve it there.
  std::vector<double> knots(nu_up.data(), nu_up.data() + n);
  knots.insert(knots.end(), nu_down.data(), nu_down.data() + n);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  std::size_t k = 0;
  while (k + 2 < knots.size() && residual(knots[k + 1]) > 0.0) ++k;
  const double a = knots[k];
  const double b = knots.size() > 1 ? knots[k + 1] : knots[k];
  const double mid = 0.5 * (a + b);
  double free_num = -p.target;
  double free_den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (nu_up[i] < mid && mid < nu_down[i]) {
      free_num += p.weight[i] * p.center[i];
      free_den += p.weight[i] * p.slope[i];
    } else {
      free_num += p.weight[i] * std::clamp(p.center[i] - p.slope[i] * mid, p.lo[i], p.hi[i]);
    }
  }
  nu = free_den > 0.0 ? std::clamp(free_num / free_den, a, b) : mid;

  bool all_clamped = true;
  for (Eigen::Index i = 0; i < n; ++i)
    if (p.lo[i] < p.hi[i] && nu_up[i] < nu && nu < nu_down[i]) all_clamped = false;
  if (all_clamped) {
    // The optimal multiplier set is an interval; return its midpoint or finite end.
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (p.lo[i] == p.hi[i]) continue;
      if (nu >= nu_down[i]) lower = std::max(lower, nu_down[i]);
      if (nu <= nu_up[i]) upper = std::min(upper, nu_up[i]);
    }
    if (std::isfinite(lower) && std::isfinite(upper))
      nu = 0.5 * (lower + upper);
    else if (std::isfinite(lower))
      nu = lower;
    else if (std::isfinite(upper))
      nu = upper;
    out.flat = true;
  }
  out.multiplier = nu;
  out.x = water_fill_eval(p, nu);
  return out;
}

}  // namespace dcdr::numerics
