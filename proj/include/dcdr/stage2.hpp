#pragma once

/**
 * @file
 * @brief The provider's cost-minimizing reaction to a billing-reference vector.
 *
 * For fixed s the provider minimizes sum_i (alpha_i + beta_i (e_i - s_i)) e_i over
 * the energy box subject to sum_i theta_i e_i = E. The problem is strictly convex,
 * and its solution is e_i = clamp(s_i/2 - (alpha_i + theta_i sigma) / (2 beta_i))
 * for the unique sigma that meets the equality.
 */

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "dcdr/model.hpp"
#include "dcdr/numerics/water_fill.hpp"

namespace dcdr {

struct BestResponse {
  Vec e;
  double sigma = 0.0;
  Vec omega_lo;
  Vec omega_hi;
  /// sigma is not unique (every location clamped); the midpoint was returned
  bool flat = false;
};

namespace detail {

inline numerics::WaterFillProblem response_problem(const SlotProblem& sp, const Vec& s) {
  numerics::WaterFillProblem p;
  p.center = 0.5 * s - sp.alpha.cwiseQuotient(2.0 * sp.beta);
  p.slope = sp.theta.cwiseQuotient(2.0 * sp.beta);
  p.weight = sp.theta;
  p.lo = sp.e_lo;
  p.hi = sp.e_hi;
  p.target = sp.e_total;
  return p;
}

}  // namespace detail

/// Signed stationarity residual alpha + 2 beta e - beta s + theta sigma (before the box multipliers).
inline Vec stationarity_slack(const SlotProblem& sp, const Vec& s, const Vec& e, double sigma) {
  return sp.alpha + 2.0 * sp.beta.cwiseProduct(e) - sp.beta.cwiseProduct(s) + sigma * sp.theta;
}

/// Best response; `bracket` overrides the initial sigma bracket (expanded if it misses).
inline BestResponse best_response(const SlotProblem& sp, const Vec& s,
                                  std::optional<std::pair<double, double>> bracket = {}) {
  if (s.size() != sp.size()) throw PreconditionError("best_response: reference vector has wrong size");
  check_slot_feasible(sp);
  const auto wf = numerics::water_fill(detail::response_problem(sp, s), bracket);

  BestResponse br;
  br.e = wf.x;
  br.sigma = wf.multiplier;
  br.flat = wf.flat;
  const Eigen::Index n = sp.size();
  br.omega_lo = Vec::Zero(n);
  br.omega_hi = Vec::Zero(n);
  const Vec g = stationarity_slack(sp, s, br.e, br.sigma);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool at_lo = br.e[i] <= sp.e_lo[i];
    const bool at_hi = br.e[i] >= sp.e_hi[i];
    if (at_lo && (!at_hi || g[i] > 0)) {
      br.omega_lo[i] = std::max(0.0, g[i]);
    } else if (at_hi) {
      br.omega_hi[i] = std::max(0.0, -g[i]);
    }
  }
  return br;
}

/// Response with the energy box dropped; multipliers are zero.
inline BestResponse rs2_closed_form(const SlotProblem& sp, const Vec& s) {
  if (s.size() != sp.size()) throw PreconditionError("rs2_closed_form: reference vector has wrong size");
  const Vec two_beta = 2.0 * sp.beta;
  const Vec center = 0.5 * s - sp.alpha.cwiseQuotient(two_beta);
  const double num = sp.theta.dot(center) - sp.e_total;
  const double den = sp.theta.cwiseProduct(sp.theta).cwiseQuotient(two_beta).sum();
  BestResponse br;
  br.sigma = num / den;
  br.e = center - br.sigma * sp.theta.cwiseQuotient(two_beta);
  br.omega_lo = Vec::Zero(sp.size());
  br.omega_hi = Vec::Zero(sp.size());
  return br;
}

/// Largest violation of the provider's optimality system at (s, br).
inline double kkt_residual(const SlotProblem& sp, const Vec& s, const BestResponse& br) {
  const Vec station = stationarity_slack(sp, s, br.e, br.sigma) - br.omega_lo + br.omega_hi;
  double r = station.cwiseAbs().maxCoeff();
  r = std::max(r, std::abs(sp.theta.dot(br.e) - sp.e_total));
  for (Eigen::Index i = 0; i < sp.size(); ++i) {
    const double below = sp.e_lo[i] - br.e[i];
    const double above = br.e[i] - sp.e_hi[i];
    r = std::max({r, below, above, -br.omega_lo[i], -br.omega_hi[i],
                  std::abs(br.omega_lo[i] * (br.e[i] - sp.e_lo[i])),
                  std::abs(br.omega_hi[i] * (sp.e_hi[i] - br.e[i]))});
  }
  return r;
}

}  // namespace dcdr
