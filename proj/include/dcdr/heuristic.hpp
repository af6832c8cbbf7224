#pragma once

/**
 * @file
 * @brief Descent on the billing references driven only by observed responses.
 *
 * Each iteration lowers s at locations whose load ratio is above the mean and
 * raises it elsewhere, then asks the provider for its response. A step is kept
 * only if the induced prices stay admissible and the load index strictly
 * drops; otherwise it is undone and the step size halved.
 */

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dcdr/benchmarks.hpp"
#include "dcdr/bilevel.hpp"
#include "dcdr/model.hpp"
#include "dcdr/stage2.hpp"

namespace dcdr {

struct DescentConfig {
  /// stop when an accepted step changes the index by at most this; default 1e-8 (1 + start index)
  std::optional<double> epsilon;
  /// initial step in MWh; default 0.1 max_i (e_hi - e_lo)
  std::optional<double> eta0;
  int max_iter = 10000;
  /// consecutive rejected steps before giving up
  int max_halvings = 40;
  /// price admissibility, relative to max(1, |price bound|)
  double price_tol = 1e-8;
  bool record_trace = true;
};

struct DescentState {
  int iteration = 0;
  Vec s;
  Vec e;
  double r_avg = 0.0;
  double eta = 0.0;
  double eli = 0.0;
  bool accepted = false;
};

struct DescentResult {
  Vec s;
  Vec e;
  double eli = 0.0;
  /// index of the response to the starting references
  double start_eli = 0.0;
  int iterations = 0;
  int accepted = 0;
  std::vector<DescentState> trace;
  std::vector<std::string> flags;

  bool has_flag(const std::string& f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }
};

/// Unit-free direction: -theta/beta above the mean ratio, +theta/beta otherwise, scaled to max 1.
inline Vec descent_direction(const SlotProblem& sp, const Vec& e, double* r_avg = nullptr) {
  const Vec r = load_ratio(sp, e);
  const double avg = r.mean();
  if (r_avg) *r_avg = avg;
  const Vec w = sp.theta.cwiseQuotient(sp.beta);
  Vec g(sp.size());
  for (Eigen::Index i = 0; i < sp.size(); ++i) g[i] = r[i] > avg ? -w[i] : w[i];
  return g / w.maxCoeff();
}

/**
 * Direction that repairs observed price violations: lower s where the price is
 * under its floor, raise it where it is over its ceiling or the mean is over
 * the cap. Zero when the prices are admissible.
 */
inline Vec repair_direction(const SlotProblem& sp, const Vec& s, const Vec& e) {
  const Vec pi = implied_prices(sp, s, e);
  const Vec w = sp.theta.cwiseQuotient(sp.beta);
  const double up = pi.mean() > sp.avg_cap ? 1.0 : 0.0;
  Vec g(sp.size());
  for (Eigen::Index i = 0; i < sp.size(); ++i) {
    double d = up;
    if (pi[i] < sp.price_floor[i]) d -= 2.0;
    if (pi[i] > sp.price_ceiling[i]) d += 1.0;
    g[i] = std::clamp(d, -1.0, 1.0) * w[i];
  }
  return g / w.maxCoeff();
}

inline DescentResult descent_solve(const SlotProblem& sp, const DescentConfig& cfg = {}) {
  check_slot_feasible(sp);
  const double ptol = price_tolerance(sp, cfg.price_tol);
  DescentResult res;

  Vec s;
  try {
    s = solve_restricted(sp).s;
  } catch (const RestrictedInfeasible&) {
    s = sp.e_hi;
    res.flags.push_back("restricted-infeasible-start");
  }
  BestResponse br = best_response(sp, s);
  double value = eli(sp, br.e);
  double viol = price_violation(sp, s, br.e);
  bool feasible = viol <= ptol;
  if (!feasible) res.flags.push_back("start-price-infeasible");
  res.start_eli = value;

  const double eps = cfg.epsilon ? *cfg.epsilon : 1e-8 * (1.0 + value);
  const double eta0 = cfg.eta0 ? *cfg.eta0 : 0.1 * (sp.e_hi - sp.e_lo).maxCoeff();
  double eta = eta0;
  auto record = [&](int k, const Vec& sk, const Vec& ek, double ravg, double vk, bool acc) {
    if (cfg.record_trace) res.trace.push_back({k, sk, ek, ravg, eta, vk, acc});
  };
  double r_avg = 0.0;
  descent_direction(sp, br.e, &r_avg);
  record(0, s, br.e, r_avg, value, true);

  int rejected = 0;
  bool converged = false;
  int k = 1;
  for (; k <= cfg.max_iter; ++k) {
    Vec g = descent_direction(sp, br.e, &r_avg);
    if (!feasible) g = repair_direction(sp, s, br.e);
    const Vec trial = s + eta * g;
    const BestResponse tb = best_response(sp, trial);
    const double tv = eli(sp, tb.e);
    const double tviol = price_violation(sp, trial, tb.e);
    // A decrease within rounding noise does not count. From an inadmissible start,
    // any step that reduces the price violation is progress.
    const bool ok = feasible ? (tviol <= ptol && tv < value - 1e-14 * (1.0 + value)) : tviol < viol;
    record(k, trial, tb.e, r_avg, tv, ok);
    if (!ok) {
      eta *= 0.5;
      if (++rejected >= cfg.max_halvings) break;
      continue;
    }
    rejected = 0;
    ++res.accepted;
    const double change = std::abs(tv - value);
    s = trial;
    br = tb;
    value = tv;
    viol = tviol;
    if (!feasible) {
      feasible = viol <= ptol;
      // Restart the step size for the descent phase.
      if (feasible) eta = eta0;
      continue;
    }
    if (change <= eps) {
      converged = true;
      break;
    }
  }
  res.iterations = std::min(k, cfg.max_iter);
  if (!converged && rejected < cfg.max_halvings) res.flags.push_back("max-iter");
  if (!feasible) res.flags.push_back("price-infeasible");
  res.s = s;
  res.e = br.e;
  res.eli = value;
  return res;
}

}  // namespace dcdr
