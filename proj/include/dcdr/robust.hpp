#pragma once

/**
 * @file
 * @brief Pricing against the worst background-load forecast error in a box.
 *
 * For any fixed provider response the load index is convex and increasing in
 * the background load on the nonnegative orthant, so the inner maximization
 * over the box is attained at its upper corner. The robust problem is then the
 * nominal one with B replaced by B + delta_max.
 */

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dcdr/model.hpp"
#include "dcdr/solve.hpp"
#include "dcdr/stage2.hpp"

namespace dcdr {

/// Per-location bounds on the background-load forecast error, MWh per slot.
struct UncertaintySet {
  Vec delta_min;
  Vec delta_max;
};

/// Symmetric set of +-fraction of the forecast background load.
inline UncertaintySet relative_uncertainty(const SlotProblem& sp, double fraction) {
  return {-fraction * sp.background, fraction * sp.background};
}

inline std::vector<std::string> validate_uncertainty(const SlotProblem& sp, const UncertaintySet& u) {
  std::vector<std::string> v;
  if (u.delta_min.size() != sp.size() || u.delta_max.size() != sp.size()) {
    v.push_back("uncertainty set: expected one bound per location");
    return v;
  }
  for (Eigen::Index i = 0; i < sp.size(); ++i) {
    const std::string at = "location " + std::to_string(i);
    if (!(u.delta_min[i] <= u.delta_max[i])) v.push_back(at + ": delta_min exceeds delta_max");
    if (!(sp.background[i] + u.delta_max[i] <= sp.capacity[i]))
      v.push_back(at + ": shifted background load exceeds capacity");
    if (!(sp.background[i] + u.delta_min[i] >= 0.0)) v.push_back(at + ": shifted background load is negative");
  }
  return v;
}

/// The maximizing error: the upper corner of the box.
inline Vec worst_case_error(const UncertaintySet& u) { return u.delta_max; }

/**
 * Slot with B shifted by delta. Unless freeze_box is set, the supply cap in
 * the energy box is recomputed from the shifted load.
 */
inline SlotProblem shift_slot(const SlotProblem& sp, const Vec& delta, bool freeze_box = false) {
  SlotProblem out = sp;
  out.background = sp.background + delta;
  if (!freeze_box) {
    for (Eigen::Index i = 0; i < sp.size(); ++i) {
      const double supply = out.capacity[i] - out.background[i];
      out.e_hi[i] = std::min(out.e_server_hi[i], supply);
    }
  }
  try {
    check_slot_feasible(out);
  } catch (const InfeasibleSlot& err) {
    throw InfeasibleSlot(std::string("after the worst-case load shift: ") + err.what());
  }
  return out;
}

struct RobustConfig {
  /// exact or heuristic
  Method inner = Method::exact;
  /// keep the nominal energy box when shifting the load
  bool freeze_box = false;
  SolveOptions solver;
};

struct WcpResult {
  /// method = robust; eli is the worst-case index
  SolveReport report;
  SlotProblem shifted;
  Vec delta;
};

inline WcpResult solve_wcp(const SlotProblem& sp, const UncertaintySet& u, const RobustConfig& cfg = {}) {
  if (cfg.inner != Method::exact && cfg.inner != Method::heuristic)
    throw PreconditionError("solve_wcp: inner method must be exact or heuristic");
  auto v = validate_uncertainty(sp, u);
  if (!v.empty()) throw ValidationError(std::move(v));
  WcpResult out;
  out.delta = worst_case_error(u);
  out.shifted = shift_slot(sp, out.delta, cfg.freeze_box);
  out.report = solve_nominal(out.shifted, cfg.inner, cfg.solver);
  out.report.method = Method::robust;
  out.report.diagnostics.flags.push_back(std::string("inner:") + to_string(cfg.inner));
  return out;
}

/// Index realized when the error is delta and the provider answers s on the nominal box.
inline double realized_eli(const SlotProblem& nominal, const Vec& s, const Vec& delta) {
  return eli_shifted(nominal, best_response(nominal, s).e, delta);
}

}  // namespace dcdr
