#pragma once

/**
 * @file
 * @brief One entry point per method that packages each solver's output
 *        into a SolveReport.
 *
 * Methods without a billing reference (integrated, base price) are billed at
 * the flat tariff, i.e. s = e, so their unit prices equal alpha.
 */

#include <string>

#include "dcdr/benchmarks.hpp"
#include "dcdr/bilevel.hpp"
#include "dcdr/heuristic.hpp"
#include "dcdr/model.hpp"

namespace dcdr {

struct SolveOptions {
  BnbConfig bnb;
  DescentConfig descent;
};

inline SolveReport priced_report(Method m, const SlotProblem& sp, const Vec& s, const Vec& e) {
  SolveReport r;
  r.method = m;
  r.reference = s;
  r.energy = e;
  r.price = implied_prices(sp, s, e);
  r.eli = eli(sp, e);
  r.total_cost = total_cost(sp, s, e);
  return r;
}

/// Every method except robust, which needs an uncertainty set (see robust.hpp).
inline SolveReport solve_nominal(const SlotProblem& sp, Method m, const SolveOptions& opt = {}) {
  switch (m) {
    case Method::integrated: {
      const auto pi = solve_integrated(sp);
      SolveReport r = priced_report(m, sp, pi.e, pi.e);
      r.reference.resize(0);
      r.lower_bound = pi.eli;
      return r;
    }
    case Method::base_price: {
      const auto bp = solve_base_price(sp);
      SolveReport r = priced_report(m, sp, bp.e, bp.e);
      r.reference.resize(0);
      return r;
    }
    case Method::restricted: {
      const auto rs = solve_restricted(sp, opt.bnb.qp);
      SolveReport r = priced_report(m, sp, rs.s, rs.e);
      r.upper_bound = rs.eli;
      r.diagnostics.iterations = rs.qp.iterations;
      return r;
    }
    case Method::exact: {
      const auto b = branch_and_bound(sp, opt.bnb);
      SolveReport r = priced_report(m, sp, b.s, b.e);
      r.eli = b.eli;
      r.lower_bound = b.lower_bound;
      r.upper_bound = b.upper_bound;
      r.diagnostics = b.diagnostics;
      return r;
    }
    case Method::heuristic: {
      const auto h = descent_solve(sp, opt.descent);
      if (h.has_flag("price-infeasible"))
        throw ExactInfeasible("heuristic: no admissible price vector reached from the fallback start");
      SolveReport r = priced_report(m, sp, h.s, h.e);
      r.lower_bound = solve_integrated(sp).eli;
      if (!h.has_flag("restricted-infeasible-start")) r.upper_bound = h.start_eli;
      r.diagnostics.iterations = h.iterations;
      r.diagnostics.flags = h.flags;
      r.diagnostics.max_kkt_residual = kkt_residual(sp, h.s, best_response(sp, h.s));
      return r;
    }
    case Method::robust:
      break;
  }
  throw PreconditionError(std::string("solve_nominal: method '") + to_string(m) + "' needs an uncertainty set");
}

}  // namespace dcdr
