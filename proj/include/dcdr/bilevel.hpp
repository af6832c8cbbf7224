#pragma once

/**
 * @file
 * @brief Exact solver for the pricing problem.
 *
 * The provider's optimality system is embedded as constraints of a single
 * QP; each complementarity pair is switched by a binary through a big-M row.
 * Branch-and-bound runs over the binaries with the integrated optimum as the
 * initial lower bound and the restricted optimum as the initial upper bound.
 *
 * Variable layout: s (N), e (N), sigma (1), omega_lo (N), omega_hi (N),
 * z_lo (N), z_hi (N). sigma is carried as sigma * theta_max.
 */

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "dcdr/benchmarks.hpp"
#include "dcdr/model.hpp"
#include "dcdr/numerics/qp.hpp"
#include "dcdr/stage2.hpp"

namespace dcdr {

struct BigM {
  double primal = 0.0;
  /// estimate from the reference and multiplier bounds, times the safety factor
  double dual_estimate = 0.0;
  /// bound on the smallest multipliers consistent with any admissible price vector
  double dual_certified = 0.0;
  double value = 0.0;
};

/// Default big-M constant; see the inline comments for the pieces.
inline BigM big_m_for(const SlotProblem& sp) {
  const Eigen::Index N = sp.size();
  BigM m;
  m.primal = (sp.e_hi - sp.e_lo).maxCoeff();

  double s_bound = 0.0;
  for (Eigen::Index i = 0; i < N; ++i)
    s_bound = std::max(s_bound, sp.e_hi[i] + (std::abs(sp.price_ceiling[i]) + std::abs(sp.alpha[i])) / sp.beta[i]);
  // sigma from the unclamped response at s = +-s_bound.
  const double den = sp.theta.cwiseProduct(sp.theta).cwiseQuotient(2.0 * sp.beta).sum();
  const double base = sp.theta.dot(sp.alpha.cwiseQuotient(2.0 * sp.beta));
  const double tsum = 0.5 * sp.theta.sum();
  const double sigma_bound = std::max(std::abs(tsum * s_bound - base - sp.e_total),
                                      std::abs(-tsum * s_bound - base - sp.e_total)) / den;
  double est = 0.0;
  for (Eigen::Index i = 0; i < N; ++i)
    est = std::max(est, std::abs(sp.alpha[i]) + 2.0 * sp.beta[i] * sp.e_hi[i] + sp.beta[i] * s_bound +
                            sp.theta[i] * sigma_bound);
  m.dual_estimate = 10.0 * est;

  // omega_i = pi_i + beta_i e_i + theta_i sigma, and some multiplier can always
  // be chosen to vanish, which bounds |sigma| by the per-location terms.
  Vec term(N);
  for (Eigen::Index i = 0; i < N; ++i)
    term[i] = std::max(std::abs(sp.price_floor[i]), std::abs(sp.price_ceiling[i])) +
              sp.beta[i] * std::max(std::abs(sp.e_lo[i]), std::abs(sp.e_hi[i]));
  const double sigma_cert = term.cwiseQuotient(sp.theta).maxCoeff();
  m.dual_certified = 1.1 * (term + sigma_cert * sp.theta).maxCoeff();

  m.value = std::max({m.primal, m.dual_estimate, m.dual_certified});
  return m;
}

struct Pe1Instance {
  SlotProblem slot;
  double K = 0.0;
  double theta_scale = 1.0;
  double objective_constant = 0.0;
  numerics::QpProblem qp;
  /// binaries fixed to 0 before branching (locations with e_lo == e_hi)
  std::vector<std::int8_t> root_fix;

  Eigen::Index n() const { return slot.size(); }
  Eigen::Index s_col(Eigen::Index i) const { return i; }
  Eigen::Index e_col(Eigen::Index i) const { return n() + i; }
  Eigen::Index sigma_col() const { return 2 * n(); }
  Eigen::Index wlo_col(Eigen::Index i) const { return 2 * n() + 1 + i; }
  Eigen::Index whi_col(Eigen::Index i) const { return 3 * n() + 1 + i; }
  /// binary j in [0, 2N): j < N is z_lo[j], otherwise z_hi[j - N]
  Eigen::Index z_col(Eigen::Index j) const { return 4 * n() + 1 + j; }
  Eigen::Index z_row(Eigen::Index j) const { return 4 * n() + 1 + j; }
};

/// Builds the big-M reformulation; `K` overrides the default constant.
inline Pe1Instance build_pe1(const SlotProblem& sp, std::optional<double> K = {}) {
  using numerics::kInf;
  check_slot_feasible(sp);
  const Eigen::Index N = sp.size();
  Pe1Instance pe;
  pe.slot = sp;
  pe.K = K ? *K : big_m_for(sp).value;
  pe.theta_scale = sp.theta.maxCoeff();
  const Vec th = sp.theta / pe.theta_scale;
  const Eigen::Index nv = 6 * N + 1;

  auto& p = pe.qp;
  p = numerics::make_qp(nv);
  for (Eigen::Index i = 0; i < N; ++i) {
    p.P(pe.e_col(i), pe.e_col(i)) = 2.0 / sp.capacity[i];
    p.q[pe.e_col(i)] = 2.0 * sp.background[i] / sp.capacity[i];
    pe.objective_constant += sp.background[i] * sp.background[i] / sp.capacity[i];
  }

  // Stationarity (N) and the weighted energy equality (1).
  p.A = numerics::Matrix::Zero(N + 1, nv);
  p.b = Vec::Zero(N + 1);
  for (Eigen::Index i = 0; i < N; ++i) {
    p.A(i, pe.e_col(i)) = 2.0 * sp.beta[i];
    p.A(i, pe.s_col(i)) = -sp.beta[i];
    p.A(i, pe.sigma_col()) = th[i];
    p.A(i, pe.wlo_col(i)) = -1.0;
    p.A(i, pe.whi_col(i)) = 1.0;
    p.b[i] = -sp.alpha[i];
    p.A(N, pe.e_col(i)) = th[i];
  }
  p.b[N] = sp.e_total / pe.theta_scale;

  // Rows: price band N | average cap 1 | box N | omega >= 0 2N | z in [0,1] 2N | big-M 4N.
  const Eigen::Index rows = 11 * N + 1;
  p.G = numerics::Matrix::Zero(rows, nv);
  p.l = Vec::Constant(rows, -kInf);
  p.u = Vec::Constant(rows, kInf);
  for (Eigen::Index i = 0; i < N; ++i) {
    p.G(i, pe.e_col(i)) = sp.beta[i];
    p.G(i, pe.s_col(i)) = -sp.beta[i];
    p.l[i] = sp.price_floor[i] - sp.alpha[i];
    p.u[i] = sp.price_ceiling[i] - sp.alpha[i];
    p.G(N, pe.e_col(i)) = sp.beta[i] / static_cast<double>(N);
    p.G(N, pe.s_col(i)) = -sp.beta[i] / static_cast<double>(N);

    const Eigen::Index box = N + 1 + i;
    p.G(box, pe.e_col(i)) = 1.0;
    p.l[box] = sp.e_lo[i];
    p.u[box] = sp.e_hi[i];

    p.G(2 * N + 1 + i, pe.wlo_col(i)) = 1.0;
    p.l[2 * N + 1 + i] = 0.0;
    p.G(3 * N + 1 + i, pe.whi_col(i)) = 1.0;
    p.l[3 * N + 1 + i] = 0.0;

    for (Eigen::Index j : {i, N + i}) {
      p.G(pe.z_row(j), pe.z_col(j)) = 1.0;
      p.l[pe.z_row(j)] = 0.0;
      p.u[pe.z_row(j)] = 1.0;
    }

    // Big-M rows, divided by K so that their values stay O(1).
    const Eigen::Index bm = 6 * N + 1;
    const double invK = 1.0 / pe.K;
    // e - e_lo <= K z_lo
    p.G(bm + i, pe.e_col(i)) = invK;
    p.G(bm + i, pe.z_col(i)) = -1.0;
    p.u[bm + i] = sp.e_lo[i] * invK;
    // omega_lo <= K (1 - z_lo)
    p.G(bm + N + i, pe.wlo_col(i)) = invK;
    p.G(bm + N + i, pe.z_col(i)) = 1.0;
    p.u[bm + N + i] = 1.0;
    // e_hi - e <= K z_hi
    p.G(bm + 2 * N + i, pe.e_col(i)) = -invK;
    p.G(bm + 2 * N + i, pe.z_col(N + i)) = -1.0;
    p.u[bm + 2 * N + i] = -sp.e_hi[i] * invK;
    // omega_hi <= K (1 - z_hi)
    p.G(bm + 3 * N + i, pe.whi_col(i)) = invK;
    p.G(bm + 3 * N + i, pe.z_col(N + i)) = 1.0;
    p.u[bm + 3 * N + i] = 1.0;
  }
  p.u[N] = sp.avg_cap - sp.alpha.mean();

  pe.root_fix.assign(static_cast<std::size_t>(2 * N), -1);
  for (Eigen::Index i = 0; i < N; ++i)
    if (sp.e_lo[i] == sp.e_hi[i]) pe.root_fix[static_cast<std::size_t>(i)] = pe.root_fix[static_cast<std::size_t>(N + i)] = 0;
  return pe;
}

struct BnbNode {
  /// per binary: -1 free, otherwise the fixed value
  std::vector<std::int8_t> fix;
  double bound = -std::numeric_limits<double>::infinity();
  int depth = 0;
  long id = 0;
  long parent = -1;
};

/// True when a fixed (0, 0) pair asks e_i to sit at both ends of a nondegenerate box.
inline bool contradictory(const Pe1Instance& pe, const std::vector<std::int8_t>& fix) {
  const Eigen::Index N = pe.n();
  for (Eigen::Index i = 0; i < N; ++i)
    if (fix[static_cast<std::size_t>(i)] == 0 && fix[static_cast<std::size_t>(N + i)] == 0 &&
        pe.slot.e_lo[i] < pe.slot.e_hi[i])
      return true;
  return false;
}

/// Continuous relaxation with the node's binaries fixed.
inline numerics::QpSolution solve_relaxation(const Pe1Instance& pe, const BnbNode& node,
                                             const numerics::QpSettings& cfg = certify_settings()) {
  // A fixed binary turns its pair of big-M rows into one equality (e at the
  // bound, or the multiplier at zero) and one redundant row; both are written
  // out directly, which leaves the feasible set unchanged.
  using numerics::kInf;
  numerics::QpProblem p = pe.qp;
  const Eigen::Index N = pe.n();
  const Eigen::Index bm = 6 * N + 1;
  for (Eigen::Index j = 0; j < 2 * N; ++j) {
    const std::int8_t v = node.fix[static_cast<std::size_t>(j)];
    if (v < 0) continue;
    const Eigen::Index r = pe.z_row(j);
    p.l[r] = p.u[r] = static_cast<double>(v);
    const bool lower = j < N;
    const Eigen::Index i = lower ? j : j - N;
    const Eigen::Index primal_row = bm + (lower ? 0 : 2 * N) + i;
    const Eigen::Index dual_row = bm + (lower ? N : 3 * N) + i;
    const Eigen::Index box_row = N + 1 + i;
    const Eigen::Index omega_row = (lower ? 2 * N + 1 : 3 * N + 1) + i;
    if (v == 0) {
      if (lower) p.u[box_row] = pe.slot.e_lo[i];
      else p.l[box_row] = pe.slot.e_hi[i];
      p.l[primal_row] = -kInf;
      p.u[primal_row] = kInf;
    } else {
      p.u[omega_row] = 0.0;
      p.l[dual_row] = -kInf;
      p.u[dual_row] = kInf;
    }
  }
  return numerics::qp_solve(p, cfg);
}

inline double relaxation_value(const Pe1Instance& pe, const numerics::QpSolution& sol) {
  return sol.objective + pe.objective_constant;
}

struct VerifyTolerances {
  double energy = 1e-6;
  double price = 1e-6;
};

inline double price_tolerance(const SlotProblem& sp, double rel) {
  const double scale = std::max({1.0, sp.price_ceiling.cwiseAbs().maxCoeff(), sp.price_floor.cwiseAbs().maxCoeff()});
  return rel * scale;
}

/**
 * Re-derives the provider's response to s and compares it with e, checks the
 * price constraints, and (given K) that the response multipliers fit under K.
 * Violations are relative: energy to max(1, |e|), prices to max(1, |price
 * bound|), multipliers to K. Returns the largest; throws VerificationError
 * when energy or price exceed tolerance or a multiplier exceeds K.
 */
inline double verify_solution(const SlotProblem& sp, const Vec& s, const Vec& e, std::optional<double> K = {},
                              const VerifyTolerances& tol = {}) {
  const BestResponse br = best_response(sp, s);
  const double de = (br.e - e).cwiseAbs().maxCoeff() / std::max(1.0, e.cwiseAbs().maxCoeff());
  const double dp = std::max(0.0, price_violation(sp, s, br.e)) / price_tolerance(sp, 1.0);
  double dk = 0.0;
  if (K) dk = std::max(0.0, std::max(br.omega_lo.maxCoeff(), br.omega_hi.maxCoeff()) - *K) / *K;
  const double worst = std::max({de, dp, dk});
  std::string why;
  if (de > tol.energy) why += " response mismatch " + std::to_string(de) + ";";
  if (dp > tol.price) why += " price violation " + std::to_string(dp) + ";";
  if (dk > 0.0) why += " multiplier exceeds big-M by " + std::to_string(dk * *K) + ";";
  if (!why.empty()) throw VerificationError("verification failed:" + why, worst);
  return worst;
}

struct BnbConfig {
  double gap = 1e-6;
  int max_escalations = 3;
  std::optional<double> big_m;
  long max_nodes = 200000;
  double integrality_tol = 1e-6;
  double price_tol = 1e-6;
  bool record_nodes = false;
  numerics::QpSettings qp = certify_settings();
};

struct NodeRecord {
  long id = 0;
  long parent = -1;
  int depth = 0;
  double bound = 0.0;
  bool feasible = false;
  bool integral = false;
};

struct BnbResult {
  Vec s;
  Vec e;
  double eli = 0.0;
  double lower_bound = 0.0;
  double upper_bound = std::numeric_limits<double>::infinity();
  /// smallest open bound at exit (equals eli when the tree was exhausted)
  double final_lower = 0.0;
  Diagnostics diagnostics;
  std::vector<NodeRecord> nodes;
};

namespace detail {

struct Incumbent {
  Vec s;
  Vec e;
  double value = std::numeric_limits<double>::infinity();
  bool valid() const { return std::isfinite(value); }
};

struct QueueEntry {
  double bound;
  long id;
  std::size_t slot;
  bool operator>(const QueueEntry& o) const { return bound != o.bound ? bound > o.bound : id > o.id; }
};

struct TreeOutcome {
  Incumbent best;
  double final_lower = 0.0;
  long nodes = 0;
  long iterations = 0;
  double max_omega_ratio = 0.0;  // over integral node solutions
  int unsolved = 0;
  int unsolved_leaves = 0;
};

/// Offers (s, BR(s)) as an incumbent if its prices are admissible.
inline void offer(const SlotProblem& sp, const Vec& s, double ptol, Incumbent& inc) {
  BestResponse br;
  try {
    br = best_response(sp, s);
  } catch (const Error&) {
    return;
  }
  if (price_violation(sp, s, br.e) > ptol) return;
  const double v = eli(sp, br.e);
  if (v < inc.value) inc = {s, br.e, v};
}

inline TreeOutcome run_tree(const Pe1Instance& pe, const BnbConfig& cfg, Incumbent start,
                            std::vector<NodeRecord>* records) {
  const Eigen::Index N = pe.n();
  const double ptol = price_tolerance(pe.slot, cfg.price_tol);
  TreeOutcome out;
  out.best = std::move(start);

  std::vector<BnbNode> store;
  std::vector<numerics::QpSolution> sols;
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<QueueEntry>> open;
  long next_id = 0;

  auto evaluate = [&](BnbNode node) {
    node.id = next_id++;
    ++out.nodes;
    numerics::QpSolution sol = solve_relaxation(pe, node, cfg.qp);
    out.iterations += sol.iterations;
    if (sol.status == numerics::QpStatus::max_iterations) {
      numerics::QpSettings retry = cfg.qp;
      retry.max_iter *= 4;
      retry.rho = 1.0;
      sol = solve_relaxation(pe, node, retry);
      out.iterations += sol.iterations;
    }
    NodeRecord rec{node.id, node.parent, node.depth, 0.0, false, false};
    if (sol.status == numerics::QpStatus::infeasible) {
      if (records) records->push_back(rec);
      return;
    }
    bool usable = sol.optimal();
    if (!usable) {
      ++out.unsolved;
      // No trustworthy bound: inherit the parent's and keep branching.
    } else {
      node.bound = std::max(node.bound, relaxation_value(pe, sol));
    }
    rec.feasible = true;
    rec.bound = node.bound;
    if (sol.x.size() == pe.qp.num_vars()) offer(pe.slot, sol.x.head(N), ptol, out.best);

    bool integral = usable;
    if (usable) {
      for (Eigen::Index j = 0; j < 2 * N; ++j) {
        if (node.fix[static_cast<std::size_t>(j)] >= 0) continue;
        const double z = sol.x[pe.z_col(j)];
        if (std::min(z, 1.0 - z) > cfg.integrality_tol) integral = false;
      }
    }
    if (integral) {
      rec.integral = true;
      for (Eigen::Index i = 0; i < N; ++i)
        out.max_omega_ratio = std::max({out.max_omega_ratio, sol.x[pe.wlo_col(i)] / pe.K, sol.x[pe.whi_col(i)] / pe.K});
    }
    if (records) records->push_back(rec);
    if (integral) return;  // the relaxation optimum solves this subtree
    store.push_back(std::move(node));
    sols.push_back(std::move(sol));
    open.push({store.back().bound, store.back().id, store.size() - 1});
  };

  BnbNode root;
  root.fix = pe.root_fix;
  if (!contradictory(pe, root.fix)) evaluate(root);

  double final_lower = std::numeric_limits<double>::infinity();
  while (!open.empty()) {
    const QueueEntry top = open.top();
    if (top.bound >= out.best.value - cfg.gap) {
      final_lower = std::min(final_lower, top.bound);
      break;
    }
    if (out.nodes >= cfg.max_nodes) {
      final_lower = std::min(final_lower, top.bound);
      break;
    }
    open.pop();
    const BnbNode node = store[top.slot];
    const numerics::QpSolution& sol = sols[top.slot];

    // Most fractional free binary; ties: lowest location, then z_lo before z_hi.
    Eigen::Index pick = -1;
    double frac = -1.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      for (Eigen::Index j : {i, N + i}) {
        if (node.fix[static_cast<std::size_t>(j)] >= 0) continue;
        const double z = sol.optimal() ? sol.x[pe.z_col(j)] : 0.5;
        const double f = std::min(z, 1.0 - z);
        if (f > frac) frac = f, pick = j;
      }
    }
    if (pick < 0) {
      // Every binary fixed but the leaf QP stayed unsolved; its iterate was
      // already offered as an incumbent.
      ++out.unsolved_leaves;
      continue;
    }
    for (std::int8_t v : {std::int8_t{0}, std::int8_t{1}}) {
      BnbNode child;
      child.fix = node.fix;
      child.fix[static_cast<std::size_t>(pick)] = v;
      child.depth = node.depth + 1;
      child.parent = node.id;
      child.bound = node.bound;
      if (contradictory(pe, child.fix)) continue;
      evaluate(std::move(child));
    }
  }
  out.final_lower = std::min(final_lower, out.best.value);
  return out;
}

}  // namespace detail

/**
 * Globally optimal billing references within cfg.gap. The big-M constant is
 * escalated (x10, at most cfg.max_escalations times) when the incumbent's
 * multipliers do not fit under it or an integral node presses against it.
 */
inline BnbResult branch_and_bound(const SlotProblem& sp, const BnbConfig& cfg = {}) {
  check_slot_feasible(sp);
  const double ptol = price_tolerance(sp, cfg.price_tol);
  BnbResult res;

  const IntegratedResult pi = solve_integrated(sp);
  res.lower_bound = pi.eli;
  detail::Incumbent start;
  try {
    const RestrictedResult rs = solve_restricted(sp, cfg.qp);
    res.upper_bound = rs.eli;
    detail::offer(sp, rs.s, ptol, start);
  } catch (const RestrictedInfeasible&) {
    res.diagnostics.flags.push_back("restricted-infeasible");
  }

  double K = cfg.big_m ? *cfg.big_m : big_m_for(sp).value;
  for (int attempt = 0;; ++attempt) {
    const Pe1Instance pe = build_pe1(sp, K);
    res.nodes.clear();
    detail::TreeOutcome t = detail::run_tree(pe, cfg, start, cfg.record_nodes ? &res.nodes : nullptr);
    res.diagnostics.nodes += t.nodes;
    res.diagnostics.iterations += t.iterations;
    res.diagnostics.big_m = K;
    if (t.unsolved > 0) res.diagnostics.flags.push_back("unsolved-relaxations:" + std::to_string(t.unsolved));
    if (t.unsolved_leaves > 0) res.diagnostics.flags.push_back("unsolved-leaves:" + std::to_string(t.unsolved_leaves));
    if (t.nodes >= cfg.max_nodes) res.diagnostics.flags.push_back("node-limit");

    // An empty tree may be an artifact of K as well.
    bool escalate = t.max_omega_ratio >= 0.99 || !t.best.valid();
    std::optional<VerificationError> failure;
    if (t.best.valid()) {
      try {
        verify_solution(sp, t.best.s, t.best.e, 0.99 * K);
      } catch (const VerificationError& err) {
        failure = err;
        escalate = true;
      }
    }
    if (escalate && attempt < cfg.max_escalations) {
      K *= 10.0;
      ++res.diagnostics.k_escalations;
      res.diagnostics.flags.push_back("big-m-escalated");
      continue;
    }
    if (failure) throw *failure;
    if (escalate) res.diagnostics.flags.push_back("big-m-binding");
    if (!t.best.valid()) throw ExactInfeasible("no billing reference induces an admissible price vector");

    res.s = t.best.s;
    res.e = t.best.e;
    res.eli = t.best.value;
    res.final_lower = t.final_lower;
    res.diagnostics.max_kkt_residual = kkt_residual(sp, res.s, best_response(sp, res.s));
    return res;
  }
}

}  // namespace dcdr
