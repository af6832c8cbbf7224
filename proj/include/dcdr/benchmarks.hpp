#pragma once

/**
 * @file
 * @brief ELI bounds and the fixed-price baseline.
 *
 * - Integrated: the load index minimized directly over the provider's feasible
 *   set (lower bound on any pricing outcome).
 * - Restricted: pricing restricted to references whose unclamped response
 *   already lies in the box (upper bound).
 * - Base price: the provider's response to the flat tariff alpha.
 */

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "dcdr/model.hpp"
#include "dcdr/numerics/qp.hpp"
#include "dcdr/numerics/water_fill.hpp"
#include "dcdr/stage2.hpp"

namespace dcdr {

/// Tolerances used when a QP value certifies a bound.
inline numerics::QpSettings certify_settings() {
  numerics::QpSettings s;
  s.eps_abs = std::min(s.eps_abs, 1e-8);
  s.eps_rel = std::min(s.eps_rel, 1e-8);
  s.max_iter = 50000;
  return s;
}

struct IntegratedResult {
  Vec e;
  double eli = 0.0;
  double multiplier = 0.0;
};

inline IntegratedResult solve_integrated(const SlotProblem& sp) {
  check_slot_feasible(sp);
  numerics::WaterFillProblem p;
  p.center = -sp.background;
  p.slope = 0.5 * sp.theta.cwiseProduct(sp.capacity);
  p.weight = sp.theta;
  p.lo = sp.e_lo;
  p.hi = sp.e_hi;
  p.target = sp.e_total;
  const auto wf = numerics::water_fill(p);
  return {wf.x, eli(sp, wf.x), wf.multiplier};
}

struct PhysicalIntegratedResult {
  Vec workload;
  Vec servers;
  Vec e;
  double eli = 0.0;
  numerics::QpSolution qp;
};

/**
 * The integrated problem in workload/server space, without the energy-space
 * reduction. Variables are normalized as u = lambda / (mu M), v = x / M.
 */
inline PhysicalIntegratedResult solve_integrated_physical(const Scenario& sc, std::size_t t,
                                                          const numerics::QpSettings& cfg = certify_settings()) {
  using numerics::kInf;
  const auto N = static_cast<Eigen::Index>(sc.locations());
  const auto row = static_cast<Eigen::Index>(t);
  const double to_mwh = sc.slot_length * kWattHourToMWh;
  const double L = sc.workload[row];
  double cap_total = 0.0;
  for (const auto& dc : sc.data_centers) cap_total += dc.service_rate * dc.servers;

  // e_i = gu_i u_i + gv_i v_i + xi_i
  Vec gu(N), gv(N), xi(N), k(N), cap(N), Q(N), B(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& dc = sc.data_centers[static_cast<std::size_t>(i)];
    const double muM = dc.service_rate * dc.servers;
    gu[i] = (dc.p_peak - dc.p_idle) / dc.service_rate * muM * to_mwh;
    gv[i] = (dc.p_idle + (dc.pue - 1.0) * dc.p_peak) * dc.servers * to_mwh;
    xi[i] = dc.base_overhead;
    k[i] = 1.0 / (sc.delay_bound - sc.transmission_delay(row, i));
    cap[i] = sc.grid.capacity[i] * sc.slot_length;
    B[i] = sc.grid.background(row, i);
    Q[i] = cap[i] - B[i];
  }

  auto p = numerics::make_qp(2 * N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const Eigen::Index iu = i, iv = N + i;
    const double w = 2.0 / cap[i];
    p.P(iu, iu) = w * gu[i] * gu[i];
    p.P(iu, iv) = p.P(iv, iu) = w * gu[i] * gv[i];
    p.P(iv, iv) = w * gv[i] * gv[i];
    const double off = w * (xi[i] + B[i]);
    p.q[iu] = off * gu[i];
    p.q[iv] = off * gv[i];
  }
  // Workload balance, scaled by total service capacity.
  p.A = numerics::Matrix::Zero(1, 2 * N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& dc = sc.data_centers[static_cast<std::size_t>(i)];
    p.A(0, i) = dc.service_rate * dc.servers / cap_total;
  }
  p.b = Vec::Constant(1, L / cap_total);

  // Rows: u >= 0, 0 <= v <= 1, v - u >= k/(mu M), 0 <= e <= Q.
  p.G = numerics::Matrix::Zero(4 * N, 2 * N);
  p.l.resize(4 * N);
  p.u.resize(4 * N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& dc = sc.data_centers[static_cast<std::size_t>(i)];
    const double muM = dc.service_rate * dc.servers;
    p.G(i, i) = 1.0;
    p.l[i] = 0.0;
    p.u[i] = kInf;
    p.G(N + i, N + i) = 1.0;
    p.l[N + i] = 0.0;
    p.u[N + i] = 1.0;
    p.G(2 * N + i, N + i) = 1.0;
    p.G(2 * N + i, i) = -1.0;
    p.l[2 * N + i] = k[i] / muM;
    p.u[2 * N + i] = kInf;
    // Energy row scaled by the slot capacity.
    p.G(3 * N + i, i) = gu[i] / cap[i];
    p.G(3 * N + i, N + i) = gv[i] / cap[i];
    p.l[3 * N + i] = -xi[i] / cap[i];
    p.u[3 * N + i] = (Q[i] - xi[i]) / cap[i];
  }

  PhysicalIntegratedResult r;
  r.qp = numerics::qp_solve(p, cfg);
  if (r.qp.status == numerics::QpStatus::infeasible) throw InfeasibleSlot("integrated (workload space): infeasible");
  if (!r.qp.optimal())
    throw SolverError(std::string("integrated (workload space): ") + numerics::to_string(r.qp.status));
  r.workload.resize(N);
  r.servers.resize(N);
  r.e.resize(N);
  double value = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& dc = sc.data_centers[static_cast<std::size_t>(i)];
    const double u = r.qp.x[i], v = r.qp.x[N + i];
    r.workload[i] = u * dc.service_rate * dc.servers;
    r.servers[i] = v * dc.servers;
    r.e[i] = gu[i] * u + gv[i] * v + xi[i];
    const double ratio = (r.e[i] + B[i]) / cap[i];
    value += ratio * ratio * cap[i];
  }
  r.eli = value;
  return r;
}

struct RestrictedResult {
  Vec s;
  Vec e;
  double sigma = 0.0;
  double eli = 0.0;
  numerics::QpSolution qp;
};

/// QP in (s, e, sigma) with the unclamped response as an equality and the box on e.
inline RestrictedResult solve_restricted(const SlotProblem& sp,
                                         const numerics::QpSettings& cfg = certify_settings()) {
  using numerics::kInf;
  check_slot_feasible(sp);
  const Eigen::Index N = sp.size();
  const Eigen::Index nv = 2 * N + 1;
  const Eigen::Index is = 0, ie = N, isig = 2 * N;
  // sigma is carried as sigma * theta_max so that its column is O(beta).
  const double tmax = sp.theta.maxCoeff();
  const Vec th = sp.theta / tmax;

  auto p = numerics::make_qp(nv);
  for (Eigen::Index i = 0; i < N; ++i) {
    p.P(ie + i, ie + i) = 2.0 / sp.capacity[i];
    p.q[ie + i] = 2.0 * sp.background[i] / sp.capacity[i];
  }
  p.A = numerics::Matrix::Zero(N + 1, nv);
  p.b = Vec::Zero(N + 1);
  for (Eigen::Index i = 0; i < N; ++i) {
    p.A(i, ie + i) = 2.0 * sp.beta[i];
    p.A(i, is + i) = -sp.beta[i];
    p.A(i, isig) = th[i];
    p.b[i] = -sp.alpha[i];
    p.A(N, ie + i) = th[i];
  }
  p.b[N] = sp.e_total / tmax;

  // Rows: price band (N), average cap (1), box (N).
  p.G = numerics::Matrix::Zero(2 * N + 1, nv);
  p.l.resize(2 * N + 1);
  p.u.resize(2 * N + 1);
  for (Eigen::Index i = 0; i < N; ++i) {
    p.G(i, ie + i) = sp.beta[i];
    p.G(i, is + i) = -sp.beta[i];
    p.l[i] = sp.price_floor[i] - sp.alpha[i];
    p.u[i] = sp.price_ceiling[i] - sp.alpha[i];
    p.G(N, ie + i) = sp.beta[i] / static_cast<double>(N);
    p.G(N, is + i) = -sp.beta[i] / static_cast<double>(N);
    p.G(N + 1 + i, ie + i) = 1.0;
    p.l[N + 1 + i] = sp.e_lo[i];
    p.u[N + 1 + i] = sp.e_hi[i];
  }
  p.l[N] = -kInf;
  p.u[N] = sp.avg_cap - sp.alpha.mean();

  RestrictedResult r;
  r.qp = numerics::qp_solve(p, cfg);
  if (r.qp.status == numerics::QpStatus::infeasible)
    throw RestrictedInfeasible("restricted benchmark: no reference keeps the unclamped response inside the box");
  if (!r.qp.optimal()) throw SolverError(std::string("restricted benchmark: ") + numerics::to_string(r.qp.status));
  r.s = r.qp.x.segment(is, N);
  r.e = r.qp.x.segment(ie, N).cwiseMax(sp.e_lo).cwiseMin(sp.e_hi);
  r.sigma = r.qp.x[isig] / tmax;
  r.eli = eli(sp, r.e);
  return r;
}

struct BasePriceResult {
  Vec e;
  double eli = 0.0;
  /// sum_i alpha_i e_i
  double cost = 0.0;
};

/// Cheapest dispatch at the flat tariff: fill locations in order of alpha/theta.
inline BasePriceResult solve_base_price(const SlotProblem& sp) {
  check_slot_feasible(sp);
  const Eigen::Index N = sp.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return sp.alpha[a] / sp.theta[a] < sp.alpha[b] / sp.theta[b];
  });
  Vec e = sp.e_lo;
  double remaining = sp.e_total - sp.theta.dot(e);
  for (Eigen::Index i : order) {
    if (remaining <= 0.0) break;
    const double add = std::min(sp.e_hi[i] - sp.e_lo[i], remaining / sp.theta[i]);
    e[i] += add;
    remaining -= sp.theta[i] * add;
  }
  return {e, eli(sp, e), sp.alpha.dot(e)};
}

}  // namespace dcdr
