#pragma once

/**
 * @file
 * @brief Domain types, the server energy model, the reduction of the
 *        dispatch problem to energy space, and the grid-side evaluation
 *        formulas (unit price, cost, load ratio, load index).
 *
 * Units: powers in watts, energies in MWh per slot, prices in $/MWh,
 * workloads in requests/second, delays in seconds, slot length in hours.
 */

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dcdr/errors.hpp"

namespace dcdr {

using Vec = Eigen::VectorXd;
/// rows are slots, columns are locations
using Table = Eigen::MatrixXd;

inline constexpr double kWattHourToMWh = 1e-6;

struct DataCenterSpec {
  std::size_t id = 0;
  double servers = 0.0;       ///< M_i
  double service_rate = 0.0;  ///< requests/second per server
  double p_idle = 0.0;        ///< watts
  double p_peak = 0.0;        ///< watts
  double pue = 1.0;           ///< facility / IT energy ratio, > 1
  double base_overhead = 0.0; ///< MWh per slot
};

struct GridSpec {
  Vec capacity;      ///< C_i, MW
  Table background;  ///< B_i^t, MWh per slot
};

struct PricingPolicy {
  Table base_price;     ///< alpha_i^t
  Vec sensitivity;      ///< beta_i, $/MWh^2
  Table price_floor;    ///< per slot and location
  Table price_ceiling;  ///< per slot and location
  Vec avg_cap;          ///< pi_max^t, per slot
};

struct Scenario {
  std::string name;
  std::string currency = "USD";
  double slot_length = 1.0;  ///< hours
  std::vector<DataCenterSpec> data_centers;
  GridSpec grid;
  PricingPolicy pricing;
  Vec workload;               ///< L^t
  double delay_bound = 0.0;   ///< D, seconds
  Table transmission_delay;   ///< d_i^t, seconds

  std::size_t slots() const { return static_cast<std::size_t>(workload.size()); }
  std::size_t locations() const { return data_centers.size(); }
};

/// One slot of the energy-space problem.
struct SlotProblem {
  Vec theta;        ///< weights of the energy equality
  double e_total = 0.0;
  Vec e_lo;
  Vec e_hi;
  Vec e_server_hi;  ///< upper bound from the server count alone (before the supply cap)
  Vec alpha;
  Vec beta;
  Vec price_floor;
  Vec price_ceiling;
  double avg_cap = std::numeric_limits<double>::infinity();
  Vec background;   ///< MWh per slot
  Vec capacity;     ///< C_i * slot_length, MWh per slot

  Eigen::Index size() const { return theta.size(); }
};

struct PricingDecision {
  Vec reference;  ///< s_i^t
  Vec price;      ///< implied unit prices
};

struct DispatchDecision {
  Vec energy;
  Vec workload;
  Vec servers;
};

// ---------------------------------------------------------------------------
// Validation

inline std::vector<std::string> check_data_center(const DataCenterSpec& d) {
  std::vector<std::string> v;
  const std::string tag = "data_center[" + std::to_string(d.id) + "]";
  if (!(d.servers > 0)) v.push_back(tag + ": servers must be > 0");
  if (!(d.service_rate > 0)) v.push_back(tag + ": service_rate must be > 0");
  if (!(d.p_idle > 0)) v.push_back(tag + ": p_idle must be > 0");
  if (!(d.p_peak > d.p_idle)) v.push_back(tag + ": p_peak must exceed p_idle");
  if (!(d.pue > 1)) v.push_back(tag + ": pue must be > 1");
  if (!(d.base_overhead >= 0)) v.push_back(tag + ": base_overhead must be >= 0");
  return v;
}

/// Collects every violated invariant with (slot, location) coordinates.
inline std::vector<std::string> validate_scenario(const Scenario& sc) {
  std::vector<std::string> v;
  const auto N = static_cast<Eigen::Index>(sc.locations());
  const auto T = static_cast<Eigen::Index>(sc.slots());
  auto at = [](Eigen::Index t, Eigen::Index i) {
    return "(slot " + std::to_string(t) + ", location " + std::to_string(i) + ")";
  };
  if (N == 0) v.push_back("scenario has no data centers");
  if (T == 0) v.push_back("scenario has no slots");
  if (!(sc.slot_length > 0)) v.push_back("slot_length must be > 0");
  if (!(sc.delay_bound > 0)) v.push_back("delay_bound must be > 0");
  for (const auto& d : sc.data_centers) {
    auto dv = check_data_center(d);
    v.insert(v.end(), dv.begin(), dv.end());
  }
  auto shape = [&](const Table& m, const char* name) {
    if (m.rows() != T || m.cols() != N) {
      std::ostringstream os;
      os << name << ": expected " << T << " x " << N << " table, got " << m.rows() << " x " << m.cols();
      v.push_back(os.str());
      return false;
    }
    return true;
  };
  if (sc.grid.capacity.size() != N) v.push_back("grid.capacity: expected one entry per location");
  if (sc.pricing.sensitivity.size() != N) v.push_back("pricing.sensitivity: expected one entry per location");
  if (sc.pricing.avg_cap.size() != T) v.push_back("pricing.avg_cap: expected one entry per slot");
  const bool cap_ok = sc.grid.capacity.size() == N;
  if (cap_ok)
    for (Eigen::Index i = 0; i < N; ++i)
      if (!(sc.grid.capacity[i] > 0)) v.push_back("grid.capacity: must be > 0 at location " + std::to_string(i));
  if (sc.pricing.sensitivity.size() == N)
    for (Eigen::Index i = 0; i < N; ++i)
      if (!(sc.pricing.sensitivity[i] > 0))
        v.push_back("pricing.sensitivity: beta must be > 0 at location " + std::to_string(i));

  if (shape(sc.grid.background, "background") && cap_ok) {
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index i = 0; i < N; ++i) {
        const double b = sc.grid.background(t, i);
        if (!(b >= 0) || b > sc.grid.capacity[i] * sc.slot_length)
          v.push_back("background: B must lie in [0, C * slot_length] at " + at(t, i));
      }
  }
  if (shape(sc.pricing.base_price, "base_price")) {
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index i = 0; i < N; ++i)
        if (!(sc.pricing.base_price(t, i) > 0)) v.push_back("base_price: alpha must be > 0 at " + at(t, i));
  }
  const bool fl = shape(sc.pricing.price_floor, "price_floor");
  const bool ce = shape(sc.pricing.price_ceiling, "price_ceiling");
  if (fl && ce) {
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index i = 0; i < N; ++i)
        if (!(sc.pricing.price_floor(t, i) <= sc.pricing.price_ceiling(t, i)))
          v.push_back("price band: floor exceeds ceiling at " + at(t, i));
    if (sc.pricing.avg_cap.size() == T)
      for (Eigen::Index t = 0; t < T; ++t)
        if (sc.pricing.avg_cap[t] < sc.pricing.price_floor.row(t).mean())
          v.push_back("avg_cap: below the mean price floor at slot " + std::to_string(t));
  }
  for (Eigen::Index t = 0; t < T; ++t)
    if (!(sc.workload[t] >= 0)) v.push_back("workload: L must be >= 0 at slot " + std::to_string(t));
  if (shape(sc.transmission_delay, "transmission_delay")) {
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index i = 0; i < N; ++i) {
        const double d = sc.transmission_delay(t, i);
        if (!(d >= 0)) v.push_back("transmission_delay: must be >= 0 at " + at(t, i));
        if (!(d < sc.delay_bound))
          v.push_back("transmission_delay: d must be below the delay bound D (QoS unsatisfiable) at " + at(t, i));
      }
  }
  return v;
}

inline void require_valid(const Scenario& sc) {
  auto v = validate_scenario(sc);
  if (!v.empty()) throw ValidationError(std::move(v));
}

// ---------------------------------------------------------------------------
// Energy model

/// Facility energy (MWh) of `servers` active machines carrying `rate` requests/second.
inline double energy_of(const DataCenterSpec& dc, double servers, double rate, double slot_length = 1.0) {
  const double per_server_w = dc.p_idle + (dc.pue - 1.0) * dc.p_peak;
  const double per_rate_w = (dc.p_peak - dc.p_idle) / dc.service_rate;
  return (per_server_w * servers + per_rate_w * rate) * slot_length * kWattHourToMWh + dc.base_overhead;
}

/// Affine map e_i = energy_per_rate_i * lambda_i + offset_i obtained with
/// the QoS constraint tight (x_i = (lambda_i + qos_slack_i) / mu_i).
struct DispatchCoefficients {
  Vec energy_per_rate;  ///< MWh per request/second
  Vec offset;           ///< MWh, energy at zero workload
  Vec qos_slack;        ///< 1 / (D - d_i^t), requests/second
};

inline DispatchCoefficients dispatch_coefficients(const Scenario& sc, std::size_t t) {
  const auto N = static_cast<Eigen::Index>(sc.locations());
  DispatchCoefficients c{Vec(N), Vec(N), Vec(N)};
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& dc = sc.data_centers[static_cast<std::size_t>(i)];
    const double slack_time = sc.delay_bound - sc.transmission_delay(static_cast<Eigen::Index>(t), i);
    if (!(slack_time > 0))
      throw PreconditionError("transmission delay reaches the delay bound at location " + std::to_string(i));
    const double k = 1.0 / slack_time;
    c.qos_slack[i] = k;
    c.energy_per_rate[i] = dc.pue * dc.p_peak / dc.service_rate * sc.slot_length * kWattHourToMWh;
    c.offset[i] = (dc.p_idle + (dc.pue - 1.0) * dc.p_peak) * k / dc.service_rate * sc.slot_length *
                      kWattHourToMWh +
                  dc.base_overhead;
  }
  return c;
}

/// Throws InfeasibleSlot when the box cannot host the weighted equality.
inline void check_slot_feasible(const SlotProblem& sp) {
  for (Eigen::Index i = 0; i < sp.size(); ++i)
    if (sp.e_hi[i] < sp.e_lo[i])
      throw InfeasibleSlot("location " + std::to_string(i) +
                           ": power cap below the idle QoS floor (e_hi < e_lo)");
  const double lo = sp.theta.dot(sp.e_lo);
  const double hi = sp.theta.dot(sp.e_hi);
  const double tol = 1e-12 * std::max({1.0, std::abs(sp.e_total), std::abs(hi)});
  if (sp.e_total < lo - tol)
    throw InfeasibleSlot("workload below the QoS floor of the active servers");
  if (sp.e_total > hi + tol)
    throw InfeasibleSlot("workload exceeds the combined server and supply capacity");
}

/// Energy-space instance for slot t; see DispatchCoefficients for the map.
inline SlotProblem reduce_to_energy_space(const Scenario& sc, std::size_t t) {
  const auto N = static_cast<Eigen::Index>(sc.locations());
  const auto row = static_cast<Eigen::Index>(t);
  if (t >= sc.slots()) throw PreconditionError("slot index out of range");
  const DispatchCoefficients c = dispatch_coefficients(sc, t);

  SlotProblem sp;
  sp.theta = c.energy_per_rate.cwiseInverse();
  sp.e_lo = c.offset;
  sp.e_hi.resize(N);
  sp.e_server_hi.resize(N);
  sp.capacity = sc.grid.capacity * sc.slot_length;
  sp.background = sc.grid.background.row(row).transpose();
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& dc = sc.data_centers[static_cast<std::size_t>(i)];
    sp.e_server_hi[i] = c.energy_per_rate[i] * (dc.service_rate * dc.servers - c.qos_slack[i]) + c.offset[i];
    const double supply = sp.capacity[i] - sp.background[i];
    sp.e_hi[i] = std::min(sp.e_server_hi[i], supply);
  }
  sp.e_total = sc.workload[row] + sp.theta.dot(c.offset);
  sp.alpha = sc.pricing.base_price.row(row).transpose();
  sp.beta = sc.pricing.sensitivity;
  sp.price_floor = sc.pricing.price_floor.row(row).transpose();
  sp.price_ceiling = sc.pricing.price_ceiling.row(row).transpose();
  sp.avg_cap = sc.pricing.avg_cap[row];
  check_slot_feasible(sp);
  return sp;
}

/// Workload and QoS-tight server counts that realize the energy vector `e`.
inline DispatchDecision recover_dispatch(const Scenario& sc, std::size_t t, const SlotProblem& sp,
                                         const Vec& e) {
  const Eigen::Index N = sp.size();
  if (e.size() != N) throw PreconditionError("recover_dispatch: energy vector has wrong size");
  constexpr double box_tol = 1e-9;
  for (Eigen::Index i = 0; i < N; ++i) {
    if (e[i] < sp.e_lo[i] - box_tol || e[i] > sp.e_hi[i] + box_tol)
      throw PreconditionError("recover_dispatch: e[" + std::to_string(i) + "] outside its energy box");
  }
  const double gap = std::abs(sp.theta.dot(e) - sp.e_total);
  if (gap > 1e-8 * std::max(1.0, std::abs(sp.e_total)))
    throw PreconditionError("recover_dispatch: weighted energy equality violated by " + std::to_string(gap));

  const DispatchCoefficients c = dispatch_coefficients(sc, t);
  DispatchDecision d{e, Vec(N), Vec(N)};
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& dc = sc.data_centers[static_cast<std::size_t>(i)];
    d.workload[i] = std::max(0.0, (e[i] - c.offset[i]) / c.energy_per_rate[i]);
    d.servers[i] = std::min(dc.servers, (d.workload[i] + c.qos_slack[i]) / dc.service_rate);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Evaluation

inline Vec load_ratio(const SlotProblem& sp, const Vec& e) {
  return (e + sp.background).cwiseQuotient(sp.capacity);
}

/// Capacity-weighted sum of squared load ratios.
inline double eli(const SlotProblem& sp, const Vec& e) {
  const Vec r = load_ratio(sp, e);
  return r.cwiseProduct(r).dot(sp.capacity);
}

/// Same index with the background shifted by `delta`.
inline double eli_shifted(const SlotProblem& sp, const Vec& e, const Vec& delta) {
  const Vec r = (e + sp.background + delta).cwiseQuotient(sp.capacity);
  return r.cwiseProduct(r).dot(sp.capacity);
}

inline Vec implied_prices(const SlotProblem& sp, const Vec& s, const Vec& e) {
  return sp.alpha + sp.beta.cwiseProduct(e - s);
}

inline double total_cost(const SlotProblem& sp, const Vec& s, const Vec& e) {
  return implied_prices(sp, s, e).dot(e);
}

/// Largest violation of the per-location price band and the average cap.
inline double price_violation(const SlotProblem& sp, const Vec& s, const Vec& e) {
  const Vec pi = implied_prices(sp, s, e);
  double v = 0.0;
  for (Eigen::Index i = 0; i < pi.size(); ++i)
    v = std::max({v, sp.price_floor[i] - pi[i], pi[i] - sp.price_ceiling[i]});
  return std::max(v, pi.mean() - sp.avg_cap);
}

inline PricingDecision make_pricing(const SlotProblem& sp, const Vec& s, const Vec& e) {
  return {s, implied_prices(sp, s, e)};
}

// ---------------------------------------------------------------------------
// Reports

enum class Method { integrated, restricted, exact, heuristic, robust, base_price };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::integrated: return "integrated";
    case Method::restricted: return "restricted";
    case Method::exact: return "exact";
    case Method::heuristic: return "heuristic";
    case Method::robust: return "robust";
    case Method::base_price: return "base-price";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::integrated, Method::restricted, Method::exact, Method::heuristic, Method::robust,
                   Method::base_price})
    if (s == to_string(m)) return m;
  throw PreconditionError("unknown method '" + s + "'");
}

struct Diagnostics {
  long nodes = 0;
  long iterations = 0;
  double max_kkt_residual = 0.0;
  int k_escalations = 0;
  double big_m = 0.0;
  /// free-form flags such as "rs-infeasible-start" or "max-iter"
  std::vector<std::string> flags;
};

struct SolveReport {
  Method method = Method::exact;
  double eli = 0.0;
  double total_cost = 0.0;
  double lower_bound = -std::numeric_limits<double>::infinity();
  double upper_bound = std::numeric_limits<double>::infinity();
  Vec reference;  ///< s (empty for methods without one)
  Vec energy;
  Vec price;
  Diagnostics diagnostics;
};

}  // namespace dcdr
