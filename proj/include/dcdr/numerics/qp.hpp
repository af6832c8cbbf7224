#pragma once

/**
 * @file
 * @brief Dense convex QP solver (operator splitting / ADMM).
 *
 * Solves
 *
 *     min  1/2 x' P x + q' x
 *     s.t. A x  = b
 *          l <= G x <= u
 *
 * with P symmetric positive semidefinite. Internally the equality and
 * inequality rows are stacked into one constraint matrix C with bounds
 * [lc, uc] (lc = uc on equality rows) and the OSQP iteration is applied to
 * the Ruiz-equilibrated problem. A converged iterate is refined by solving
 * the equality-constrained KKT system on its guessed active set.
 *
 * Dual sign convention: stationarity reads P x + q + C' y = 0, a negative
 * y_j flags an active lower bound, a positive one an active upper bound.
 */

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace dcdr::numerics {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QpProblem {
  Matrix P;
  Vector q;
  Matrix A;
  Vector b;
  Matrix G;
  Vector l;
  Vector u;

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_eq() const { return A.rows(); }
  Eigen::Index num_ineq() const { return G.rows(); }

  double objective(const Vector& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }

  /// Throws std::invalid_argument on inconsistent dimensions or data.
  void validate() const {
    const Eigen::Index n = q.size();
    if (P.rows() != n || P.cols() != n) throw std::invalid_argument("qp: P must be n x n");
    if (A.rows() > 0 && A.cols() != n) throw std::invalid_argument("qp: A has wrong column count");
    if (A.rows() != b.size()) throw std::invalid_argument("qp: A and b disagree");
    if (G.rows() > 0 && G.cols() != n) throw std::invalid_argument("qp: G has wrong column count");
    if (G.rows() != l.size() || G.rows() != u.size())
      throw std::invalid_argument("qp: G, l, u disagree");
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("qp: P is not symmetric");
    for (Eigen::Index i = 0; i < l.size(); ++i)
      if (l[i] > u[i]) throw std::invalid_argument("qp: l > u in row " + std::to_string(i));
  }
};

/// Builder helper: an empty (0 x n) constraint block.
inline QpProblem make_qp(Eigen::Index n) {
  QpProblem p;
  p.P = Matrix::Zero(n, n);
  p.q = Vector::Zero(n);
  p.A = Matrix::Zero(0, n);
  p.b = Vector::Zero(0);
  p.G = Matrix::Zero(0, n);
  p.l = Vector::Zero(0);
  p.u = Vector::Zero(0);
  return p;
}

enum class QpStatus { optimal, infeasible, unbounded, max_iterations };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::unbounded: return "unbounded";
    case QpStatus::max_iterations: return "max_iterations";
  }
  return "unknown";
}

struct QpSolution {
  Vector x;
  /// equality multipliers first, then inequality multipliers
  Vector y;
  QpStatus status = QpStatus::max_iterations;
  double primal_residual = kInf;
  double dual_residual = kInf;
  double objective = kInf;
  int iterations = 0;
  bool polished = false;

  bool optimal() const { return status == QpStatus::optimal; }
};

/// Default absolute tolerance; overridable through DCDR_QP_TOL.
inline double default_qp_tolerance() {
  if (const char* env = std::getenv("DCDR_QP_TOL")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && v > 0.0 && std::isfinite(v)) return v;
  }
  return 1e-6;
}

struct QpSettings {
  double eps_abs = default_qp_tolerance();
  double eps_rel = default_qp_tolerance();
  double eps_primal_infeasible = 1e-7;
  double eps_dual_infeasible = 1e-7;
  int max_iter = 20000;
  /// penalty
  double rho = 0.1;
  /// proximal regularization
  double sigma = 1e-6;
  /// over-relaxation
  double alpha = 1.6;
  int scaling_iter = 15;
  bool adaptive_rho = true;
  int adaptive_rho_interval = 25;
  bool polish = true;
  int polish_refine_iter = 5;
  /// attempt an early polish every this many iterations (0 disables)
  int polish_interval = 100;
  std::optional<Vector> x0;
};

namespace detail {

inline double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

inline double scale_factor(double norm) {
  if (norm < 1e-4) return 1.0;
  return std::clamp(1.0 / std::sqrt(norm), 1e-4, 1e4);
}

/// Working copy of the equilibrated problem plus ADMM state.
class AdmmWorkspace {
 public:
  AdmmWorkspace(const QpProblem& p, const QpSettings& s) : set_(s) {
    n_ = p.num_vars();
    m_eq_ = p.num_eq();
    m_ = m_eq_ + p.num_ineq();
    C_.resize(m_, n_);
    lo_.resize(m_);
    hi_.resize(m_);
    if (m_eq_ > 0) {
      C_.topRows(m_eq_) = p.A;
      lo_.head(m_eq_) = p.b;
      hi_.head(m_eq_) = p.b;
    }
    if (p.num_ineq() > 0) {
      C_.bottomRows(p.num_ineq()) = p.G;
      lo_.tail(p.num_ineq()) = p.l;
      hi_.tail(p.num_ineq()) = p.u;
    }
    P_ = p.P;
    q_ = p.q;
    equilibrate();
  }

  QpSolution solve(const QpProblem& original) {
    Vector x = Vector::Zero(n_);
    Vector z = Vector::Zero(m_);
    Vector y = Vector::Zero(m_);
    if (set_.x0) {
      x = set_.x0->cwiseQuotient(D_);
      z = project(C_ * x);
    }
    init_rho(set_.rho);
    factor();

    QpSolution sol;
    Vector x_prev, z_prev, y_prev;
    for (int k = 1; k <= set_.max_iter; ++k) {
      x_prev = x;
      z_prev = z;
      y_prev = y;
      const Vector rhs = set_.sigma * x - q_ + C_.transpose() * (rho_.cwiseProduct(z) - y);
      const Vector xt = llt_.solve(rhs);
      const Vector zt = C_ * xt;
      x = set_.alpha * xt + (1.0 - set_.alpha) * x_prev;
      const Vector zrel = set_.alpha * zt + (1.0 - set_.alpha) * z_prev;
      z = project(zrel + y.cwiseQuotient(rho_));
      y += rho_.cwiseProduct(zrel - z);

      const Residuals r = residuals(x, z, y);
      sol.iterations = k;
      if (r.primal <= r.eps_primal && r.dual <= r.eps_dual) {
        sol.status = QpStatus::optimal;
        break;
      }
      if (primal_infeasible(y - y_prev)) {
        sol.status = QpStatus::infeasible;
        break;
      }
      if (dual_infeasible(x - x_prev)) {
        sol.status = QpStatus::unbounded;
        break;
      }
      if (set_.adaptive_rho && k % set_.adaptive_rho_interval == 0) adapt_rho(r);
      // Slow tails (LP-like directions) are cut short by an early active-set guess.
      if (set_.polish && set_.polish_interval > 0 && k % set_.polish_interval == 0) {
        sol.x = D_.cwiseProduct(x);
        sol.y = E_.cwiseProduct(y) / cost_scale_;
        polish(x, z, y, sol, false);
        if (sol.polished) {
          sol.status = QpStatus::optimal;
          break;
        }
      }
    }

    if (!sol.polished) {
      sol.x = D_.cwiseProduct(x);
      sol.y = E_.cwiseProduct(y) / cost_scale_;
    }
    if (sol.status == QpStatus::optimal && set_.polish && !sol.polished) polish(x, z, y, sol, true);
    const Residuals fin = unscaled_residuals(original, sol.x, sol.y);
    sol.primal_residual = fin.primal;
    sol.dual_residual = fin.dual;
    sol.objective = original.objective(sol.x);
    return sol;
  }

 private:
  struct Residuals {
    double primal, dual, eps_primal, eps_dual;
    double norm_Cx, norm_z, norm_Px, norm_Cty, norm_q;
  };

  void equilibrate() {
    D_ = Vector::Ones(n_);
    E_ = Vector::Ones(m_);
    cost_scale_ = 1.0;
    for (int it = 0; it < set_.scaling_iter; ++it) {
      Vector dd(n_), de(m_);
      for (Eigen::Index j = 0; j < n_; ++j) {
        double nrm = P_.col(j).cwiseAbs().maxCoeff();
        if (m_ > 0) nrm = std::max(nrm, C_.col(j).cwiseAbs().maxCoeff());
        dd[j] = scale_factor(nrm);
      }
      for (Eigen::Index i = 0; i < m_; ++i) de[i] = scale_factor(C_.row(i).cwiseAbs().maxCoeff());
      P_ = dd.asDiagonal() * P_ * dd.asDiagonal();
      q_ = dd.cwiseProduct(q_);
      C_ = de.asDiagonal() * C_ * dd.asDiagonal();
      D_ = D_.cwiseProduct(dd);
      E_ = E_.cwiseProduct(de);

      double mean_col = 0.0;
      for (Eigen::Index j = 0; j < n_; ++j) mean_col += P_.col(j).cwiseAbs().maxCoeff();
      mean_col /= static_cast<double>(std::max<Eigen::Index>(n_, 1));
      double gamma = std::max(mean_col, inf_norm(q_));
      gamma = gamma < 1e-4 ? 1.0 : std::clamp(1.0 / gamma, 1e-4, 1e4);
      P_ *= gamma;
      q_ *= gamma;
      cost_scale_ *= gamma;
    }
    lo_ = E_.cwiseProduct(lo_);
    hi_ = E_.cwiseProduct(hi_);
  }

  void init_rho(double rho) {
    rho_base_ = std::clamp(rho, 1e-6, 1e6);
    rho_.resize(m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (lo_[i] == hi_[i])
        rho_[i] = 1e3 * rho_base_;
      else if (std::isinf(lo_[i]) && std::isinf(hi_[i]))
        rho_[i] = 1e-6;
      else
        rho_[i] = rho_base_;
    }
  }

  void factor() {
    Matrix K = P_;
    K.diagonal().array() += set_.sigma;
    if (m_ > 0) K.noalias() += C_.transpose() * rho_.asDiagonal() * C_;
    llt_.compute(K);
  }

  Vector project(const Vector& v) const { return v.cwiseMax(lo_).cwiseMin(hi_); }

  Residuals residuals(const Vector& x, const Vector& z, const Vector& y) const {
    Residuals r{};
    const Vector Cx = C_ * x;
    const Vector Px = P_ * x;
    const Vector Cty = C_.transpose() * y;
    const Vector Einv = E_.cwiseInverse();
    const Vector Dinv = D_.cwiseInverse();
    r.primal = inf_norm(Einv.cwiseProduct(Cx - z));
    r.norm_Cx = inf_norm(Einv.cwiseProduct(Cx));
    r.norm_z = inf_norm(Einv.cwiseProduct(z));
    const double cinv = 1.0 / cost_scale_;
    r.dual = cinv * inf_norm(Dinv.cwiseProduct(Px + q_ + Cty));
    r.norm_Px = cinv * inf_norm(Dinv.cwiseProduct(Px));
    r.norm_Cty = cinv * inf_norm(Dinv.cwiseProduct(Cty));
    r.norm_q = cinv * inf_norm(Dinv.cwiseProduct(q_));
    r.eps_primal = set_.eps_abs + set_.eps_rel * std::max(r.norm_Cx, r.norm_z);
    r.eps_dual = set_.eps_abs + set_.eps_rel * std::max({r.norm_Px, r.norm_Cty, r.norm_q});
    return r;
  }

  static Residuals unscaled_residuals(const QpProblem& p, const Vector& x, const Vector& y) {
    Residuals r{};
    double prim = 0.0;
    if (p.num_eq() > 0) prim = std::max(prim, inf_norm(p.A * x - p.b));
    if (p.num_ineq() > 0) {
      const Vector gx = p.G * x;
      for (Eigen::Index i = 0; i < gx.size(); ++i)
        prim = std::max({prim, p.l[i] - gx[i], gx[i] - p.u[i]});
    }
    Vector grad = p.P * x + p.q;
    if (p.num_eq() > 0) grad += p.A.transpose() * y.head(p.num_eq());
    if (p.num_ineq() > 0) grad += p.G.transpose() * y.tail(p.num_ineq());
    r.primal = prim;
    r.dual = inf_norm(grad);
    return r;
  }

  bool primal_infeasible(const Vector& dy) const {
    if (m_ == 0) return false;
    const double nrm = inf_norm(E_.cwiseProduct(dy));
    if (nrm <= set_.eps_primal_infeasible) return false;
    const Vector d = dy / nrm;
    double support = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (d[i] > 0.0) {
        if (std::isinf(hi_[i])) return false;
        support += hi_[i] * d[i];
      } else if (d[i] < 0.0) {
        if (std::isinf(lo_[i])) return false;
        support += lo_[i] * d[i];
      }
    }
    if (support >= -set_.eps_primal_infeasible) return false;
    const Vector Ctd = D_.cwiseInverse().cwiseProduct(C_.transpose() * d);
    return inf_norm(Ctd) < set_.eps_primal_infeasible;
  }

  bool dual_infeasible(const Vector& dx) const {
    const double nrm = inf_norm(D_.cwiseProduct(dx));
    if (nrm <= set_.eps_dual_infeasible) return false;
    const Vector d = dx / nrm;
    const double eps = set_.eps_dual_infeasible;
    if (inf_norm(D_.cwiseInverse().cwiseProduct(P_ * d)) >= eps * cost_scale_) return false;
    if (q_.dot(d) >= -eps * cost_scale_) return false;
    const Vector Cd = E_.cwiseInverse().cwiseProduct(C_ * d);
    for (Eigen::Index i = 0; i < m_; ++i) {
      const bool lo_finite = !std::isinf(lo_[i]);
      const bool hi_finite = !std::isinf(hi_[i]);
      if (hi_finite && Cd[i] > eps) return false;
      if (lo_finite && Cd[i] < -eps) return false;
    }
    return true;
  }

  void adapt_rho(const Residuals& r) {
    const double prim_rel = r.primal / (std::max(r.norm_Cx, r.norm_z) + 1e-30);
    const double dual_rel = r.dual / (std::max({r.norm_Px, r.norm_Cty, r.norm_q}) + 1e-30);
    const double ratio = std::sqrt(prim_rel / (dual_rel + 1e-30));
    const double rho_new = std::clamp(rho_base_ * ratio, 1e-6, 1e6);
    if (rho_new > 5.0 * rho_base_ || rho_new < 0.2 * rho_base_) {
      init_rho(rho_new);
      factor();
    }
  }

  /// Active-set refinement; replaces sol.{x,y} when it improves the KKT residuals.
  void polish(const Vector& x, const Vector& z, const Vector& y, QpSolution& sol,
              bool admm_converged) const {
    std::vector<Eigen::Index> rows;
    std::vector<double> targets;
    std::vector<int> side;  // -1 lower, +1 upper, 0 equality
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (lo_[i] == hi_[i]) {
        rows.push_back(i);
        targets.push_back(lo_[i]);
        side.push_back(0);
      } else if (z[i] - lo_[i] < -y[i]) {
        rows.push_back(i);
        targets.push_back(lo_[i]);
        side.push_back(-1);
      } else if (hi_[i] - z[i] < y[i]) {
        rows.push_back(i);
        targets.push_back(hi_[i]);
        side.push_back(1);
      }
    }
    const Eigen::Index na = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index dim = n_ + na;
    Matrix K0 = Matrix::Zero(dim, dim);
    K0.topLeftCorner(n_, n_) = P_;
    Vector rhs(dim);
    rhs.head(n_) = -q_;
    for (Eigen::Index k = 0; k < na; ++k) {
      K0.block(n_ + k, 0, 1, n_) = C_.row(rows[k]);
      K0.block(0, n_ + k, n_, 1) = C_.row(rows[k]).transpose();
      rhs[n_ + k] = targets[k];
    }
    constexpr double delta = 1e-9;
    Matrix Kreg = K0;
    Kreg.diagonal().head(n_).array() += delta;
    Kreg.diagonal().tail(na).array() -= delta;
    const Eigen::PartialPivLU<Matrix> lu(Kreg);
    Vector sol_v = lu.solve(rhs);
    for (int it = 0; it < set_.polish_refine_iter; ++it) sol_v += lu.solve(rhs - K0 * sol_v);
    if (!sol_v.allFinite()) return;

    Vector ys = Vector::Zero(m_);
    for (Eigen::Index k = 0; k < na; ++k) {
      const double v = sol_v[n_ + k];
      // An active lower bound needs a nonpositive multiplier and vice versa.
      const double yk_unscaled = E_[rows[k]] * v / cost_scale_;
      const double sign_tol = set_.eps_abs;
      if (side[k] < 0 && yk_unscaled > sign_tol) return;
      if (side[k] > 0 && yk_unscaled < -sign_tol) return;
      ys[rows[k]] = v;
    }
    const Vector xs = sol_v.head(n_);
    const Vector zs = project(C_ * xs);
    const Residuals pr = residuals(xs, zs, ys);
    const Residuals ar = residuals(x, z, y);
    // Polished point must meet the tolerances; after convergence it must also
    // not be worse than the ADMM iterate.
    if (pr.primal > pr.eps_primal || pr.dual > pr.eps_dual) return;
    if (admm_converged && (pr.primal > std::max(ar.primal, 1e-3 * pr.eps_primal) ||
                           pr.dual > std::max(ar.dual, 1e-3 * pr.eps_dual)))
      return;
    sol.x = D_.cwiseProduct(xs);
    sol.y = E_.cwiseProduct(ys) / cost_scale_;
    sol.polished = true;
  }

  QpSettings set_;
  Eigen::Index n_ = 0, m_ = 0, m_eq_ = 0;
  Matrix P_, C_;
  Vector q_, lo_, hi_;
  Vector D_, E_;
  double cost_scale_ = 1.0;
  Vector rho_;
  double rho_base_ = 0.1;
  Eigen::LLT<Matrix> llt_;
};

}  // namespace detail

/// Deterministic: identical inputs and settings yield bitwise-identical output.
inline QpSolution qp_solve(const QpProblem& p, const QpSettings& settings = {}) {
  p.validate();
  detail::AdmmWorkspace ws(p, settings);
  return ws.solve(p);
}

}  // namespace dcdr::numerics
