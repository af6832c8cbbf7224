#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <random>

#include "dcdr/numerics/bisect.hpp"
#include "dcdr/numerics/qp.hpp"
#include "dcdr/numerics/water_fill.hpp"
#include "support/ipm_oracle.hpp"
#include "support/random_qp.hpp"

using dcdr::numerics::kInf;
using dcdr::numerics::QpProblem;
using dcdr::numerics::QpSettings;
using dcdr::numerics::QpStatus;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using dcdr::testing::random_feasible_qp;

TEST(Bisect, LinearRoot) {
  const double root = dcdr::numerics::bisect([](double x) { return x - 3.0; }, 0.0, 10.0, 1e-12);
  EXPECT_NEAR(root, 3.0, 1e-11);
}

TEST(Bisect, MatchesGridScanOnClampedResidual) {
  // Two locations: f(sigma) = sum theta * clamp(c - theta*sigma/(2 beta)) - E.
  const double theta[2] = {1.0, 2.0}, beta[2] = {1.0, 0.5}, c[2] = {1.3, 0.2};
  const double lo[2] = {0.0, 0.0}, hi[2] = {1.0, 1.5}, E = 2.1;
  auto f = [&](double s) {
    double acc = -E;
    for (int i = 0; i < 2; ++i) acc += theta[i] * std::clamp(c[i] - theta[i] * s / (2 * beta[i]), lo[i], hi[i]);
    return acc;
  };
  // Grid oracle: first grid point where f turns nonpositive.
  double grid_root = 0.0;
  const double step = 1e-6;
  for (long k = 0;; ++k) {
    const double s = -5.0 + step * static_cast<double>(k);
    if (f(s) <= 0.0) {
      grid_root = s;
      break;
    }
  }
  const double root = dcdr::numerics::bisect(f, -5.0, 5.0, 1e-12);
  EXPECT_NEAR(root, grid_root, 1e-6);
}

TEST(Bisect, ExpandsBracketTowardsRoot) {
  // Strictly decreasing, root far below the initial bracket.
  auto f = [](double x) { return -(x + 40.0); };
  const auto r = dcdr::numerics::bisect_bracketed(f, 0.0, 1.0);
  EXPECT_NEAR(r.x, -40.0, 1e-8);
  EXPECT_GT(r.expansions, 0);
  // Increasing, root above.
  const auto r2 = dcdr::numerics::bisect_bracketed([](double x) { return x - 100.0; }, 0.0, 1.0);
  EXPECT_NEAR(r2.x, 100.0, 1e-8);
}

TEST(Bisect, ThrowsWithoutSignChange) {
  EXPECT_THROW(dcdr::numerics::bisect([](double) { return 1.0; }, 0.0, 1.0, 1e-9),
               dcdr::BracketError);
  EXPECT_THROW(dcdr::numerics::bisect([](double x) { return x * x + 1.0; }, 0.0, 1.0, 1e-9),
               dcdr::BracketError);
}

TEST(WaterFill, ExactOnFreeSetAndFlatIntervalMidpoint) {
  dcdr::numerics::WaterFillProblem p;
  p.center = VectorXd::Constant(2, 2.0);
  p.slope = VectorXd::Ones(2);
  p.weight = VectorXd::Ones(2);
  p.lo = VectorXd::Zero(2);
  p.hi = VectorXd::Constant(2, 2.0);
  p.target = 2.0;
  auto r = dcdr::numerics::water_fill(p);
  EXPECT_NEAR(r.multiplier, 1.0, 1e-14);
  EXPECT_NEAR(r.x[0], 1.0, 1e-14);
  EXPECT_FALSE(r.flat);

  // Both at upper bound, target exactly saturating: multiplier interval (-inf, 0].
  p.hi = VectorXd::Ones(2);
  p.target = 2.0;
  p.center = VectorXd::Constant(2, 3.0);
  r = dcdr::numerics::water_fill(p);
  EXPECT_TRUE(r.flat);
  EXPECT_NEAR(r.x.sum(), 2.0, 1e-14);

  p.target = 2.5;
  EXPECT_THROW(dcdr::numerics::water_fill(p), dcdr::InfeasibleSlot);
}

TEST(QpSolve, ActiveLowerBound) {
  auto p = dcdr::numerics::make_qp(1);
  p.P(0, 0) = 2.0;
  p.G = MatrixXd::Ones(1, 1);
  p.l = VectorXd::Ones(1);
  p.u = VectorXd::Constant(1, kInf);
  const auto s = dcdr::numerics::qp_solve(p);
  ASSERT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR(s.x[0], 1.0, 1e-8);
  EXPECT_LT(s.y[0], 0.0);  // lower bound active
}

TEST(QpSolve, EqualityConstrainedMatchesKkt) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 8, m = 1 + trial % std::min(3, n - 1);
    MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = nd(rng);
    auto p = dcdr::numerics::make_qp(n);
    p.P = M.transpose() * M + MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) p.q[i] = nd(rng);
    p.A.resize(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) p.A(i, j) = nd(rng);
    p.b.resize(m);
    for (int i = 0; i < m; ++i) p.b[i] = nd(rng);
    const VectorXd ref = dcdr::testing::kkt_equality_solve(p.P, p.q, p.A, p.b);
    const auto s = dcdr::numerics::qp_solve(p);
    ASSERT_EQ(s.status, QpStatus::optimal);
    EXPECT_LT((s.x - ref).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
  }
}

TEST(QpSolve, DetectsPrimalInfeasibility) {
  // x1 + x2 = 1 but 2 <= x1 + x2 <= 3.
  auto p = dcdr::numerics::make_qp(2);
  p.P = MatrixXd::Identity(2, 2);
  p.A = MatrixXd::Ones(1, 2);
  p.b = VectorXd::Ones(1);
  p.G = MatrixXd::Ones(1, 2);
  p.l = VectorXd::Constant(1, 2.0);
  p.u = VectorXd::Constant(1, 3.0);
  EXPECT_EQ(dcdr::numerics::qp_solve(p).status, QpStatus::infeasible);

  // Box empty after the equality restriction: x1 = x2, x1 in [0,1], x2 in [2,3].
  auto p2 = dcdr::numerics::make_qp(2);
  p2.A.resize(1, 2);
  p2.A << 1.0, -1.0;
  p2.b = VectorXd::Zero(1);
  p2.G = MatrixXd::Identity(2, 2);
  p2.l.resize(2);
  p2.l << 0.0, 2.0;
  p2.u.resize(2);
  p2.u << 1.0, 3.0;
  EXPECT_EQ(dcdr::numerics::qp_solve(p2).status, QpStatus::infeasible);
}

TEST(QpSolve, DetectsUnboundedness) {
  auto p = dcdr::numerics::make_qp(1);
  p.q[0] = -1.0;
  p.G = MatrixXd::Ones(1, 1);
  p.l = VectorXd::Zero(1);
  p.u = VectorXd::Constant(1, kInf);
  EXPECT_EQ(dcdr::numerics::qp_solve(p).status, QpStatus::unbounded);
}

TEST(QpSolve, RejectsMalformedProblems) {
  auto p = dcdr::numerics::make_qp(2);
  p.P(0, 1) = 1.0;
  EXPECT_THROW(dcdr::numerics::qp_solve(p), std::invalid_argument);
  auto p2 = dcdr::numerics::make_qp(1);
  p2.G = MatrixXd::Ones(1, 1);
  p2.l = VectorXd::Ones(1);
  p2.u = VectorXd::Zero(1);
  EXPECT_THROW(dcdr::numerics::qp_solve(p2), std::invalid_argument);
}


TEST(QpSolve, RandomConvexQpsAgreeWithInteriorPointOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const QpProblem p = random_feasible_qp(rng);
    const auto s = dcdr::numerics::qp_solve(p);
    ASSERT_EQ(s.status, QpStatus::optimal) << "trial " << trial;
    const auto ref = dcdr::testing::ipm_solve(p);
    ASSERT_TRUE(ref.converged) << "oracle failed on trial " << trial;
    EXPECT_NEAR(s.objective, ref.objective, 1e-5 * std::max(1.0, std::abs(ref.objective)))
        << "trial " << trial;
    EXPECT_LE(s.primal_residual, 1e-6) << "trial " << trial;
    EXPECT_LE(s.dual_residual, 1e-6) << "trial " << trial;
    // Complementary slackness on every inequality row.
    const VectorXd gx = p.G * s.x;
    const VectorXd yi = s.y.tail(p.num_ineq());
    for (Eigen::Index j = 0; j < yi.size(); ++j) {
      const double slack = yi[j] > 0 ? p.u[j] - gx[j] : gx[j] - p.l[j];
      if (yi[j] != 0.0) { EXPECT_LE(std::abs(yi[j] * slack), 1e-5) << "trial " << trial << " row " << j; }
    }
  }
}

TEST(QpSolve, BitwiseDeterministic) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const QpProblem p = random_feasible_qp(rng);
    const auto a = dcdr::numerics::qp_solve(p);
    const auto b = dcdr::numerics::qp_solve(p);
    ASSERT_EQ(a.x.size(), b.x.size());
    EXPECT_EQ(0, std::memcmp(a.x.data(), b.x.data(), sizeof(double) * a.x.size()));
    EXPECT_EQ(0, std::memcmp(a.y.data(), b.y.data(), sizeof(double) * a.y.size()));
    EXPECT_EQ(a.iterations, b.iterations);
  }
}
