#include <gtest/gtest.h>

#include <random>

#include "dcdr/heuristic.hpp"
#include "support/fixtures.hpp"
#include "support/random_instances.hpp"

using dcdr::Vec;
using dcdr::testing::vec;

namespace {

void expect_monotone_trace(const dcdr::DescentResult& r, int trial) {
  double last = r.trace.front().eli;
  for (const auto& st : r.trace) {
    if (!st.accepted) continue;
    EXPECT_LE(st.eli, last + 1e-12) << "trial " << trial << " iteration " << st.iteration;
    last = st.eli;
  }
}

}  // namespace

TEST(Descent, EqualizedStartIsAFixedPoint) {
  const auto sp = dcdr::testing::two_site_slot();
  const auto rs = dcdr::solve_restricted(sp);
  const auto r = dcdr::descent_solve(sp);
  // Every direction is a uniform shift of s, which the provider absorbs in sigma.
  EXPECT_NEAR(r.eli, rs.eli, 1e-9);
  EXPECT_EQ(r.s, rs.s);
  EXPECT_EQ(r.accepted, 0);
  EXPECT_TRUE(r.flags.empty());
}

TEST(Descent, CloseToExactOnShiftedBackground) {
  auto sp = dcdr::testing::two_site_slot();
  sp.background = vec({0.5, 0});
  const auto r = dcdr::descent_solve(sp);
  const auto exact = dcdr::branch_and_bound(sp);
  EXPECT_LE(r.eli, 1.05 * exact.eli);
  EXPECT_GE(r.eli, exact.eli - 1e-9);
}

TEST(Descent, PointBandLeavesTheStartUnchanged) {
  auto sp = dcdr::testing::two_site_slot();
  sp.background = vec({0.5, 0});
  sp.capacity = vec({1, 3});
  const auto rs = dcdr::solve_restricted(sp);
  const Vec pi = dcdr::implied_prices(sp, rs.s, dcdr::best_response(sp, rs.s).e);
  sp.price_floor = pi;
  sp.price_ceiling = pi;
  const auto r = dcdr::descent_solve(sp);
  EXPECT_LE((r.s - rs.s).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(r.eli, r.start_eli, 1e-9);
  int rejected = 0;
  for (const auto& st : r.trace) rejected += st.accepted ? 0 : 1;
  EXPECT_GE(rejected, 20);
}

TEST(Descent, DirectionSignsFollowLoadRatios) {
  auto sp = dcdr::testing::two_site_slot();
  sp.theta = vec({1, 2});
  sp.beta = vec({2, 1});
  double avg = 0.0;
  const Vec g = dcdr::descent_direction(sp, vec({1.5, 0.5}), &avg);
  EXPECT_DOUBLE_EQ(avg, 1.0);
  EXPECT_DOUBLE_EQ(g[0], -0.25);
  EXPECT_DOUBLE_EQ(g[1], 1.0);
}

TEST(Descent, PropertiesOnRandomInstances) {
  std::mt19937_64 rng(41);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto sp = (trial % 2 == 0) ? dcdr::testing::random_unit_slot(rng, 2 + trial % 3)
                                     : dcdr::testing::random_physical_slot(rng, 2 + trial % 3);
    dcdr::RestrictedResult rs;
    try {
      rs = dcdr::solve_restricted(sp);
    } catch (const dcdr::RestrictedInfeasible&) {
      continue;
    }
    const auto r = dcdr::descent_solve(sp);
    ++checked;
    ASSERT_FALSE(r.trace.empty());
    expect_monotone_trace(r, trial);
    EXPECT_LT(r.iterations, 10000) << "trial " << trial;
    EXPECT_LE(dcdr::price_violation(sp, r.s, r.e), dcdr::price_tolerance(sp, 1e-8)) << "trial " << trial;
    EXPECT_LE(r.eli, r.start_eli) << "trial " << trial;
    EXPECT_NEAR(r.start_eli, rs.eli, 1e-6 * (1.0 + rs.eli)) << "trial " << trial;
    const double pi = dcdr::solve_integrated(sp).eli;
    EXPECT_GE(r.eli, pi - 1e-9 * (1.0 + pi)) << "trial " << trial;
    // The returned energy is the provider's response to the returned references.
    EXPECT_LE((dcdr::best_response(sp, r.s).e - r.e).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_GT(checked, 100);
}

TEST(Descent, FallsBackWhenRestrictedIsInfeasible) {
  auto sp = dcdr::testing::two_site_slot();
  sp.background = vec({0.5, 0});
  sp.price_floor = vec({1, 1});
  sp.avg_cap = 0.5;
  const auto r = dcdr::descent_solve(sp);
  ASSERT_FALSE(r.flags.empty());
  EXPECT_EQ(r.flags.front(), "restricted-infeasible-start");
  EXPECT_EQ(r.trace.front().s, sp.e_hi);
}

TEST(Descent, RepairDirectionFollowsViolatedPrices) {
  auto sp = dcdr::testing::two_site_slot();
  const Vec s = sp.e_hi;
  const Vec e = dcdr::best_response(sp, s).e;
  const Vec pi = dcdr::implied_prices(sp, s, e);
  sp.price_floor = vec({pi[0] + 1, pi[1] - 1});
  sp.price_ceiling = vec({pi[0] + 2, pi[1] + 2});
  sp.avg_cap = pi.mean() + 5;
  Vec g = dcdr::repair_direction(sp, s, e);
  EXPECT_LT(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  sp.price_floor = vec({pi[0] - 1, pi[1] - 1});
  sp.avg_cap = pi.mean() - 1;
  g = dcdr::repair_direction(sp, s, e);
  EXPECT_GT(g.minCoeff(), 0.0);
  sp.avg_cap = pi.mean() + 1;
  EXPECT_TRUE(dcdr::repair_direction(sp, s, e).isZero());
}

TEST(Descent, RepairPhaseShrinksTheViolation) {
  std::mt19937_64 rng(64);
  int repaired = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto sp = dcdr::testing::random_physical_slot(rng, 2 + trial % 3);
    const auto r = dcdr::descent_solve(sp);
    if (!r.has_flag("start-price-infeasible")) continue;
    double prev = dcdr::price_violation(sp, r.trace.front().s, r.trace.front().e);
    const double tol = dcdr::price_tolerance(sp, 1e-8);
    for (const auto& st : r.trace) {
      if (!st.accepted || st.iteration == 0 || prev <= tol) continue;
      const double v = dcdr::price_violation(sp, st.s, st.e);
      EXPECT_LT(v, prev) << "trial " << trial << " iteration " << st.iteration;
      prev = v;
    }
    if (!r.has_flag("price-infeasible")) {
      ++repaired;
      EXPECT_LE(dcdr::price_violation(sp, r.s, r.e), tol);
    }
  }
  EXPECT_GT(repaired, 0);
}
