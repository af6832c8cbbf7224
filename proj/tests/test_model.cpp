#include <gtest/gtest.h>

#include <random>

#include "dcdr/model.hpp"
#include "support/fixtures.hpp"
#include "support/random_instances.hpp"

using dcdr::testing::vec;

namespace {

dcdr::DataCenterSpec reference_server() {
  dcdr::DataCenterSpec d;
  d.servers = 10;
  d.service_rate = 4;
  d.p_idle = 100;
  d.p_peak = 200;
  d.pue = 1.5;
  d.base_overhead = 0;
  return d;
}

}  // namespace

TEST(EnergyOf, HandEvaluatedExamples) {
  const auto d = reference_server();
  EXPECT_DOUBLE_EQ(dcdr::energy_of(d, 1, 0), 2.0e-4);
  EXPECT_DOUBLE_EQ(dcdr::energy_of(d, 0, 0), 0.0);
  EXPECT_NEAR(dcdr::energy_of(d, 2, 4), 500e-6, 1e-18);
  // Two-hour slot doubles the energy; overhead is added once.
  auto d2 = d;
  d2.base_overhead = 0.1;
  EXPECT_NEAR(dcdr::energy_of(d2, 1, 0, 2.0), 4.0e-4 + 0.1, 1e-15);
}

TEST(Reduction, CoefficientsMatchHandValues) {
  std::mt19937_64 rng(1);
  auto sc = dcdr::testing::random_scenario(rng, 1);
  sc.data_centers[0] = reference_server();
  sc.data_centers[0].servers = 80000;
  sc.delay_bound = 1e9;  // k -> 0
  sc.transmission_delay(0, 0) = 0.0;
  sc.workload[0] = 1000.0;
  sc.grid.capacity[0] = 100.0;
  sc.grid.background(0, 0) = 10.0;
  const auto sp = dcdr::reduce_to_energy_space(sc, 0);
  // a = 1.5 * 200 / 4 = 75 Wh per request/s.
  EXPECT_NEAR(sp.theta[0], 1.0 / 75e-6, 1e-6);
  EXPECT_NEAR(sp.e_lo[0], 0.0, 1e-12);
  EXPECT_NEAR(sp.e_total, 1000.0, 1e-6);
  // Supply cap (100 - 10) MWh binds far above the server cap of 24 MWh.
  EXPECT_NEAR(sp.e_hi[0], 75e-6 * 4 * 80000, 1e-9);
  EXPECT_NEAR(sp.e_server_hi[0], sp.e_hi[0], 0);
}

TEST(Reduction, ZeroWorkloadPinsEnergiesToFloor) {
  std::mt19937_64 rng(2);
  auto sc = dcdr::testing::random_scenario(rng, 3);
  sc.workload[0] = 0.0;
  const auto sp = dcdr::reduce_to_energy_space(sc, 0);
  EXPECT_NEAR(sp.e_total, sp.theta.dot(sp.e_lo), 1e-9 * sp.e_total);
}

TEST(Reduction, InfeasibleSlotsAreRejected) {
  std::mt19937_64 rng(3);
  auto sc = dcdr::testing::random_scenario(rng, 2);
  double service = 0;
  for (const auto& d : sc.data_centers) service += d.servers * d.service_rate;
  sc.workload[0] = 1.01 * service;
  EXPECT_THROW(dcdr::reduce_to_energy_space(sc, 0), dcdr::InfeasibleSlot);

  auto sc2 = dcdr::testing::random_scenario(rng, 2);
  sc2.grid.background(0, 0) = sc2.grid.capacity[0];  // no supply left below the idle floor
  EXPECT_THROW(dcdr::reduce_to_energy_space(sc2, 0), dcdr::InfeasibleSlot);
}

TEST(RecoverDispatch, RoundTripsThroughEnergyModel) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u01(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 4;
    const auto sc = dcdr::testing::random_scenario(rng, n);
    dcdr::SlotProblem sp;
    try {
      sp = dcdr::reduce_to_energy_space(sc, 0);
    } catch (const dcdr::InfeasibleSlot&) {
      continue;
    }
    // Random point of the box on the equality hyperplane: interpolate the two extremes.
    const double lo = sp.theta.dot(sp.e_lo), hi = sp.theta.dot(sp.e_hi);
    const double w = (sp.e_total - lo) / (hi - lo);
    dcdr::Vec e = sp.e_lo + w * (sp.e_hi - sp.e_lo);
    if (n > 1) {
      // Move mass between two locations keeping sum theta e fixed.
      const double room = std::min(sp.e_hi[0] - e[0], (e[1] - sp.e_lo[1]) * sp.theta[1] / sp.theta[0]);
      const double shift = room * u01(rng);
      e[0] += shift;
      e[1] -= shift * sp.theta[0] / sp.theta[1];
    }
    const auto d = dcdr::recover_dispatch(sc, 0, sp, e);
    EXPECT_NEAR(d.workload.sum(), sc.workload[0], 1e-8 * std::max(1.0, sc.workload[0]));
    for (Eigen::Index i = 0; i < sp.size(); ++i) {
      const auto& dc = sc.data_centers[static_cast<std::size_t>(i)];
      const double k = 1.0 / (sc.delay_bound - sc.transmission_delay(0, i));
      EXPECT_GE(d.workload[i], 0.0);
      EXPECT_GE(d.servers[i], 0.0);
      EXPECT_LE(d.servers[i], dc.servers * (1 + 1e-12));
      EXPECT_GE(dc.service_rate * d.servers[i] - d.workload[i], k - 1e-9 * std::max(1.0, d.workload[i]));
      EXPECT_LE(e[i], sc.grid.capacity[i] - sc.grid.background(0, i) + 1e-9);
      // Independent evaluation of the facility energy.
      const double ind = ((dc.p_idle + (dc.pue - 1) * dc.p_peak) * d.servers[i] +
                          (dc.p_peak - dc.p_idle) / dc.service_rate * d.workload[i]) *
                             1e-6 +
                         dc.base_overhead;
      EXPECT_NEAR(ind, e[i], 1e-9 * e[i]);
    }
  }
}

TEST(RecoverDispatch, LowerBoxGivesZeroWorkload) {
  std::mt19937_64 rng(5);
  auto sc = dcdr::testing::random_scenario(rng, 3);
  sc.workload[0] = 0.0;
  const auto sp = dcdr::reduce_to_energy_space(sc, 0);
  const auto d = dcdr::recover_dispatch(sc, 0, sp, sp.e_lo);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double k = 1.0 / (sc.delay_bound - sc.transmission_delay(0, i));
    EXPECT_NEAR(d.workload[i], 0.0, 1e-9);
    EXPECT_NEAR(d.servers[i], k / sc.data_centers[static_cast<std::size_t>(i)].service_rate, 1e-12);
  }
}

TEST(RecoverDispatch, RejectsPointsOutsideTheFeasibleSet) {
  std::mt19937_64 rng(6);
  const auto sc = dcdr::testing::random_scenario(rng, 2);
  const auto sp = dcdr::reduce_to_energy_space(sc, 0);
  dcdr::Vec e = sp.e_lo;
  e[1] -= 1e-3;
  EXPECT_THROW(dcdr::recover_dispatch(sc, 0, sp, e), dcdr::PreconditionError);
  EXPECT_THROW(dcdr::recover_dispatch(sc, 0, sp, sp.e_hi), dcdr::PreconditionError);
}

TEST(Eli, HandEvaluatedExamples) {
  dcdr::SlotProblem sp;
  sp.background = vec({0, 0});
  sp.capacity = vec({4, 4});
  EXPECT_DOUBLE_EQ(dcdr::eli(sp, vec({1, 1})), 0.5);
  EXPECT_DOUBLE_EQ(dcdr::eli(sp, vec({0, 0})), 0.0);
  sp.capacity = vec({2, 6});
  // equal ratio 0.5 -> r^2 * sum C
  EXPECT_DOUBLE_EQ(dcdr::eli(sp, vec({1, 3})), 0.25 * 8);
}

TEST(Eli, EqualRatioMinimizesForFixedTotal) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  dcdr::SlotProblem sp;
  sp.capacity = vec({3, 5, 2, 7});
  sp.background = vec({0.5, 1.0, 0.2, 2.0});
  const double total = 10.0;
  const double r = total / sp.capacity.sum();
  const dcdr::Vec e_eq = r * sp.capacity - sp.background;
  const double best = dcdr::eli(sp, e_eq);
  for (int k = 0; k < 1000; ++k) {
    dcdr::Vec d(4);
    for (int i = 0; i < 4; ++i) d[i] = nd(rng);
    d.array() -= d.mean();  // keeps sum(e + B)
    EXPECT_GE(dcdr::eli(sp, e_eq + 0.3 * d), best - 1e-12);
  }
}

TEST(Eli, StrictlyIncreasingInEachComponent) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 50; ++k) {
    const auto sp = dcdr::testing::random_unit_slot(rng, 3);
    const dcdr::Vec e = 0.5 * (sp.e_lo + sp.e_hi);
    for (Eigen::Index i = 0; i < 3; ++i) {
      dcdr::Vec e2 = e;
      e2[i] += 1e-4;
      EXPECT_GT(dcdr::eli(sp, e2), dcdr::eli(sp, e));
    }
  }
}

TEST(Cost, HandEvaluatedExamples) {
  auto sp = dcdr::testing::two_site_slot();
  EXPECT_DOUBLE_EQ(dcdr::total_cost(sp, vec({1, 1}), vec({1, 1})), 2.0);
  EXPECT_DOUBLE_EQ(dcdr::total_cost(sp, vec({1, 1}), vec({0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(dcdr::total_cost(sp, vec({2, 0}), vec({1.5, 0.5})), 1.5);
}

TEST(Prices, RecomputationIsExact) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 100; ++k) {
    const auto sp = dcdr::testing::random_unit_slot(rng, 4);
    dcdr::Vec s = dcdr::Vec::Random(4), e = dcdr::Vec::Random(4);
    const auto dec = dcdr::make_pricing(sp, s, e);
    for (Eigen::Index i = 0; i < 4; ++i)
      EXPECT_EQ(dec.price[i], sp.alpha[i] + sp.beta[i] * (e[i] - s[i]));
  }
}

TEST(Validation, ReportsEveryViolationWithCoordinates) {
  std::mt19937_64 rng(10);
  auto sc = dcdr::testing::random_scenario(rng, 3, 4);
  EXPECT_TRUE(dcdr::validate_scenario(sc).empty());
  sc.grid.background(2, 1) = sc.grid.capacity[1] * 1.5;
  sc.transmission_delay(3, 0) = sc.delay_bound;
  sc.data_centers[2].pue = 0.9;
  sc.pricing.sensitivity[0] = -1;
  const auto v = dcdr::validate_scenario(sc);
  ASSERT_EQ(v.size(), 4u);
  auto has = [&](const std::string& needle) {
    return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
  };
  EXPECT_TRUE(has("slot 2, location 1"));
  EXPECT_TRUE(has("QoS"));
  EXPECT_TRUE(has("pue"));
  EXPECT_TRUE(has("beta"));
  EXPECT_THROW(dcdr::require_valid(sc), dcdr::ValidationError);
}
