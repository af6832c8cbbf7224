#pragma once

/**
 * @file
 * @brief Seeded synthetic scenarios: diurnal background load, workload and
 *        base prices over a fleet of data centers.
 */

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "dcdr/model.hpp"

namespace dcdr::io {

struct SynthConfig {
  std::size_t locations = 4;
  std::size_t slots = 24;
  std::uint64_t seed = 42;
  double slot_length = 1.0;
  double delay_bound = 0.1;  ///< seconds

  // Fleet, cycled when locations exceeds the list length.
  std::vector<double> servers{80000, 60000, 60000, 80000};
  std::vector<double> service_rate{4, 3, 4, 3};
  std::vector<double> pue{1.5, 1.2, 1.2, 1.5};
  double p_idle = 100.0;  ///< W
  double p_peak = 200.0;  ///< W
  double base_overhead = 0.0;
  /// transmission delay range as a fraction of the delay bound
  double delay_lo = 0.1, delay_hi = 0.5;

  // Grid.
  std::vector<double> capacity{60, 45, 50, 70};  ///< MW
  /// background load as a fraction of capacity: mean, diurnal amplitude, noise sd
  std::vector<double> background_mean{0.55, 0.50, 0.45, 0.60};
  double background_amplitude = 0.15;
  double background_noise = 0.02;
  /// per-location phase shift of the diurnal curves, hours
  std::vector<double> phase{0.0, 1.5, 3.0, 4.5};

  // Workload as a fraction of total service capacity (sum_i mu_i M_i).
  double workload_mean = 0.45;
  double workload_amplitude = 0.15;
  double workload_noise = 0.01;

  // Prices, currency per MWh.
  std::vector<double> base_price{38, 44, 41, 47};
  double price_ripple = 8.0;
  std::vector<double> sensitivity{1.0, 1.5, 1.5, 1.0};  ///< per MWh^2
  double floor_ratio = 0.8;
  double ceiling_ratio = 1.2;
  double avg_cap_ratio = 0.85;
};

namespace detail {

template <class T>
const T& cyc(const std::vector<T>& v, std::size_t i) {
  return v[i % v.size()];
}

/// Daily sinusoid peaking at 15:00 shifted by `phase` hours.
inline double diurnal(double hour, double phase) {
  return std::sin(2.0 * std::numbers::pi * (hour - phase - 9.0) / 24.0);
}

}  // namespace detail

inline Scenario synth_scenario(const SynthConfig& c = {}) {
  using detail::cyc;
  if (c.locations < 1 || c.slots < 1) throw PreconditionError("synth_scenario: need at least one location and slot");
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto N = static_cast<Eigen::Index>(c.locations);
  const auto T = static_cast<Eigen::Index>(c.slots);

  Scenario sc;
  sc.name = "synthetic-" + std::to_string(c.seed);
  sc.slot_length = c.slot_length;
  sc.delay_bound = c.delay_bound;
  double service = 0.0;
  for (std::size_t i = 0; i < c.locations; ++i) {
    DataCenterSpec d;
    d.id = i;
    d.servers = cyc(c.servers, i);
    d.service_rate = cyc(c.service_rate, i);
    d.p_idle = c.p_idle;
    d.p_peak = c.p_peak;
    d.pue = cyc(c.pue, i);
    d.base_overhead = c.base_overhead;
    service += d.servers * d.service_rate;
    sc.data_centers.push_back(d);
  }
  sc.grid.capacity.resize(N);
  sc.pricing.sensitivity.resize(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto k = static_cast<std::size_t>(i);
    sc.grid.capacity[i] = cyc(c.capacity, k);
    sc.pricing.sensitivity[i] = cyc(c.sensitivity, k);
  }

  sc.grid.background.resize(T, N);
  sc.pricing.base_price.resize(T, N);
  sc.transmission_delay.resize(T, N);
  sc.workload.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double hour = static_cast<double>(t) * c.slot_length;
    for (Eigen::Index i = 0; i < N; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double frac = cyc(c.background_mean, k) + c.background_amplitude * detail::diurnal(hour, cyc(c.phase, k)) +
                          c.background_noise * noise(rng);
      sc.grid.background(t, i) = std::clamp(frac, 0.0, 1.0) * sc.grid.capacity[i] * c.slot_length;
      sc.pricing.base_price(t, i) = cyc(c.base_price, k) + c.price_ripple * detail::diurnal(hour, cyc(c.phase, k));
      sc.transmission_delay(t, i) = c.delay_bound * (c.delay_lo + (c.delay_hi - c.delay_lo) * u01(rng));
    }
    const double w = c.workload_mean + c.workload_amplitude * detail::diurnal(hour, 0.0) + c.workload_noise * noise(rng);
    sc.workload[t] = std::max(0.0, w) * service;
  }
  sc.pricing.price_floor = c.floor_ratio * sc.pricing.base_price;
  sc.pricing.price_ceiling = c.ceiling_ratio * sc.pricing.base_price;
  sc.pricing.avg_cap = c.avg_cap_ratio * sc.pricing.base_price.rowwise().mean();
  return sc;
}

}  // namespace dcdr::io
