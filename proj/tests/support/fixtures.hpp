#pragma once

// Small hand-checkable instances.

#include "dcdr/model.hpp"

namespace dcdr::testing {

inline Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// Two locations, theta = alpha = beta = 1, E = 2, box [0, 2]^2, wide prices.
inline SlotProblem two_site_slot() {
  SlotProblem sp;
  sp.theta = vec({1, 1});
  sp.e_total = 2.0;
  sp.e_lo = vec({0, 0});
  sp.e_hi = vec({2, 2});
  sp.e_server_hi = sp.e_hi;
  sp.alpha = vec({1, 1});
  sp.beta = vec({1, 1});
  sp.price_floor = vec({-10, -10});
  sp.price_ceiling = vec({10, 10});
  sp.avg_cap = 10.0;
  sp.background = vec({0, 0});
  sp.capacity = vec({1, 1});
  return sp;
}

/// One location with the given data; e is forced to E / theta.
inline SlotProblem one_site_slot() {
  SlotProblem sp;
  sp.theta = vec({2.0});
  sp.e_total = 3.0;
  sp.e_lo = vec({0.5});
  sp.e_hi = vec({4.0});
  sp.e_server_hi = sp.e_hi;
  sp.alpha = vec({1.5});
  sp.beta = vec({0.5});
  sp.price_floor = vec({0.5});
  sp.price_ceiling = vec({3.0});
  sp.avg_cap = 3.0;
  sp.background = vec({1.0});
  sp.capacity = vec({5.0});
  return sp;
}

}  // namespace dcdr::testing
