#pragma once

#include <cmath>
#include <concepts>
#include <string>

#include "dcdr/errors.hpp"

namespace dcdr::numerics {

struct BisectOptions {
  /// stop once the bracket is narrower than this
  double x_tol = 1e-10;
  /// stop once |f(x)| is at most this (0 disables)
  double f_tol = 0.0;
  /// bracket doublings allowed when f(lo), f(hi) share a sign
  int max_expansions = 60;
  int max_iter = 400;
};

struct BisectResult {
  double x;
  double fx;
  double lo;
  double hi;
  int iterations;
  int expansions;
};

/**
 * Root of a monotone scalar function by bisection.
 *
 * The bracket [lo, hi] is expanded by doubling its width on the side where the
 * root must lie (direction inferred from monotonicity) until f changes sign.
 * Works for nonincreasing and nondecreasing f alike.
 */
template <std::invocable<double> F>
BisectResult bisect_bracketed(F&& f, double lo, double hi, const BisectOptions& opt = {}) {
  if (!(lo <= hi)) throw PreconditionError("bisect: lo must not exceed hi");
  double flo = f(lo);
  double fhi = f(hi);
  int expansions = 0;
  while (!(flo == 0.0 || fhi == 0.0 || std::signbit(flo) != std::signbit(fhi))) {
    if (expansions >= opt.max_expansions)
      throw BracketError("bisect: no sign change after " + std::to_string(expansions) +
                         " bracket expansions");
    const double width = std::max(hi - lo, 1.0) * std::ldexp(1.0, expansions);
    const bool increasing = fhi > flo;
    const bool decreasing = fhi < flo;
    // Root lies where |f| shrinks; with a flat pair expand both ends.
    if ((increasing && flo > 0) || (decreasing && flo < 0)) {
      hi = lo;
      fhi = flo;
      lo -= width;
      flo = f(lo);
    } else if ((increasing && fhi < 0) || (decreasing && fhi > 0)) {
      lo = hi;
      flo = fhi;
      hi += width;
      fhi = f(hi);
    } else {
      lo -= width;
      hi += width;
      flo = f(lo);
      fhi = f(hi);
    }
    ++expansions;
  }
  if (flo == 0.0) return {lo, flo, lo, lo, 0, expansions};
  if (fhi == 0.0) return {hi, fhi, hi, hi, 0, expansions};

  const bool lo_negative = std::signbit(flo);
  int it = 0;
  double mid = 0.5 * (lo + hi);
  double fmid = f(mid);
  while (it < opt.max_iter) {
    ++it;
    if (std::abs(fmid) <= opt.f_tol || (hi - lo) <= opt.x_tol) break;
    if (std::signbit(fmid) == lo_negative) {
      lo = mid;
    } else {
      hi = mid;
    }
    const double next = 0.5 * (lo + hi);
    if (next == mid) break;  // bracket below double resolution
    mid = next;
    fmid = f(mid);
  }
  return {mid, fmid, lo, hi, it, expansions};
}

/// Convenience overload returning only the root.
template <std::invocable<double> F>
double bisect(F&& f, double lo, double hi, double tol) {
  BisectOptions opt;
  opt.x_tol = tol;
  opt.f_tol = tol;
  return bisect_bracketed(std::forward<F>(f), lo, hi, opt).x;
}

}  // namespace dcdr::numerics
