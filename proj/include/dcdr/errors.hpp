#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dcdr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The energy-space equality cannot be met inside the per-location box.
class InfeasibleSlot : public Error {
 public:
  using Error::Error;
};

/// A function was called with arguments outside its documented domain.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Bisection could not find a sign change.
class BracketError : public Error {
 public:
  using Error::Error;
};

/// The restricted benchmark has no feasible point (the exact problem may).
class RestrictedInfeasible : public Error {
 public:
  using Error::Error;
};

/// No billing reference vector induces a price-feasible best response.
class ExactInfeasible : public Error {
 public:
  using Error::Error;
};

/// A convex subproblem hit its iteration cap or returned garbage.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// A branch-and-bound incumbent failed the post-solve consistency check.
class VerificationError : public Error {
 public:
  VerificationError(const std::string& what, double violation)
      : Error(what), violation_(violation) {}
  double violation() const noexcept { return violation_; }

 private:
  double violation_;
};

/// A scenario or manifest file is unreadable or malformed.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Scenario data violates one or more invariants; all of them are collected.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "scenario validation failed (" + std::to_string(v.size()) + " violation(s))";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

}  // namespace dcdr
