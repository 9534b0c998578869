#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "iobs/interval.hpp"

namespace iobs {

// Piecewise-linear over/under approximation of scalar nonlinearities,
// built once over a declared physical domain and queried at runtime over
// the current (moving) box.

enum class Curvature { Convex, Concave };

struct ElementaryFunction {
  std::function<double(double)> eval;
  std::function<double(double)> derivative;
  // Single curvature sign of the function on [lo, hi]; nullopt when the
  // interval straddles a region the author did not classify.
  std::function<std::optional<Curvature>(double, double)> curvature_sign;
  std::vector<double> inflections;  // sorted ascending; may be empty
  // Interval on which the function is non-decreasing, when known.
  std::optional<std::pair<double, double>> monotone_on;
  std::optional<double> prior_floor;
  std::optional<double> prior_ceiling;
};

// chi^2: convex everywhere, non-decreasing for chi >= 0, never negative.
ElementaryFunction square_function();

ElementaryFunction linear_function(double slope, double intercept);

struct LinearPiece {
  double slope = 0.0;
  double intercept = 0.0;
  double lo = 0.0;
  double hi = 0.0;  // validity subinterval [lo, hi]
  double at(double x) const { return slope * x + intercept; }
};

struct ScalarRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct ElementaryEnvelope {
  double domain_lo = 0.0;
  double domain_hi = 0.0;
  std::vector<double> breakpoints;  // interior cell boundaries
  std::vector<LinearPiece> upper_pieces;  // sorted, cover the domain
  std::vector<LinearPiece> lower_pieces;
  std::optional<std::pair<double, double>> monotone_on;

  // Closure evaluation: at a junction shared by two pieces the smaller
  // (larger) side is used, so query results vary continuously in the box.
  double lower_at(double x) const;
  double upper_at(double x) const;
};

// Uniform partition into h+1 cells (h interior breakpoints), split further
// at declared inflection points. Convex cells get the secant above and the
// midpoint tangent below; concave cells swap the roles.
ElementaryEnvelope build_envelope(const ElementaryFunction& f, double domain_lo,
                                  double domain_hi, int h);

// Clips lower pieces at `floor` and upper pieces at `ceiling`, splitting a
// piece at the crossing so the result is still exactly piecewise linear.
ElementaryEnvelope refine_with_prior(const ElementaryEnvelope& env,
                                     std::optional<double> floor,
                                     std::optional<double> ceiling);

// Tightest interval of the envelope band over a sub-box of the domain:
// extrema of a per-cell linear function sit at cell ends, so candidate
// evaluation is exact. Boxes outside the domain (beyond 1e-9) raise
// domain_escape.
ScalarRange runtime_interval_general(const ElementaryEnvelope& env,
                                     double box_lo, double box_hi);

// Endpoint shortcut, valid when the function is declared non-decreasing on
// the box: [min of both envelopes at box_lo, max of both at box_hi].
ScalarRange runtime_interval_monotonic(const ElementaryEnvelope& env,
                                       double box_lo, double box_hi);

// One scalar nonlinearity applied to one state component.
struct EnvelopeBinding {
  int state_index = 0;
  ElementaryEnvelope env;
  bool monotonic_shortcut = false;
};

// Stacks the per-element runtime intervals of g(x) over the state box.
IntervalVectorXd nonlinear_interval(const std::vector<EnvelopeBinding>& bindings,
                                    const IntervalVectorXd& state_box);

}  // namespace iobs
