#include "iobs/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iobs/errors.hpp"

namespace iobs {

namespace {

constexpr double kDomainTol = 1e-9;

// Pieces whose validity interval touches x (closure semantics).
template <typename Fold>
double fold_pieces_at(const std::vector<LinearPiece>& pieces, double x,
                      double init, Fold fold) {
  double acc = init;
  bool hit = false;
  for (const LinearPiece& p : pieces) {
    if (x < p.lo || x > p.hi) continue;
    acc = fold(acc, p.at(x));
    hit = true;
  }
  if (!hit) throw internal_error("envelope query outside piece cover");
  return acc;
}

std::vector<LinearPiece> clip_pieces(const std::vector<LinearPiece>& pieces,
                                     double bound, bool is_floor) {
  std::vector<LinearPiece> out;
  out.reserve(pieces.size());
  for (const LinearPiece& p : pieces) {
    const double va = p.at(p.lo), vb = p.at(p.hi);
    const bool a_clipped = is_floor ? va < bound : va > bound;
    const bool b_clipped = is_floor ? vb < bound : vb > bound;
    if (!a_clipped && !b_clipped) {
      out.push_back(p);
      continue;
    }
    if (a_clipped && b_clipped) {
      out.push_back({0.0, bound, p.lo, p.hi});
      continue;
    }
    // One end crosses: split at the intersection into an exact pair.
    const double cross = (bound - p.intercept) / p.slope;
    LinearPiece flat{0.0, bound, p.lo, p.hi};
    LinearPiece kept = p;
    if (a_clipped) {
      flat.hi = cross;
      kept.lo = cross;
    } else {
      flat.lo = cross;
      kept.hi = cross;
    }
    if (a_clipped) {
      out.push_back(flat);
      out.push_back(kept);
    } else {
      out.push_back(kept);
      out.push_back(flat);
    }
  }
  return out;
}

}  // namespace

double ElementaryEnvelope::lower_at(double x) const {
  return fold_pieces_at(lower_pieces, x,
                        std::numeric_limits<double>::infinity(),
                        [](double a, double b) { return std::min(a, b); });
}

double ElementaryEnvelope::upper_at(double x) const {
  return fold_pieces_at(upper_pieces, x,
                        -std::numeric_limits<double>::infinity(),
                        [](double a, double b) { return std::max(a, b); });
}

ElementaryFunction square_function() {
  ElementaryFunction f;
  f.eval = [](double x) { return x * x; };
  f.derivative = [](double x) { return 2 * x; };
  f.curvature_sign = [](double, double) {
    return std::optional<Curvature>(Curvature::Convex);
  };
  f.monotone_on = {0.0, std::numeric_limits<double>::infinity()};
  f.prior_floor = 0.0;
  return f;
}

ElementaryFunction linear_function(double slope, double intercept) {
  ElementaryFunction f;
  f.eval = [=](double x) { return slope * x + intercept; };
  f.derivative = [=](double) { return slope; };
  f.curvature_sign = [](double, double) {
    return std::optional<Curvature>(Curvature::Convex);  // zero curvature
  };
  if (slope >= 0)
    f.monotone_on = {-std::numeric_limits<double>::infinity(),
                     std::numeric_limits<double>::infinity()};
  return f;
}

ElementaryEnvelope build_envelope(const ElementaryFunction& f, double domain_lo,
                                  double domain_hi, int h) {
  if (!f.eval || !f.derivative || !f.curvature_sign)
    throw invalid_input("build_envelope: function is missing callbacks");
  if (!(domain_lo < domain_hi))
    throw invalid_input("build_envelope: empty domain");
  if (h < 0) throw invalid_input("build_envelope: negative breakpoint count");

  std::vector<double> points;
  points.push_back(domain_lo);
  for (int k = 1; k <= h; ++k)
    points.push_back(domain_lo + (domain_hi - domain_lo) * k / (h + 1));
  points.push_back(domain_hi);
  for (double p : f.inflections)
    if (p > domain_lo && p < domain_hi) points.push_back(p);
  std::sort(points.begin(), points.end());
  const double merge_tol = 1e-12 * (domain_hi - domain_lo);
  points.erase(std::unique(points.begin(), points.end(),
                           [&](double a, double b) { return b - a <= merge_tol; }),
               points.end());
  if (points.back() != domain_hi) points.back() = domain_hi;

  ElementaryEnvelope env;
  env.domain_lo = domain_lo;
  env.domain_hi = domain_hi;
  env.monotone_on = f.monotone_on;
  env.breakpoints.assign(points.begin() + 1, points.end() - 1);

  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double a = points[i], b = points[i + 1];
    const auto curv = f.curvature_sign(a, b);
    if (!curv)
      throw invalid_input("build_envelope: curvature undeclared on a cell");
    const double fa = f.eval(a), fb = f.eval(b);
    LinearPiece secant;
    secant.slope = (fb - fa) / (b - a);
    secant.intercept = fa - secant.slope * a;
    secant.lo = a;
    secant.hi = b;
    const double m = 0.5 * (a + b);
    LinearPiece tangent;
    tangent.slope = f.derivative(m);
    tangent.intercept = f.eval(m) - tangent.slope * m;
    tangent.lo = a;
    tangent.hi = b;
    if (*curv == Curvature::Convex) {
      env.upper_pieces.push_back(secant);
      env.lower_pieces.push_back(tangent);
    } else {
      env.upper_pieces.push_back(tangent);
      env.lower_pieces.push_back(secant);
    }
  }
  return env;
}

ElementaryEnvelope refine_with_prior(const ElementaryEnvelope& env,
                                     std::optional<double> floor,
                                     std::optional<double> ceiling) {
  ElementaryEnvelope out = env;
  if (floor) out.lower_pieces = clip_pieces(env.lower_pieces, *floor, true);
  if (ceiling) out.upper_pieces = clip_pieces(env.upper_pieces, *ceiling, false);
  return out;
}

ScalarRange runtime_interval_general(const ElementaryEnvelope& env,
                                     double box_lo, double box_hi) {
  if (box_lo > box_hi)
    throw invalid_input("runtime_interval_general: inverted box");
  if (box_lo < env.domain_lo - kDomainTol || box_hi > env.domain_hi + kDomainTol)
    throw domain_escape("state box left the envelope domain");
  const double lo = std::max(box_lo, env.domain_lo);
  const double hi = std::min(box_hi, env.domain_hi);

  ScalarRange r{std::numeric_limits<double>::infinity(),
                -std::numeric_limits<double>::infinity()};
  for (const LinearPiece& p : env.lower_pieces) {
    const double a = std::max(p.lo, lo), b = std::min(p.hi, hi);
    if (a > b) continue;
    r.lo = std::min(r.lo, std::min(p.at(a), p.at(b)));
  }
  for (const LinearPiece& p : env.upper_pieces) {
    const double a = std::max(p.lo, lo), b = std::min(p.hi, hi);
    if (a > b) continue;
    r.hi = std::max(r.hi, std::max(p.at(a), p.at(b)));
  }
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi))
    throw internal_error("envelope pieces do not cover the query box");
  return r;
}

ScalarRange runtime_interval_monotonic(const ElementaryEnvelope& env,
                                       double box_lo, double box_hi) {
  if (box_lo > box_hi)
    throw invalid_input("runtime_interval_monotonic: inverted box");
  if (!env.monotone_on)
    throw invalid_input("runtime_interval_monotonic: no declared monotone range");
  if (box_lo < env.monotone_on->first - kDomainTol ||
      box_hi > env.monotone_on->second + kDomainTol)
    throw invalid_input("runtime_interval_monotonic: box not in monotone range");
  if (box_lo < env.domain_lo - kDomainTol || box_hi > env.domain_hi + kDomainTol)
    throw domain_escape("state box left the envelope domain");
  const double lo = std::max(box_lo, env.domain_lo);
  const double hi = std::min(box_hi, env.domain_hi);
  ScalarRange r;
  r.lo = std::min(env.lower_at(lo), env.upper_at(lo));
  r.hi = std::max(env.lower_at(hi), env.upper_at(hi));
  return r;
}

IntervalVectorXd nonlinear_interval(const std::vector<EnvelopeBinding>& bindings,
                                    const IntervalVectorXd& state_box) {
  Eigen::VectorXd lo(static_cast<Eigen::Index>(bindings.size()));
  Eigen::VectorXd hi(static_cast<Eigen::Index>(bindings.size()));
  for (std::size_t i = 0; i < bindings.size(); ++i) {
    const EnvelopeBinding& b = bindings[i];
    if (b.state_index < 0 || b.state_index >= state_box.size())
      throw invalid_input("nonlinear_interval: state index out of range");
    const double xl = state_box.lower()[b.state_index];
    const double xu = state_box.upper()[b.state_index];
    const ScalarRange r = b.monotonic_shortcut
                              ? runtime_interval_monotonic(b.env, xl, xu)
                              : runtime_interval_general(b.env, xl, xu);
    lo[static_cast<Eigen::Index>(i)] = r.lo;
    hi[static_cast<Eigen::Index>(i)] = r.hi;
  }
  return IntervalVectorXd(lo, hi);
}

}  // namespace iobs
