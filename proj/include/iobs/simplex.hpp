#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "iobs/errors.hpp"

namespace iobs {

// Bounded-variable primal simplex for
//   min c'x  s.t.  A x = b,  lo <= x <= hi
// with a two-phase start (artificial variables) and Bland's rule to
// break degenerate ties. Deterministic by construction.
//
// Row senses other than equality are handled by the caller via slack
// variables (see LinearProgram::add_row).

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  Eigen::VectorXd x;
};

class LinearProgram {
 public:
  // Returns the index of a new structural variable.
  int add_variable(double lo, double hi, double cost = 0.0) {
    lo_.push_back(lo);
    hi_.push_back(hi);
    cost_.push_back(cost);
    return static_cast<int>(lo_.size()) - 1;
  }

  void set_cost(int var, double cost) { cost_[static_cast<std::size_t>(var)] = cost; }

  void set_bounds(int var, double lo, double hi) {
    lo_[static_cast<std::size_t>(var)] = lo;
    hi_[static_cast<std::size_t>(var)] = hi;
  }

  // sense: -1 for <=, 0 for ==, +1 for >=. Internally converts to an
  // equality with a bounded slack.
  void add_row(const std::vector<std::pair<int, double>>& coeffs, int sense,
               double rhs) {
    rows_.push_back({coeffs, sense, rhs});
  }

  int num_variables() const { return static_cast<int>(lo_.size()); }
  double lower_bound(int var) const { return lo_[static_cast<std::size_t>(var)]; }
  double upper_bound(int var) const { return hi_[static_cast<std::size_t>(var)]; }

  LpResult solve() const;

 private:
  struct Row {
    std::vector<std::pair<int, double>> coeffs;
    int sense;
    double rhs;
  };
  std::vector<double> lo_, hi_, cost_;
  std::vector<Row> rows_;
};

namespace detail {

constexpr double kLpFeasTol = 1e-9;
constexpr double kLpInf = std::numeric_limits<double>::infinity();

// Dense bounded-variable simplex tableau solver.
class BoundedSimplex {
 public:
  BoundedSimplex(Eigen::MatrixXd a, Eigen::VectorXd b, Eigen::VectorXd c,
                 Eigen::VectorXd lo, Eigen::VectorXd hi)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)),
        lo_(std::move(lo)), hi_(std::move(hi)) {}

  LpResult run();

 private:
  enum class VarState { AtLower, AtUpper, Basic };
  enum class StepResult { Optimal, Pivoted, Unbounded };

  StepResult step(const Eigen::VectorXd& cost, bool bland);
  void refactorize();
  double objective_of(const Eigen::VectorXd& cost) const;

  Eigen::MatrixXd a_;
  Eigen::VectorXd b_, c_, lo_, hi_;
  Eigen::VectorXd x_;
  std::vector<int> basis_;
  std::vector<VarState> state_;
  Eigen::MatrixXd binv_;
  int degenerate_streak_ = 0;
  int pivots_since_refactor_ = 0;
};

}  // namespace detail

}  // namespace iobs
