#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace iobs {

// Linear objective over the intersection of one semidefinite cone and a
// set of affine nonnegativity rows:
//
//   min  cost . y
//   s.t. psd_constant + sum_i y_i psd_coeff[i]  is PSD
//        row_coeff y + row_constant >= 0        (elementwise)
//
// Solved with a log-barrier path-following method; an infeasible start is
// handled by a slack-augmented first phase minimizing the amount by which
// both cones must be inflated.

struct ConicProgram {
  Eigen::VectorXd cost;
  Eigen::MatrixXd psd_constant;            // d x d, symmetric
  std::vector<Eigen::MatrixXd> psd_coeff;  // one d x d symmetric per variable
  Eigen::MatrixXd row_coeff;               // r x k (r may be 0)
  Eigen::VectorXd row_constant;

  int num_vars() const { return static_cast<int>(cost.size()); }
};

struct ConicSettings {
  double gap_tol = 1e-7;     // stop when (barrier terms) / t below this
  double t0 = 1.0;
  double mu = 10.0;          // outer path multiplier
  int max_newton = 20000;    // total Newton iterations across both phases
  int max_center = 200;      // Newton iterations per centering
  // Phase 1 stops as soon as the inflation slack is at least this deep
  // inside the cone.
  double phase1_target = -1e-3;
  // Half-width of the phase-1 bounding box. The feasibility subproblems
  // are scale-free without it (growing every variable only gains
  // log-det); a program whose feasible points all need entries beyond
  // this may be misjudged infeasible, so raise it in that case.
  double phase1_box = 1e4;
};

struct ConicSolution {
  bool feasible = false;
  Eigen::VectorXd y;
  double objective = 0.0;
  int newton_iters = 0;
  double infeasibility = 0.0;  // best slack when infeasible
};

ConicSolution solve_conic(const ConicProgram& prog,
                          const ConicSettings& settings = {});

// Strict interior test used by the solver and by tests: smallest PSD
// eigenvalue and smallest row value at y.
double psd_min_eigenvalue(const ConicProgram& prog, const Eigen::VectorXd& y);

}  // namespace iobs
