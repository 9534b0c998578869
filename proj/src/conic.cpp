#include "iobs/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iobs/errors.hpp"
#include "iobs/log.hpp"

namespace iobs {

namespace {

Eigen::MatrixXd assemble(const ConicProgram& prog, const Eigen::VectorXd& y) {
  Eigen::MatrixXd m = prog.psd_constant;
  for (int i = 0; i < prog.num_vars(); ++i)
    if (y[i] != 0.0) m += y[i] * prog.psd_coeff[static_cast<std::size_t>(i)];
  return m;
}

struct BarrierState {
  Eigen::MatrixXd m;       // assembled PSD matrix
  Eigen::MatrixXd m_inv;
  Eigen::VectorXd rows;    // g = row_coeff y + row_constant
  double logdet = 0.0;
  bool interior = false;
};

BarrierState evaluate(const ConicProgram& prog, const Eigen::VectorXd& y) {
  BarrierState s;
  s.m = assemble(prog, y);
  if (prog.row_coeff.rows() > 0)
    s.rows = prog.row_coeff * y + prog.row_constant;
  else
    s.rows = Eigen::VectorXd();
  if (s.rows.size() > 0 && s.rows.minCoeff() <= 0.0) return s;

  Eigen::LLT<Eigen::MatrixXd> llt(s.m);
  if (llt.info() != Eigen::Success) return s;
  const Eigen::MatrixXd l = llt.matrixL();
  double ld = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (l(i, i) <= 0.0) return s;
    ld += std::log(l(i, i));
  }
  s.logdet = 2.0 * ld;
  s.m_inv = llt.solve(Eigen::MatrixXd::Identity(s.m.rows(), s.m.cols()));
  s.interior = true;
  return s;
}

double barrier_value(const BarrierState& s) {
  double v = -s.logdet;
  for (Eigen::Index j = 0; j < s.rows.size(); ++j) v -= std::log(s.rows[j]);
  return v;
}

// How well a centering run finished. Duality-gap certificates are valid
// only at Strict points; Loose (a stall inside the quadratic-convergence
// regime) is good enough to accept an objective value.
enum class Centering { None, Loose, Strict };

// Minimizes t * cost . y + barrier(y) from a strictly interior start.
// Returns the final iterate; `iters` accumulates Newton steps.
Eigen::VectorXd center(const ConicProgram& prog, Eigen::VectorXd y, double t,
                       int max_newton, int& iters, Centering& quality) {
  const int k = prog.num_vars();
  const int d = static_cast<int>(prog.psd_constant.rows());
  quality = Centering::None;

  BarrierState state = evaluate(prog, y);
  if (!state.interior) throw internal_error("centering started off the interior");

  for (int it = 0; it < max_newton; ++it) {
    // A_i = M^-1 * coeff_i feeds both gradient and Hessian.
    std::vector<Eigen::MatrixXd> a(static_cast<std::size_t>(k));
    Eigen::VectorXd grad = t * prog.cost;
    for (int i = 0; i < k; ++i) {
      a[static_cast<std::size_t>(i)] =
          state.m_inv * prog.psd_coeff[static_cast<std::size_t>(i)];
      grad[i] -= a[static_cast<std::size_t>(i)].trace();
    }
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = i; j < k; ++j) {
        const double v = a[static_cast<std::size_t>(i)]
                             .cwiseProduct(a[static_cast<std::size_t>(j)].transpose())
                             .sum();
        hess(i, j) = v;
        hess(j, i) = v;
      }
    for (Eigen::Index r = 0; r < state.rows.size(); ++r) {
      const Eigen::VectorXd arow = prog.row_coeff.row(r).transpose();
      grad -= arow / state.rows[r];
      hess += (arow * arow.transpose()) / (state.rows[r] * state.rows[r]);
    }

    Eigen::VectorXd step;
    double reg = 0.0;
    while (true) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(
          hess + reg * Eigen::MatrixXd::Identity(k, k));
      step = ldlt.solve(-grad);
      if (ldlt.info() == Eigen::Success && step.allFinite()) break;
      reg = reg == 0.0 ? 1e-10 : reg * 100;
      if (reg > 1e6) throw solver_failure("Newton system unsolvable");
    }

    const double decrement = -grad.dot(step);
    if (!std::isfinite(decrement)) break;
    if (decrement < 1e-9) {
      // Negative means the Newton solve was dominated by rounding noise.
      if (decrement >= 0.0) quality = Centering::Strict;
      break;
    }

    const double f0 = t * prog.cost.dot(y) + barrier_value(state);
    double s = 1.0;
    bool moved = false;
    while (s > 1e-14) {
      Eigen::VectorXd y_try = y + s * step;
      BarrierState trial = evaluate(prog, y_try);
      if (trial.interior) {
        const double f1 = t * prog.cost.dot(y_try) + barrier_value(trial);
        if (f1 <= f0 - 0.25 * s * decrement) {
          y = std::move(y_try);
          state = std::move(trial);
          moved = true;
          break;
        }
      }
      s *= 0.5;
    }
    ++iters;
    if (!moved) {
      // Rounding stalls the line search near the optimum at large t; a
      // small decrement there still means the iterate is essentially
      // central.
      if (decrement < 1e-2) quality = Centering::Loose;
      break;
    }
    (void)d;
  }
  return y;
}

}  // namespace

double psd_min_eigenvalue(const ConicProgram& prog, const Eigen::VectorXd& y) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(assemble(prog, y),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

ConicSolution solve_conic(const ConicProgram& prog,
                          const ConicSettings& settings) {
  const int k = prog.num_vars();
  if (static_cast<int>(prog.psd_coeff.size()) != k)
    throw invalid_input("conic program: coefficient count mismatch");
  const Eigen::Index d = prog.psd_constant.rows();
  if (prog.psd_constant.cols() != d)
    throw invalid_input("conic program: PSD block not square");
  for (const auto& m : prog.psd_coeff)
    if (m.rows() != d || m.cols() != d)
      throw invalid_input("conic program: PSD coefficient shape mismatch");
  if (prog.row_coeff.rows() != prog.row_constant.size())
    throw invalid_input("conic program: row shape mismatch");
  if (prog.row_coeff.rows() > 0 && prog.row_coeff.cols() != k)
    throw invalid_input("conic program: row width mismatch");

  ConicSolution sol;

  // Feasibility phase: inflate both cones by a shared slack and drive it
  // negative. Boxing the variables keeps the centering subproblems
  // bounded (they are scale-free otherwise), and a floor just under the
  // exit target keeps the slack from diving off to -infinity once the
  // interior opens up.
  Eigen::VectorXd y_aug = Eigen::VectorXd::Zero(k + 1);
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prog.psd_constant,
                                                      Eigen::EigenvaluesOnly);
    double need = -es.eigenvalues().minCoeff();
    if (prog.row_constant.size() > 0)
      need = std::max(need, -prog.row_constant.minCoeff());
    y_aug[k] = std::max(need, 0.0) + 1.0;
  }
  const double box = std::max(settings.phase1_box, 10.0 * y_aug[k]);

  ConicProgram aug;
  aug.cost = Eigen::VectorXd::Zero(k + 1);
  aug.cost[k] = 1.0;
  aug.psd_constant = prog.psd_constant;
  aug.psd_coeff = prog.psd_coeff;
  aug.psd_coeff.push_back(Eigen::MatrixXd::Identity(d, d));
  const Eigen::Index r = prog.row_coeff.rows();
  aug.row_coeff = Eigen::MatrixXd::Zero(r + 2 * (k + 1) + 1, k + 1);
  aug.row_constant = Eigen::VectorXd::Constant(r + 2 * (k + 1) + 1, box);
  if (r > 0) {
    aug.row_coeff.topRows(r).leftCols(k) = prog.row_coeff;
    aug.row_coeff.topRows(r).col(k).setOnes();
    aug.row_constant.head(r) = prog.row_constant;
  }
  for (int i = 0; i <= k; ++i) {
    aug.row_coeff(r + 2 * i, i) = -1.0;     // box - y_i >= 0
    aug.row_coeff(r + 2 * i + 1, i) = 1.0;  // box + y_i >= 0
  }
  aug.row_coeff(r + 2 * (k + 1), k) = 1.0;  // slack floor
  aug.row_constant[r + 2 * (k + 1)] = -2.0 * settings.phase1_target;

  const double terms1 = static_cast<double>(aug.row_coeff.rows()) +
                        static_cast<double>(d);
  int iters = 0;
  bool infeasible = false;
  {
    double t = settings.t0;
    double prev_slack = std::numeric_limits<double>::infinity();
    while (true) {
      Centering quality = Centering::None;
      y_aug = center(aug, y_aug, t,
                     std::min(settings.max_center, settings.max_newton - iters),
                     iters, quality);
      const double slack = y_aug[k];
      const double gap = terms1 / t;
      log_debug("conic feasibility: t %.3e slack %.9g quality %d newton %d",
                t, slack, static_cast<int>(quality), iters);
      if (slack <= settings.phase1_target) break;
      if (quality == Centering::Strict) {
        // slack - gap lower-bounds the least achievable slack, with a
        // modest inflation covering the residual decentering.
        if (slack - 1.05 * gap > 1e-6) {
          infeasible = true;
          break;
        }
        if (gap < settings.gap_tol) {
          infeasible = slack >= -1e-9;
          break;
        }
      } else if (gap < settings.gap_tol ||
                 (quality == Centering::None && slack == prev_slack)) {
        throw solver_failure("feasibility phase failed to center");
      }
      if (iters >= settings.max_newton)
        throw solver_failure("interior-point iteration limit");
      prev_slack = slack;
      t *= settings.mu;
    }
  }
  if (infeasible) {
    sol.feasible = false;
    sol.infeasibility = y_aug[k];
    sol.newton_iters = iters;
    return sol;
  }

  Eigen::VectorXd y = y_aug.head(k);
  {
    BarrierState check = evaluate(prog, y);
    if (!check.interior)
      throw internal_error("feasibility phase returned a boundary point");
  }

  {
    const double terms2 = static_cast<double>(d + r);
    double t = settings.t0;
    Eigen::VectorXd best_y;
    double best_gap = std::numeric_limits<double>::infinity();
    while (true) {
      Centering quality = Centering::None;
      y = center(prog, y, t,
                 std::min(settings.max_center, settings.max_newton - iters),
                 iters, quality);
      log_debug("conic path: t %.3e cost %.9g quality %d newton %d", t,
                prog.cost.dot(y), static_cast<int>(quality), iters);
      if (quality != Centering::None) {
        best_y = y;
        best_gap = terms2 / t;
      }
      if (terms2 / t < settings.gap_tol) {
        if (quality != Centering::None) break;
        // Rounding can defeat the final centerings; a centered iterate
        // from a slightly earlier stage is still certified, just wider.
        if (best_gap <= 100.0 * settings.gap_tol) {
          y = best_y;
          log_debug("conic path: accepting centered iterate at gap %.3e",
                    best_gap);
          break;
        }
        throw solver_failure("optimality phase failed to center");
      }
      if (iters >= settings.max_newton)
        throw solver_failure("interior-point iteration limit");
      t *= settings.mu;
    }
  }
  sol.feasible = true;
  sol.y = y;
  sol.objective = prog.cost.dot(y);
  sol.newton_iters = iters;
  return sol;
}

}  // namespace iobs
