#include "iobs/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace iobs {
namespace detail {

namespace {
constexpr double kPivotTol = 1e-10;
constexpr double kDegenerateStep = 1e-12;
constexpr int kBlandTrigger = 12;
constexpr int kRefactorPeriod = 64;
}  // namespace

double BoundedSimplex::objective_of(const Eigen::VectorXd& cost) const {
  return cost.dot(x_);
}

void BoundedSimplex::refactorize() {
  const int m = static_cast<int>(a_.rows());
  Eigen::MatrixXd basis_mat(m, m);
  for (int i = 0; i < m; ++i) basis_mat.col(i) = a_.col(basis_[static_cast<std::size_t>(i)]);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(basis_mat);
  if (!lu.isInvertible())
    throw solver_failure("simplex basis became singular");
  binv_ = lu.inverse();

  // Re-derive the basic components from the nonbasic values to kill
  // accumulated drift.
  Eigen::VectorXd rhs = b_;
  for (int j = 0; j < static_cast<int>(a_.cols()); ++j) {
    if (state_[static_cast<std::size_t>(j)] == VarState::Basic) continue;
    rhs -= a_.col(j) * x_[j];
  }
  Eigen::VectorXd xb = binv_ * rhs;
  for (int i = 0; i < m; ++i) x_[basis_[static_cast<std::size_t>(i)]] = xb[i];
  pivots_since_refactor_ = 0;
}

BoundedSimplex::StepResult BoundedSimplex::step(const Eigen::VectorXd& cost,
                                                bool bland) {
  const int m = static_cast<int>(a_.rows());
  const int n = static_cast<int>(a_.cols());

  Eigen::VectorXd cb(m);
  for (int i = 0; i < m; ++i) cb[i] = cost[basis_[static_cast<std::size_t>(i)]];
  const Eigen::VectorXd y = binv_.transpose() * cb;

  int entering = -1;
  double best_violation = kLpFeasTol;
  for (int j = 0; j < n; ++j) {
    const VarState st = state_[static_cast<std::size_t>(j)];
    if (st == VarState::Basic) continue;
    if (lo_[j] == hi_[j]) continue;  // pinned, can never improve
    const double reduced = cost[j] - y.dot(a_.col(j));
    double violation = 0.0;
    if (st == VarState::AtLower && reduced < -kLpFeasTol) violation = -reduced;
    if (st == VarState::AtUpper && reduced > kLpFeasTol) violation = reduced;
    if (violation <= 0.0) continue;
    if (bland) {
      entering = j;
      break;
    }
    if (violation > best_violation) {
      best_violation = violation;
      entering = j;
    }
  }
  if (entering < 0) return StepResult::Optimal;

  const double dir =
      state_[static_cast<std::size_t>(entering)] == VarState::AtLower ? 1.0 : -1.0;
  const Eigen::VectorXd w = binv_ * a_.col(entering);

  // x_basic(t) = x_basic + t * delta, entering moves by dir * t.
  const Eigen::VectorXd delta = -dir * w;

  double t_limit = hi_[entering] - lo_[entering];  // bound flip distance
  int leaving = -1;
  double leaving_delta = 0.0;
  for (int i = 0; i < m; ++i) {
    const int v = basis_[static_cast<std::size_t>(i)];
    double cand;
    if (delta[i] > kPivotTol) {
      if (hi_[v] == kLpInf) continue;
      cand = (hi_[v] - x_[v]) / delta[i];
    } else if (delta[i] < -kPivotTol) {
      if (lo_[v] == -kLpInf) continue;
      cand = (lo_[v] - x_[v]) / delta[i];
    } else {
      continue;
    }
    cand = std::max(cand, 0.0);
    bool take = false;
    if (cand < t_limit - kDegenerateStep) {
      take = true;
    } else if (cand < t_limit + kDegenerateStep && leaving >= 0) {
      // Tie. Bland mode keeps the lowest variable index so cycling
      // terminates; otherwise prefer the better-conditioned pivot.
      if (bland)
        take = v < basis_[static_cast<std::size_t>(leaving)];
      else
        take = std::abs(delta[i]) > std::abs(leaving_delta);
    }
    if (take) {
      t_limit = cand;
      leaving = i;
      leaving_delta = delta[i];
    }
  }

  if (t_limit == kLpInf) return StepResult::Unbounded;
  const double t = std::max(t_limit, 0.0);

  x_[entering] += dir * t;
  for (int i = 0; i < m; ++i) x_[basis_[static_cast<std::size_t>(i)]] += t * delta[i];

  if (leaving < 0) {
    // The entering variable ran all the way to its opposite bound.
    state_[static_cast<std::size_t>(entering)] =
        dir > 0 ? VarState::AtUpper : VarState::AtLower;
    x_[entering] = dir > 0 ? hi_[entering] : lo_[entering];
  } else {
    const int leaving_var = basis_[static_cast<std::size_t>(leaving)];
    if (leaving_delta > 0) {
      state_[static_cast<std::size_t>(leaving_var)] = VarState::AtUpper;
      x_[leaving_var] = hi_[leaving_var];
    } else {
      state_[static_cast<std::size_t>(leaving_var)] = VarState::AtLower;
      x_[leaving_var] = lo_[leaving_var];
    }
    state_[static_cast<std::size_t>(entering)] = VarState::Basic;
    basis_[static_cast<std::size_t>(leaving)] = entering;

    const double wr = w[leaving];
    if (std::abs(wr) < kPivotTol) throw solver_failure("degenerate simplex pivot");
    binv_.row(leaving) /= wr;
    for (int i = 0; i < m; ++i) {
      if (i == leaving) continue;
      binv_.row(i) -= w[i] * binv_.row(leaving);
    }
    if (++pivots_since_refactor_ >= kRefactorPeriod) refactorize();
  }

  degenerate_streak_ = t <= kDegenerateStep ? degenerate_streak_ + 1 : 0;
  return StepResult::Pivoted;
}

LpResult BoundedSimplex::run() {
  const int m = static_cast<int>(a_.rows());
  const int n = static_cast<int>(a_.cols());

  for (int j = 0; j < n; ++j) {
    if (lo_[j] > hi_[j]) return {LpStatus::Infeasible, 0.0, {}};
    if (lo_[j] == -kLpInf && hi_[j] == kLpInf)
      throw internal_error("free variables are not supported");
  }

  // Start every structural variable at a finite bound; artificials take
  // whatever residual is left so the initial basis is the identity.
  const int total = n + m;
  x_ = Eigen::VectorXd::Zero(total);
  state_.assign(static_cast<std::size_t>(total), VarState::AtLower);
  for (int j = 0; j < n; ++j) {
    if (lo_[j] != -kLpInf) {
      x_[j] = lo_[j];
      state_[static_cast<std::size_t>(j)] = VarState::AtLower;
    } else {
      x_[j] = hi_[j];
      state_[static_cast<std::size_t>(j)] = VarState::AtUpper;
    }
  }

  Eigen::VectorXd residual = b_;
  for (int j = 0; j < n; ++j) residual -= a_.col(j) * x_[j];

  Eigen::MatrixXd a2(m, total);
  a2.leftCols(n) = a_;
  a2.rightCols(m).setZero();
  Eigen::VectorXd lo2(total), hi2(total);
  lo2.head(n) = lo_;
  hi2.head(n) = hi_;
  basis_.resize(static_cast<std::size_t>(m));
  binv_ = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const double sign = residual[i] >= 0 ? 1.0 : -1.0;
    a2(i, n + i) = sign;
    lo2[n + i] = 0.0;
    hi2[n + i] = kLpInf;
    x_[n + i] = std::abs(residual[i]);
    basis_[static_cast<std::size_t>(i)] = n + i;
    state_[static_cast<std::size_t>(n + i)] = VarState::Basic;
    binv_(i, i) = sign;
  }
  a_ = std::move(a2);
  lo_ = std::move(lo2);
  hi_ = std::move(hi2);

  Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(total);
  phase1_cost.tail(m).setOnes();
  Eigen::VectorXd phase2_cost = Eigen::VectorXd::Zero(total);
  phase2_cost.head(n) = c_;

  const int max_iters = 2000 + 200 * total;
  const double feas_tol = 1e-8 * (1.0 + b_.lpNorm<Eigen::Infinity>());

  int iters = 0;
  degenerate_streak_ = 0;
  while (true) {
    if (++iters > max_iters) throw solver_failure("simplex iteration limit (phase 1)");
    const StepResult r = step(phase1_cost, degenerate_streak_ > kBlandTrigger);
    if (r == StepResult::Unbounded)
      throw internal_error("phase 1 objective cannot be unbounded");
    if (r == StepResult::Optimal) break;
  }
  if (objective_of(phase1_cost) > feas_tol) return {LpStatus::Infeasible, 0.0, {}};

  // Pin artificials at zero and optimize the real objective.
  for (int i = 0; i < m; ++i) {
    lo_[n + i] = 0.0;
    hi_[n + i] = 0.0;
    if (state_[static_cast<std::size_t>(n + i)] != VarState::Basic) {
      state_[static_cast<std::size_t>(n + i)] = VarState::AtLower;
      x_[n + i] = 0.0;
    }
  }

  iters = 0;
  degenerate_streak_ = 0;
  while (true) {
    if (++iters > max_iters) throw solver_failure("simplex iteration limit (phase 2)");
    const StepResult r = step(phase2_cost, degenerate_streak_ > kBlandTrigger);
    if (r == StepResult::Unbounded) return {LpStatus::Unbounded, 0.0, {}};
    if (r == StepResult::Optimal) break;
  }

  LpResult out;
  out.status = LpStatus::Optimal;
  out.x = x_.head(n);
  out.objective = c_.dot(out.x);
  return out;
}

}  // namespace detail

LpResult LinearProgram::solve() const {
  const int nstruct = num_variables();
  for (int j = 0; j < nstruct; ++j) {
    const std::size_t k = static_cast<std::size_t>(j);
    if (lo_[k] > hi_[k] + detail::kLpFeasTol) return {LpStatus::Infeasible, 0.0, {}};
  }

  const int m = static_cast<int>(rows_.size());
  if (m == 0) {
    // Pure box problem: each variable sits at whichever bound its cost
    // prefers.
    LpResult out;
    out.x = Eigen::VectorXd::Zero(nstruct);
    for (int j = 0; j < nstruct; ++j) {
      const std::size_t k = static_cast<std::size_t>(j);
      double v;
      if (cost_[k] > 0)
        v = lo_[k];
      else if (cost_[k] < 0)
        v = hi_[k];
      else
        v = lo_[k] != -detail::kLpInf ? lo_[k] : hi_[k];
      if (v == detail::kLpInf || v == -detail::kLpInf)
        return {LpStatus::Unbounded, 0.0, {}};
      out.x[j] = v;
      out.objective += cost_[k] * v;
    }
    out.status = LpStatus::Optimal;
    return out;
  }

  int num_slacks = 0;
  for (const Row& row : rows_)
    if (row.sense != 0) ++num_slacks;

  const int total = nstruct + num_slacks;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, total);
  Eigen::VectorXd b(m), lo(total), hi(total), c = Eigen::VectorXd::Zero(total);
  for (int j = 0; j < nstruct; ++j) {
    const std::size_t k = static_cast<std::size_t>(j);
    lo[j] = lo_[k];
    hi[j] = hi_[k];
    c[j] = cost_[k];
  }

  int slack = nstruct;
  for (int i = 0; i < m; ++i) {
    const Row& row = rows_[static_cast<std::size_t>(i)];
    for (const auto& [var, coeff] : row.coeffs) {
      if (var < 0 || var >= nstruct) throw internal_error("row references unknown variable");
      a(i, var) += coeff;
    }
    b[i] = row.rhs;
    if (row.sense == -1) {  // a'x <= b  =>  a'x + s = b, s >= 0
      a(i, slack) = 1.0;
      lo[slack] = 0.0;
      hi[slack] = detail::kLpInf;
      ++slack;
    } else if (row.sense == 1) {  // a'x >= b  =>  a'x + s = b, s <= 0
      a(i, slack) = 1.0;
      lo[slack] = -detail::kLpInf;
      hi[slack] = 0.0;
      ++slack;
    } else if (row.sense != 0) {
      throw internal_error("row sense must be -1, 0 or +1");
    }
  }

  detail::BoundedSimplex solver(std::move(a), std::move(b),
                                c.head(total).eval(), std::move(lo),
                                std::move(hi));
  LpResult result = solver.run();
  if (result.status == LpStatus::Optimal) {
    result.x.conservativeResize(nstruct);
    result.objective = 0.0;
    for (int j = 0; j < nstruct; ++j)
      result.objective += cost_[static_cast<std::size_t>(j)] * result.x[j];
  }
  return result;
}

}  // namespace iobs
