#include "iobs/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "iobs/milp.hpp"

namespace iobs {

std::vector<Safety> check_box_safety(const IntervalVectorXd& box,
                                     const Eigen::VectorXd& lower,
                                     const Eigen::VectorXd& upper) {
  if (lower.size() != box.size() || upper.size() != box.size())
    throw invalid_input("check_box_safety: dimension mismatch");
  std::vector<Safety> out(static_cast<std::size_t>(box.size()));
  for (Eigen::Index i = 0; i < box.size(); ++i) {
    if (std::isinf(lower[i]) && lower[i] < 0 && std::isinf(upper[i]) &&
        upper[i] > 0) {
      out[static_cast<std::size_t>(i)] = Safety::Unspecified;
    } else if (box.lower()[i] >= lower[i] && box.upper()[i] <= upper[i]) {
      out[static_cast<std::size_t>(i)] = Safety::Safe;
    } else {
      out[static_cast<std::size_t>(i)] = Safety::Undefined;
    }
  }
  return out;
}

Eigen::VectorXd measured_output(const SystemModel& model,
                                const Eigen::VectorXd& x,
                                const Eigen::VectorXd& v) {
  if (x.size() != model.n() || v.size() != model.p())
    throw invalid_input("measured_output: dimension mismatch");
  return model.C * x + v;
}

IntervalVectorXd nn_input_box(const SystemModel& model,
                              const IntervalVectorXd& state_box,
                              const IntervalVectorXd& v_box,
                              const Eigen::VectorXd& r) {
  if (state_box.size() != model.n() || v_box.size() != model.p())
    throw invalid_input("nn_input_box: dimension mismatch");
  auto y_box = propagate_affine(model.C, state_box) + v_box;
  auto yo_box = propagate_affine(model.C_o, y_box);
  return IntervalVectorXd::degenerate(r).concatenated(yo_box);
}

ObserverState observer_step(const ObserverCertificate& cert,
                            const SystemModel& model,
                            const ObserverState& state,
                            const Eigen::VectorXd& y,
                            const IntervalVectorXd& f_box,
                            const IntervalVectorXd& g_box,
                            const IntervalVectorXd& w_box,
                            const IntervalVectorXd& v_box) {
  if (state.box.size() != model.n() || y.size() != model.p() ||
      f_box.size() != model.m() || g_box.size() != model.s() ||
      w_box.size() != model.n() || v_box.size() != model.p())
    throw invalid_input("observer_step: dimension mismatch");

  Eigen::MatrixXd A_o = model.A - cert.L_o * model.C;
  if (A_o.minCoeff() < -1e-6)
    throw invalid_input(
        "observer_step: gain does not keep the closed matrix nonnegative");

  auto sa = split_matrix(A_o);
  auto sb = split_matrix(model.B);
  auto sf = split_matrix(model.F);
  const Eigen::VectorXd common = cert.L_o * y;

  Eigen::VectorXd up = sa.pos * state.box.upper() - sa.neg * state.box.lower() +
                       sb.pos * f_box.upper() - sb.neg * f_box.lower() +
                       sf.pos * g_box.upper() - sf.neg * g_box.lower() +
                       common - cert.L_o_pos * v_box.lower() +
                       cert.L_o_neg * v_box.upper() + w_box.upper();
  Eigen::VectorXd lo = sa.pos * state.box.lower() - sa.neg * state.box.upper() +
                       sb.pos * f_box.lower() - sb.neg * f_box.upper() +
                       sf.pos * g_box.lower() - sf.neg * g_box.upper() +
                       common - cert.L_o_pos * v_box.upper() +
                       cert.L_o_neg * v_box.lower() + w_box.lower();

  if ((up - lo).minCoeff() < -1e-9)
    throw internal_error("observer_step: bounds crossed");
  return ObserverState{IntervalVectorXd(lo, up), state.step + 1};
}

IntervalVectorXd predict_output_box(const SystemModel& model,
                                    const IntervalVectorXd& next_state_box,
                                    const IntervalVectorXd& v_box) {
  if (next_state_box.size() != model.n() || v_box.size() != model.p())
    throw invalid_input("predict_output_box: dimension mismatch");
  return propagate_affine(model.C, next_state_box) + v_box;
}

std::vector<bool> detect_actuator_fault(const Eigen::VectorXd& u_applied,
                                        const IntervalVectorXd& f_box) {
  if (u_applied.size() != f_box.size())
    throw invalid_input("detect_actuator_fault: dimension mismatch");
  std::vector<bool> out(static_cast<std::size_t>(u_applied.size()));
  for (Eigen::Index i = 0; i < u_applied.size(); ++i)
    out[static_cast<std::size_t>(i)] =
        u_applied[i] < f_box.lower()[i] || u_applied[i] > f_box.upper()[i];
  return out;
}

std::vector<bool> detect_output_fault(const Eigen::VectorXd& y_o_now,
                                      const IntervalVectorXd& predicted_y_o) {
  if (y_o_now.size() != predicted_y_o.size())
    throw invalid_input("detect_output_fault: dimension mismatch");
  std::vector<bool> out(static_cast<std::size_t>(y_o_now.size()));
  for (Eigen::Index i = 0; i < y_o_now.size(); ++i)
    out[static_cast<std::size_t>(i)] = y_o_now[i] < predicted_y_o.lower()[i] ||
                                       y_o_now[i] > predicted_y_o.upper()[i];
  return out;
}

Eigen::VectorXd plant_step(
    const SystemModel& model, const Eigen::VectorXd& x,
    const Eigen::VectorXd& u, const Eigen::VectorXd& w,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g) {
  if (x.size() != model.n() || u.size() != model.m() || w.size() != model.n())
    throw invalid_input("plant_step: dimension mismatch");
  Eigen::VectorXd next = model.A * x + model.B * u + w;
  if (model.s() > 0) {
    if (!g) throw invalid_input("plant_step: nonlinearity missing");
    Eigen::VectorXd gx = g(x);
    if (gx.size() != model.s())
      throw invalid_input("plant_step: nonlinearity dimension mismatch");
    next += model.F * gx;
  }
  return next;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> apply_faults(
    const FaultProfile& profile, const Eigen::VectorXd& u_nominal,
    const Eigen::VectorXd& y_nominal, long t) {
  Eigen::VectorXd u = u_nominal;
  Eigen::VectorXd y = y_nominal;
  if (profile.actuator) {
    Eigen::VectorXd fa = profile.actuator(t);
    if (fa.size() != u.size())
      throw invalid_input("apply_faults: actuator dimension mismatch");
    u += fa;
  }
  if (profile.sensor) {
    Eigen::VectorXd fs = profile.sensor(t);
    if (profile.F_s.rows() != y.size() || profile.F_s.cols() != fs.size())
      throw invalid_input("apply_faults: sensor dimension mismatch");
    y += profile.F_s * fs;
  }
  return {u, y};
}

NnBoundResult nn_interval(const FeedforwardNetworkXd& net,
                          const IntervalVectorXd& input,
                          BoundingMethod method, long node_budget) {
  NnBoundResult out;
  const auto start = std::chrono::steady_clock::now();
  if (method == BoundingMethod::Auxiliary) {
    out.box = an_bounds(net, input);
  } else {
    auto report = output_interval_report(net, input, node_budget);
    for (const auto& d : report.details) {
      if (d.status == BoundStatus::IterationLimit)
        throw budget_exhausted("nn_interval: node budget exhausted");
      if (d.status == BoundStatus::Infeasible)
        throw internal_error("nn_interval: encoding reported infeasible");
    }
    out.box = report.box;
    out.nodes = report.total_nodes;
  }
  out.micros = std::chrono::duration<double, std::micro>(
                   std::chrono::steady_clock::now() - start)
                   .count();
  return out;
}

}  // namespace iobs
