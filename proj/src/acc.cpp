#include <unsupported/Eigen/MatrixFunctions>

#include "iobs/scenario.hpp"

namespace iobs {

DiscretizedModel discretize(const ContinuousModel& cont, double ts,
                            Discretization method) {
  if (!(ts > 0.0)) throw invalid_input("discretize: ts must be positive");
  const Eigen::Index n = cont.A.rows();
  if (cont.A.cols() != n) throw invalid_input("discretize: A must be square");

  DiscretizedModel out;
  out.model.C = cont.C;
  out.model.C_o = cont.C_o;
  if (method == Discretization::Euler) {
    out.model.A = Eigen::MatrixXd::Identity(n, n) + ts * cont.A;
    out.gamma = ts * Eigen::MatrixXd::Identity(n, n);
  } else {
    // exp of the augmented [[A, I], [0, 0]] block yields the transition
    // matrix and the input integral in one shot.
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = cont.A;
    aug.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd e = (ts * aug).exp();
    out.model.A = e.topLeftCorner(n, n);
    out.gamma = e.topRightCorner(n, n);
  }
  out.model.B = out.gamma * cont.B;
  out.model.F = out.gamma * cont.F;
  return out;
}

AccSystem build_acc_model(const AccParams& params) {
  AccSystem sys;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(6, 6);
  A(0, 1) = 1;
  A(1, 2) = 1;
  A(2, 2) = -2;
  A(3, 4) = 1;
  A(4, 5) = 1;
  A(5, 5) = -2;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(6, 1);
  B(5, 0) = 2;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(6, 2);
  F(2, 0) = -params.mu;
  F(5, 1) = -params.mu;

  // y = [p_e, v_e, h, vtilde] with h = p_l - p_e and vtilde = v_l - v_e.
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(4, 6);
  C(0, 3) = 1;
  C(1, 4) = 1;
  C(2, 0) = 1;
  C(2, 3) = -1;
  C(3, 1) = 1;
  C(3, 4) = -1;
  Eigen::MatrixXd C_o = Eigen::MatrixXd::Zero(3, 4);
  C_o(0, 1) = 1;
  C_o(1, 2) = 1;
  C_o(2, 3) = 1;

  sys.continuous = ContinuousModel{A, B, F, C, C_o};
  sys.reference = Eigen::Vector2d(params.t_gap, params.v_set);

  NonlinearChannelSpec lead;
  lead.state_index = 1;  // v_l^2 drives the lead drag
  NonlinearChannelSpec ego;
  ego.state_index = 4;  // v_e^2 drives the ego drag
  sys.nonlinearities = {lead, ego};
  return sys;
}

double LeadControl::at(double time_s) const {
  if (type == "constant") return value;
  if (type != "piecewise")
    throw config_error("lead control type must be constant or piecewise");
  if (times.size() != values.size() || values.empty())
    throw config_error("piecewise lead control needs matching times/values");
  double u = values.front();
  for (std::size_t i = 0; i < times.size(); ++i)
    if (time_s >= times[i]) u = values[i];
  return u;
}

}  // namespace iobs
