#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "iobs/interval.hpp"
#include "iobs/network.hpp"
#include "iobs/observer.hpp"

namespace iobs {

// How the controller network's output range is bounded each step:
// layerwise interval arithmetic, or the exact mixed-integer solve.
enum class BoundingMethod { Auxiliary, Optimization };

struct ObserverState {
  IntervalVectorXd box;
  long step = 0;
};

// Time-indexed disturbance and measurement-noise boxes.
struct DisturbanceBounds {
  std::function<IntervalVectorXd(long)> w;  // n-dimensional
  std::function<IntervalVectorXd(long)> v;  // p-dimensional
};

// Additive corruptions: u gets actuator(t), y gets F_s * sensor(t).
struct FaultProfile {
  std::function<Eigen::VectorXd(long)> actuator;  // m-dimensional
  Eigen::MatrixXd F_s;                            // p x s_f
  std::function<Eigen::VectorXd(long)> sensor;    // s_f-dimensional

  bool any() const {
    return static_cast<bool>(actuator) || static_cast<bool>(sensor);
  }
};

// Safe ranges may be one-sided or absent per index (+-inf entries).
struct SafetySpec {
  std::function<std::pair<Eigen::VectorXd, Eigen::VectorXd>(long)> state_bounds;
  std::function<std::pair<Eigen::VectorXd, Eigen::VectorXd>(long)> output_bounds;
};

// Safe: the whole box sits inside the range. Undefined: it straddles or
// escapes, so pointwise safety cannot be certified. Unspecified: no
// constraint was given for the index.
enum class Safety { Safe, Undefined, Unspecified };

std::vector<Safety> check_box_safety(const IntervalVectorXd& box,
                                     const Eigen::VectorXd& lower,
                                     const Eigen::VectorXd& upper);

Eigen::VectorXd measured_output(const SystemModel& model,
                                const Eigen::VectorXd& x,
                                const Eigen::VectorXd& v);

// Controller input box [r; y^o box] with y^o = C_o (C x + v) propagated
// through the state box. The reference part has zero width.
IntervalVectorXd nn_input_box(const SystemModel& model,
                              const IntervalVectorXd& state_box,
                              const IntervalVectorXd& v_box,
                              const Eigen::VectorXd& r);

// One interval-observer update. f_box bounds the controller output over
// nn_input_box, g_box bounds the nonlinearity over the current state box.
ObserverState observer_step(const ObserverCertificate& cert,
                            const SystemModel& model,
                            const ObserverState& state,
                            const Eigen::VectorXd& y,
                            const IntervalVectorXd& f_box,
                            const IntervalVectorXd& g_box,
                            const IntervalVectorXd& w_box,
                            const IntervalVectorXd& v_box);

// Box for the full measurement y at t+1, from the box predicted for t+1.
IntervalVectorXd predict_output_box(const SystemModel& model,
                                    const IntervalVectorXd& next_state_box,
                                    const IntervalVectorXd& v_box);

// Per-channel actuator alarm: applied control outside the network's
// certified output interval.
std::vector<bool> detect_actuator_fault(const Eigen::VectorXd& u_applied,
                                        const IntervalVectorXd& f_box);

// Per-element output alarm: realized controller-visible output outside
// the interval predicted one step earlier. The caller owns the t=0
// warm-up (no prediction exists yet).
std::vector<bool> detect_output_fault(const Eigen::VectorXd& y_o_now,
                                      const IntervalVectorXd& predicted_y_o);

Eigen::VectorXd plant_step(
    const SystemModel& model, const Eigen::VectorXd& x,
    const Eigen::VectorXd& u, const Eigen::VectorXd& w,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g);

// (u_applied, y_corrupted) after additive fault injection.
std::pair<Eigen::VectorXd, Eigen::VectorXd> apply_faults(
    const FaultProfile& profile, const Eigen::VectorXd& u_nominal,
    const Eigen::VectorXd& y_nominal, long t);

struct NnBoundResult {
  IntervalVectorXd box;
  long nodes = 0;     // branch-and-bound nodes (Optimization only)
  double micros = 0;  // wall time of the bounding call
};

NnBoundResult nn_interval(const FeedforwardNetworkXd& net,
                          const IntervalVectorXd& input,
                          BoundingMethod method, long node_budget = 100000);

// Everything one observer lane produces in one step.
struct StepReport {
  long t = 0;
  IntervalVectorXd box;             // state box held at t
  IntervalVectorXd next_box;        // box predicted for t+1
  IntervalVectorXd predicted_y;     // p-dim measurement box for t+1
  IntervalVectorXd predicted_y_o;   // its C_o selection
  IntervalVectorXd g_box;
  NnBoundResult nn;
  std::vector<Safety> state_safe;
  std::vector<Safety> predicted_state_safe;
  std::vector<Safety> predicted_output_safe;
  std::vector<bool> actuator_alarm;
  std::vector<bool> output_alarm;
  bool warmup = false;
  double solve_micros = 0;
};

}  // namespace iobs
