#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "iobs/envelope.hpp"
#include "iobs/pipeline.hpp"

namespace iobs {

enum class Discretization { Euler, ExactZoh };

struct ContinuousModel {
  Eigen::MatrixXd A, B, F, C, C_o;
};

// Discrete model plus the input-integration matrix gamma (ts*I for Euler,
// the integral of exp(A s) over one step for exact hold); gamma maps
// continuous-time additive inputs to their discrete effect.
struct DiscretizedModel {
  SystemModel model;
  Eigen::MatrixXd gamma;
};

DiscretizedModel discretize(const ContinuousModel& cont, double ts,
                            Discretization method);

struct AccParams {
  double mu = 1e-4;
  double t_gap = 1.4;
  double d_still = 10.0;
  double v_set = 30.0;
  double a_min = -3.0;
  double a_max = 2.0;
};

// One scalar nonlinearity g_i acting on a single state component.
struct NonlinearChannelSpec {
  int state_index = 0;
  std::string kind = "square";  // "square" | "linear"
  int segments = 4;
  double domain_lo = 0.0, domain_hi = 60.0;
  std::optional<double> floor, ceiling;
  bool monotonic_shortcut = true;
};

// Longitudinal two-vehicle model: x = [p_l, v_l, a_l, p_e, v_e, a_e],
// y = [p_e, v_e, h, vtilde], controller sees [t_gap, v_set, v_e, h, vtilde].
struct AccSystem {
  ContinuousModel continuous;
  Eigen::VectorXd reference;
  std::vector<NonlinearChannelSpec> nonlinearities;
};

AccSystem build_acc_model(const AccParams& params);

// Piecewise-constant lead-vehicle control signal.
struct LeadControl {
  std::string type = "constant";  // "constant" | "piecewise"
  double value = 0.0;
  std::vector<double> times, values;  // step function, times ascending

  double at(double time_s) const;
  bool operator==(const LeadControl&) const = default;
};

// amplitude * sin(omega * pi * ts * t); sensor faults enter through the
// measured-channel target.
struct FaultConfig {
  bool enabled = false;
  double amplitude = 0.0;
  double omega = 0.0;
  std::string target;

  bool operator==(const FaultConfig&) const = default;
};

// One-sided or two-sided safe range for a single index.
struct SafetyRange {
  int index = 0;
  std::optional<double> lower, upper;

  bool operator==(const SafetyRange&) const = default;
};

struct EnvelopeConfig {
  int segments = 4;
  double domain_lo = 0.0, domain_hi = 60.0;
  bool floor_zero = true;
  bool monotonic_shortcut = true;

  bool operator==(const EnvelopeConfig&) const = default;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::string model = "acc";  // "acc" | "inline"
  AccParams acc;
  EnvelopeConfig envelope;

  ContinuousModel inline_model;
  Eigen::VectorXd inline_reference;
  std::vector<NonlinearChannelSpec> inline_nonlinearities;
  Eigen::VectorXd disturbance_lower, disturbance_upper;  // inline only

  double ts = 0.1;
  Discretization discretization = Discretization::Euler;

  std::string network_path;
  std::string method = "both";  // "an" | "op" | "both"
  long horizon = 150;
  unsigned long long seed = 7;
  double synthesis_eps = 1e-6;
  long node_budget = 100000;
  std::string certificate_in;

  Eigen::VectorXd initial_lower, initial_upper, initial_state;
  double noise_bound = 0.001;
  LeadControl lead;
  FaultConfig actuator_fault, sensor_fault;
  std::vector<SafetyRange> state_safety, output_safety;

  std::string out_dir = "out";
  std::string csv_name = "trace.csv";
  bool plots = true;
  bool save_certificate = true;

  bool operator==(const ScenarioConfig& other) const;
};

ScenarioConfig load_scenario(const std::string& path);
std::string serialize_scenario(const ScenarioConfig& config);
ScenarioConfig parse_scenario(const std::string& text);

// Everything recorded about one time step, both observer lanes included.
struct LaneRecord {
  StepReport report;
  bool contains_true = true;
  double decrement = 0.0;  // max over the realized upper/lower error pairs
};

struct TraceRecord {
  long t = 0;
  double time_s = 0.0;
  Eigen::VectorXd x, y_clean, y_measured, v, u_nominal, u_applied;
  std::vector<LaneRecord> lanes;
  double h_true = 0.0, d_safe_true = 0.0;  // ACC only
};

struct LaneSummary {
  std::string method;
  long actuator_alarm_steps = 0;
  long first_actuator_alarm = -1;
  long output_alarm_steps = 0;
  long first_output_alarm = -1;
  std::vector<long> output_alarm_channel_counts;
  long containment_failures = 0;
  long first_containment_failure = -1;
  double max_decrement = 0.0;
  long total_nodes = 0;
  double total_micros = 0.0;
};

struct RunSummary {
  std::string name;
  long horizon = 0;
  bool unsound = false;
  long prediction_misses = 0;
  long op_wider_steps = 0;    // any OP width above AN width + 1e-9
  long op_tighter_steps = 0;  // OP strictly tighter on the control output
  std::vector<LaneSummary> lanes;
  std::string csv_path;
};

// Full closed-loop run: synthesis (or certificate reuse), simulation with
// faults, per-step observer lanes, CSV/plot emission. Throws the library
// error types; a containment failure is recorded, not thrown.
RunSummary run_scenario(const ScenarioConfig& config);

void emit_csv(const std::string& path, const std::vector<TraceRecord>& trace,
              const std::vector<std::string>& lane_names, bool acc_extras);

}  // namespace iobs
