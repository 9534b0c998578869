#include "iobs/scenario.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "iobs/log.hpp"
#include "iobs/milp.hpp"
#include "iobs/rng.hpp"
#include "iobs/svg.hpp"

namespace iobs {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

json vec_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vec_from_json(const json& j, const std::string& name) {
  if (!j.is_array())
    throw config_error("scenario: " + name + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) {
    if (!x.is_number())
      throw config_error("scenario: " + name + " must hold numbers");
    v[i++] = x.get<double>();
  }
  return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw config_error("scenario: " + name + " must be a 2-d array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols)
      throw config_error("scenario: " + name + " rows differ in length");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw config_error("scenario: unknown key '" + item.key() + "' in " +
                         where);
  }
}

FaultConfig fault_from_json(const json& j, const std::string& where,
                            bool sensor) {
  check_keys(j, where,
             sensor ? std::initializer_list<const char*>{"amplitude", "omega",
                                                         "target"}
                    : std::initializer_list<const char*>{"amplitude", "omega"});
  FaultConfig f;
  f.enabled = true;
  f.amplitude = j.at("amplitude").get<double>();
  f.omega = j.at("omega").get<double>();
  if (sensor) f.target = j.at("target").get<std::string>();
  return f;
}

json fault_to_json(const FaultConfig& f, bool sensor) {
  json j{{"amplitude", f.amplitude}, {"omega", f.omega}};
  if (sensor) j["target"] = f.target;
  return j;
}

std::vector<SafetyRange> ranges_from_json(const json& j,
                                          const std::string& where) {
  std::vector<SafetyRange> out;
  if (!j.is_array()) throw config_error("scenario: " + where + " must be an array");
  for (const auto& e : j) {
    check_keys(e, where, {"index", "lower", "upper"});
    SafetyRange r;
    r.index = e.at("index").get<int>();
    if (e.contains("lower")) r.lower = e.at("lower").get<double>();
    if (e.contains("upper")) r.upper = e.at("upper").get<double>();
    out.push_back(r);
  }
  return out;
}

json ranges_to_json(const std::vector<SafetyRange>& ranges) {
  json out = json::array();
  for (const auto& r : ranges) {
    json e{{"index", r.index}};
    if (r.lower) e["lower"] = *r.lower;
    if (r.upper) e["upper"] = *r.upper;
    out.push_back(e);
  }
  return out;
}

NonlinearChannelSpec channel_from_json(const json& j) {
  check_keys(j, "nonlinearities",
             {"state_index", "kind", "segments", "domain", "floor", "ceiling",
              "monotonic_shortcut"});
  NonlinearChannelSpec ch;
  ch.state_index = j.at("state_index").get<int>();
  if (j.contains("kind")) ch.kind = j.at("kind").get<std::string>();
  if (j.contains("segments")) ch.segments = j.at("segments").get<int>();
  if (j.contains("domain")) {
    auto d = vec_from_json(j.at("domain"), "nonlinearity domain");
    if (d.size() != 2) throw config_error("scenario: domain must be [lo, hi]");
    ch.domain_lo = d[0];
    ch.domain_hi = d[1];
  }
  if (j.contains("floor")) ch.floor = j.at("floor").get<double>();
  if (j.contains("ceiling")) ch.ceiling = j.at("ceiling").get<double>();
  if (j.contains("monotonic_shortcut"))
    ch.monotonic_shortcut = j.at("monotonic_shortcut").get<bool>();
  return ch;
}

json channel_to_json(const NonlinearChannelSpec& ch) {
  json j{{"state_index", ch.state_index},
         {"kind", ch.kind},
         {"segments", ch.segments},
         {"domain", json::array({ch.domain_lo, ch.domain_hi})},
         {"monotonic_shortcut", ch.monotonic_shortcut}};
  if (ch.floor) j["floor"] = *ch.floor;
  if (ch.ceiling) j["ceiling"] = *ch.ceiling;
  return j;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("scenario: malformed JSON: ") + e.what());
  }
  check_keys(j, "top level",
             {"name", "model", "acc", "envelope", "ts", "discretization",
              "inline", "network", "method", "horizon", "seed",
              "synthesis_eps", "node_budget", "certificate_in", "initial_box",
              "initial_state", "noise_bound", "lead_control", "faults",
              "safety", "outputs"});

  ScenarioConfig c;
  if (j.contains("name")) c.name = j.at("name").get<std::string>();
  if (j.contains("model")) c.model = j.at("model").get<std::string>();
  if (c.model != "acc" && c.model != "inline")
    throw config_error("scenario: model must be acc or inline");

  if (j.contains("acc")) {
    const auto& a = j.at("acc");
    check_keys(a, "acc", {"mu", "t_gap", "d_still", "v_set", "a_min", "a_max"});
    if (a.contains("mu")) c.acc.mu = a.at("mu").get<double>();
    if (a.contains("t_gap")) c.acc.t_gap = a.at("t_gap").get<double>();
    if (a.contains("d_still")) c.acc.d_still = a.at("d_still").get<double>();
    if (a.contains("v_set")) c.acc.v_set = a.at("v_set").get<double>();
    if (a.contains("a_min")) c.acc.a_min = a.at("a_min").get<double>();
    if (a.contains("a_max")) c.acc.a_max = a.at("a_max").get<double>();
  }

  if (j.contains("envelope")) {
    const auto& e = j.at("envelope");
    check_keys(e, "envelope",
               {"segments", "domain", "floor_zero", "monotonic_shortcut"});
    if (e.contains("segments")) c.envelope.segments = e.at("segments").get<int>();
    if (e.contains("domain")) {
      auto d = vec_from_json(e.at("domain"), "envelope domain");
      if (d.size() != 2)
        throw config_error("scenario: envelope domain must be [lo, hi]");
      c.envelope.domain_lo = d[0];
      c.envelope.domain_hi = d[1];
    }
    if (e.contains("floor_zero"))
      c.envelope.floor_zero = e.at("floor_zero").get<bool>();
    if (e.contains("monotonic_shortcut"))
      c.envelope.monotonic_shortcut = e.at("monotonic_shortcut").get<bool>();
  }

  if (j.contains("ts")) c.ts = j.at("ts").get<double>();
  if (j.contains("discretization")) {
    const auto d = j.at("discretization").get<std::string>();
    if (d == "euler") c.discretization = Discretization::Euler;
    else if (d == "zoh") c.discretization = Discretization::ExactZoh;
    else throw config_error("scenario: discretization must be euler or zoh");
  }

  if (j.contains("inline")) {
    const auto& m = j.at("inline");
    check_keys(m, "inline",
               {"A", "B", "F", "C", "C_o", "reference", "nonlinearities",
                "disturbance"});
    c.inline_model.A = mat_from_json(m.at("A"), "inline A");
    c.inline_model.B = mat_from_json(m.at("B"), "inline B");
    c.inline_model.C = mat_from_json(m.at("C"), "inline C");
    c.inline_model.C_o = mat_from_json(m.at("C_o"), "inline C_o");
    c.inline_model.F = m.contains("F")
                           ? mat_from_json(m.at("F"), "inline F")
                           : Eigen::MatrixXd(c.inline_model.A.rows(), 0);
    if (m.contains("reference"))
      c.inline_reference = vec_from_json(m.at("reference"), "reference");
    else
      c.inline_reference = Eigen::VectorXd(0);
    if (m.contains("nonlinearities"))
      for (const auto& ch : m.at("nonlinearities"))
        c.inline_nonlinearities.push_back(channel_from_json(ch));
    if (m.contains("disturbance")) {
      const auto& d = m.at("disturbance");
      check_keys(d, "disturbance", {"lower", "upper"});
      c.disturbance_lower = vec_from_json(d.at("lower"), "disturbance lower");
      c.disturbance_upper = vec_from_json(d.at("upper"), "disturbance upper");
    }
  }

  if (!j.contains("network"))
    throw config_error("scenario: network path is required");
  c.network_path = j.at("network").get<std::string>();
  if (j.contains("method")) c.method = j.at("method").get<std::string>();
  if (c.method != "an" && c.method != "op" && c.method != "both")
    throw config_error("scenario: method must be an, op, or both");
  if (j.contains("horizon")) c.horizon = j.at("horizon").get<long>();
  if (j.contains("seed")) c.seed = j.at("seed").get<unsigned long long>();
  if (j.contains("synthesis_eps"))
    c.synthesis_eps = j.at("synthesis_eps").get<double>();
  if (j.contains("node_budget")) c.node_budget = j.at("node_budget").get<long>();
  if (j.contains("certificate_in"))
    c.certificate_in = j.at("certificate_in").get<std::string>();

  if (!j.contains("initial_box") || !j.contains("initial_state"))
    throw config_error("scenario: initial_box and initial_state are required");
  const auto& box = j.at("initial_box");
  check_keys(box, "initial_box", {"lower", "upper"});
  c.initial_lower = vec_from_json(box.at("lower"), "initial_box lower");
  c.initial_upper = vec_from_json(box.at("upper"), "initial_box upper");
  c.initial_state = vec_from_json(j.at("initial_state"), "initial_state");

  if (j.contains("noise_bound")) c.noise_bound = j.at("noise_bound").get<double>();

  if (j.contains("lead_control")) {
    const auto& l = j.at("lead_control");
    check_keys(l, "lead_control", {"type", "value", "times", "values"});
    if (l.contains("type")) c.lead.type = l.at("type").get<std::string>();
    if (l.contains("value")) c.lead.value = l.at("value").get<double>();
    if (l.contains("times")) {
      auto t = vec_from_json(l.at("times"), "lead times");
      c.lead.times.assign(t.data(), t.data() + t.size());
    }
    if (l.contains("values")) {
      auto v = vec_from_json(l.at("values"), "lead values");
      c.lead.values.assign(v.data(), v.data() + v.size());
    }
  }

  if (j.contains("faults")) {
    const auto& f = j.at("faults");
    check_keys(f, "faults", {"actuator", "sensor"});
    if (f.contains("actuator"))
      c.actuator_fault = fault_from_json(f.at("actuator"), "actuator fault", false);
    if (f.contains("sensor"))
      c.sensor_fault = fault_from_json(f.at("sensor"), "sensor fault", true);
  }

  if (j.contains("safety")) {
    const auto& s = j.at("safety");
    check_keys(s, "safety", {"state", "output"});
    if (s.contains("state")) c.state_safety = ranges_from_json(s.at("state"), "state safety");
    if (s.contains("output"))
      c.output_safety = ranges_from_json(s.at("output"), "output safety");
  }

  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    check_keys(o, "outputs", {"dir", "csv", "plots", "certificate"});
    if (o.contains("dir")) c.out_dir = o.at("dir").get<std::string>();
    if (o.contains("csv")) c.csv_name = o.at("csv").get<std::string>();
    if (o.contains("plots")) c.plots = o.at("plots").get<bool>();
    if (o.contains("certificate"))
      c.save_certificate = o.at("certificate").get<bool>();
  }
  return c;
}

std::string serialize_scenario(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["model"] = c.model;
  j["acc"] = {{"mu", c.acc.mu},       {"t_gap", c.acc.t_gap},
              {"d_still", c.acc.d_still}, {"v_set", c.acc.v_set},
              {"a_min", c.acc.a_min}, {"a_max", c.acc.a_max}};
  j["envelope"] = {{"segments", c.envelope.segments},
                   {"domain", json::array({c.envelope.domain_lo,
                                           c.envelope.domain_hi})},
                   {"floor_zero", c.envelope.floor_zero},
                   {"monotonic_shortcut", c.envelope.monotonic_shortcut}};
  j["ts"] = c.ts;
  j["discretization"] =
      c.discretization == Discretization::Euler ? "euler" : "zoh";
  if (c.model == "inline") {
    json m{{"A", mat_to_json(c.inline_model.A)},
           {"B", mat_to_json(c.inline_model.B)},
           {"F", mat_to_json(c.inline_model.F)},
           {"C", mat_to_json(c.inline_model.C)},
           {"C_o", mat_to_json(c.inline_model.C_o)},
           {"reference", vec_to_json(c.inline_reference)}};
    if (!c.inline_nonlinearities.empty()) {
      json chans = json::array();
      for (const auto& ch : c.inline_nonlinearities)
        chans.push_back(channel_to_json(ch));
      m["nonlinearities"] = chans;
    }
    if (c.disturbance_lower.size() > 0)
      m["disturbance"] = {{"lower", vec_to_json(c.disturbance_lower)},
                          {"upper", vec_to_json(c.disturbance_upper)}};
    j["inline"] = m;
  }
  j["network"] = c.network_path;
  j["method"] = c.method;
  j["horizon"] = c.horizon;
  j["seed"] = c.seed;
  j["synthesis_eps"] = c.synthesis_eps;
  j["node_budget"] = c.node_budget;
  if (!c.certificate_in.empty()) j["certificate_in"] = c.certificate_in;
  j["initial_box"] = {{"lower", vec_to_json(c.initial_lower)},
                      {"upper", vec_to_json(c.initial_upper)}};
  j["initial_state"] = vec_to_json(c.initial_state);
  j["noise_bound"] = c.noise_bound;
  json lead{{"type", c.lead.type}};
  if (c.lead.type == "constant") lead["value"] = c.lead.value;
  else {
    lead["times"] = json(c.lead.times);
    lead["values"] = json(c.lead.values);
  }
  j["lead_control"] = lead;
  if (c.actuator_fault.enabled || c.sensor_fault.enabled) {
    json f;
    if (c.actuator_fault.enabled)
      f["actuator"] = fault_to_json(c.actuator_fault, false);
    if (c.sensor_fault.enabled)
      f["sensor"] = fault_to_json(c.sensor_fault, true);
    j["faults"] = f;
  }
  if (!c.state_safety.empty() || !c.output_safety.empty()) {
    json s;
    if (!c.state_safety.empty()) s["state"] = ranges_to_json(c.state_safety);
    if (!c.output_safety.empty()) s["output"] = ranges_to_json(c.output_safety);
    j["safety"] = s;
  }
  j["outputs"] = {{"dir", c.out_dir},
                  {"csv", c.csv_name},
                  {"plots", c.plots},
                  {"certificate", c.save_certificate}};
  return j.dump(2) + "\n";
}

bool ScenarioConfig::operator==(const ScenarioConfig& other) const {
  return serialize_scenario(*this) == serialize_scenario(other);
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("scenario: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  auto c = parse_scenario(buf.str());
  // Relative input paths in the file mean "next to the file". Outputs stay
  // relative to the working directory.
  const auto base = std::filesystem::path(path).parent_path();
  auto anchor = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative())
      p = (base / p).lexically_normal().string();
  };
  anchor(c.network_path);
  anchor(c.certificate_in);
  return c;
}

namespace {

struct Lane {
  std::string name;
  BoundingMethod method;
  ObserverState state;
  IntervalVectorXd pending_pred_y, pending_pred_y_o;
  bool has_prediction = false;
  LaneSummary summary;
};

ElementaryFunction channel_function(const NonlinearChannelSpec& ch) {
  if (ch.kind == "square") return square_function();
  if (ch.kind == "linear") return linear_function(1.0, 0.0);
  throw config_error("scenario: unsupported nonlinearity kind " + ch.kind);
}

Eigen::MatrixXd sensor_column(const ScenarioConfig& cfg,
                              const SystemModel& model) {
  Eigen::MatrixXd F_s = Eigen::MatrixXd::Zero(model.p(), 1);
  const std::string& t = cfg.sensor_fault.target;
  if (cfg.model == "acc") {
    // p_l enters the measurements only through h; v_l only through vtilde.
    if (t == "p_l") F_s(2, 0) = 1.0;
    else if (t == "v_l") F_s(3, 0) = 1.0;
    else throw config_error("scenario: sensor target must be p_l or v_l");
  } else {
    try {
      const int idx = std::stoi(t);
      if (idx < 0 || idx >= model.p()) throw std::out_of_range("idx");
      F_s(idx, 0) = 1.0;
    } catch (const std::exception&) {
      throw config_error("scenario: sensor target must be a measurement index");
    }
  }
  return F_s;
}

void validate_dimensions(const ScenarioConfig& cfg, const SystemModel& model,
                         const FeedforwardNetworkXd& net,
                         const Eigen::VectorXd& r) {
  if (cfg.horizon < 1) throw config_error("scenario: horizon must be >= 1");
  if (cfg.noise_bound < 0)
    throw config_error("scenario: noise_bound must be >= 0");
  if (cfg.initial_lower.size() != model.n() ||
      cfg.initial_upper.size() != model.n() ||
      cfg.initial_state.size() != model.n())
    throw config_error("scenario: initial box/state must have " +
                       std::to_string(model.n()) + " entries");
  if ((cfg.initial_lower.array() > cfg.initial_upper.array()).any())
    throw config_error("scenario: initial box is inverted");
  if ((cfg.initial_state.array() < cfg.initial_lower.array()).any() ||
      (cfg.initial_state.array() > cfg.initial_upper.array()).any())
    throw config_error("scenario: initial state outside the initial box");
  if (net.weights.front().cols() != r.size() + model.l())
    throw config_error("scenario: network expects " +
                       std::to_string(net.weights.front().cols()) +
                       " inputs, reference + outputs give " +
                       std::to_string(r.size() + model.l()));
  if (net.weights.back().rows() != model.m())
    throw config_error("scenario: network output dimension differs from B");
  for (const auto& range : cfg.state_safety)
    if (range.index < 0 || range.index >= model.n())
      throw config_error("scenario: state safety index out of range");
  for (const auto& range : cfg.output_safety)
    if (range.index < 0 || range.index >= model.p())
      throw config_error("scenario: output safety index out of range");
}

void bounds_from_ranges(const std::vector<SafetyRange>& ranges,
                        Eigen::Index dim, Eigen::VectorXd& lower,
                        Eigen::VectorXd& upper) {
  lower = Eigen::VectorXd::Constant(dim, -kInf);
  upper = Eigen::VectorXd::Constant(dim, kInf);
  for (const auto& r : ranges) {
    if (r.lower) lower[r.index] = *r.lower;
    if (r.upper) upper[r.index] = *r.upper;
  }
}

void write_timings(const std::string& path,
                   const std::vector<TraceRecord>& trace,
                   const std::vector<std::string>& lane_names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input("scenario: cannot open " + path);
  out << "t,lane,micros,nodes\n";
  for (const auto& rec : trace)
    for (std::size_t k = 0; k < rec.lanes.size(); ++k) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%ld,%s,%.1f,%ld\n", rec.t,
                    lane_names[k].c_str(), rec.lanes[k].report.nn.micros,
                    rec.lanes[k].report.nn.nodes);
      out << buf;
    }
}

void emit_acc_plots(const std::string& dir,
                    const std::vector<TraceRecord>& trace,
                    const std::vector<std::string>& lane_names,
                    const std::vector<EnvelopeBinding>& bindings,
                    const ElementaryEnvelope& raw_envelope) {
  const std::size_t lanes = lane_names.size();
  std::vector<double> t(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) t[i] = trace[i].time_s;
  const char* lane_colors[2] = {"#d62728", "#1f77b4"};

  auto lane_band = [&](std::size_t k, auto lo_fn, auto hi_fn,
                       const std::string& label) {
    Band b;
    b.label = label;
    b.color = lane_colors[k % 2];
    b.x = t;
    b.lower.resize(trace.size());
    b.upper.resize(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
      b.lower[i] = lo_fn(trace[i].lanes[k]);
      b.upper[i] = hi_fn(trace[i].lanes[k]);
    }
    return b;
  };
  auto true_series = [&](auto fn, const std::string& label,
                         const std::string& color) {
    Series s;
    s.label = label;
    s.color = color;
    s.x = t;
    s.y.resize(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) s.y[i] = fn(trace[i]);
    return s;
  };

  {
    LinePlot plot;
    plot.title = "Controller output interval";
    plot.x_label = "time [s]";
    plot.y_label = "u";
    for (std::size_t k = 0; k < lanes; ++k)
      plot.bands.push_back(lane_band(
          k, [](const LaneRecord& l) { return l.report.nn.box.lower()[0]; },
          [](const LaneRecord& l) { return l.report.nn.box.upper()[0]; },
          lane_names[k]));
    plot.series.push_back(true_series(
        [](const TraceRecord& r) { return r.u_applied[0]; }, "u applied",
        "#2ca02c"));
    write_svg(dir + "/control.svg", plot);
  }

  struct StatePair {
    const char* file;
    const char* title;
    int lead, ego;
  } pairs[] = {{"positions.svg", "Positions", 0, 3},
               {"velocities.svg", "Velocities", 1, 4},
               {"accelerations.svg", "Accelerations", 2, 5}};
  for (const auto& p : pairs) {
    LinePlot plot;
    plot.title = p.title;
    plot.x_label = "time [s]";
    plot.y_label = p.title;
    for (int which = 0; which < 2; ++which) {
      const int idx = which == 0 ? p.lead : p.ego;
      for (std::size_t k = 0; k < lanes; ++k)
        plot.bands.push_back(lane_band(
            k,
            [idx](const LaneRecord& l) { return l.report.box.lower()[idx]; },
            [idx](const LaneRecord& l) { return l.report.box.upper()[idx]; },
            which == 0 ? lane_names[k] + " lead" : lane_names[k] + " ego"));
      plot.series.push_back(true_series(
          [idx](const TraceRecord& r) { return r.x[idx]; },
          which == 0 ? "lead" : "ego", which == 0 ? "#2ca02c" : "#9467bd"));
    }
    write_svg(dir + "/" + p.file, plot);
  }

  {
    LinePlot plot;
    plot.title = "Headway vs. safe distance";
    plot.x_label = "time [s]";
    plot.y_label = "h [m]";
    for (std::size_t k = 0; k < lanes; ++k)
      plot.bands.push_back(lane_band(
          k,
          [](const LaneRecord& l) {
            return l.report.box.lower()[0] - l.report.box.upper()[3];
          },
          [](const LaneRecord& l) {
            return l.report.box.upper()[0] - l.report.box.lower()[3];
          },
          lane_names[k]));
    plot.series.push_back(true_series(
        [](const TraceRecord& r) { return r.h_true; }, "h", "#2ca02c"));
    auto dsafe = true_series(
        [](const TraceRecord& r) { return r.d_safe_true; }, "d_safe",
        "#7f7f7f");
    dsafe.dashed = true;
    plot.series.push_back(dsafe);
    write_svg(dir + "/headway.svg", plot);
  }

  {
    LinePlot plot;
    plot.title = "Fault alarms";
    plot.x_label = "time [s]";
    plot.y_label = "alarm";
    for (std::size_t k = 0; k < lanes; ++k) {
      Series act;
      act.label = lane_names[k] + " actuator";
      act.color = lane_colors[k % 2];
      Series outp;
      outp.label = lane_names[k] + " output";
      outp.color = lane_colors[k % 2];
      outp.dashed = true;
      act.x = outp.x = t;
      act.y.resize(trace.size());
      outp.y.resize(trace.size());
      const double base = 2.5 * static_cast<double>(k);
      for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& rep = trace[i].lanes[k].report;
        bool a = false, o = false;
        for (bool b : rep.actuator_alarm) a = a || b;
        for (bool b : rep.output_alarm) o = o || b;
        act.y[i] = base + (a ? 1.0 : 0.0);
        outp.y[i] = base + 1.1 + (o ? 1.0 : 0.0);
      }
      plot.series.push_back(act);
      plot.series.push_back(outp);
    }
    write_svg(dir + "/alarms.svg", plot);
  }

  if (!bindings.empty()) {
    const auto& refined = bindings.front().env;
    LinePlot plot;
    plot.title = "Nonlinearity envelope";
    plot.x_label = "state value";
    plot.y_label = "g";
    auto piece_series = [](const std::vector<LinearPiece>& pieces,
                           const std::string& label, const std::string& color,
                           bool dashed) {
      Series s;
      s.label = label;
      s.color = color;
      s.dashed = dashed;
      for (const auto& p : pieces) {
        s.x.push_back(p.lo);
        s.y.push_back(p.at(p.lo));
        s.x.push_back(p.hi);
        s.y.push_back(p.at(p.hi));
      }
      return s;
    };
    Series truth;
    truth.label = "g";
    truth.color = "#2ca02c";
    for (int i = 0; i <= 200; ++i) {
      const double x = refined.domain_lo +
                       (refined.domain_hi - refined.domain_lo) * i / 200.0;
      truth.x.push_back(x);
      truth.y.push_back(x * x);
    }
    plot.series.push_back(truth);
    plot.series.push_back(piece_series(raw_envelope.lower_pieces,
                                       "lower (raw)", "#9467bd", true));
    plot.series.push_back(
        piece_series(refined.lower_pieces, "lower (refined)", "#d62728", false));
    plot.series.push_back(
        piece_series(refined.upper_pieces, "upper", "#1f77b4", false));
    write_svg(dir + "/envelope.svg", plot);
  }
}

}  // namespace

void emit_csv(const std::string& path, const std::vector<TraceRecord>& trace,
              const std::vector<std::string>& lane_names, bool acc_extras) {
  if (trace.empty()) throw invalid_input("emit_csv: empty trace");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw invalid_input("emit_csv: cannot open " + path);

  const auto& first = trace.front();
  const auto n = first.x.size();
  const auto p = first.y_measured.size();
  const auto m = first.u_applied.size();
  const auto l = first.lanes.empty()
                     ? 0
                     : first.lanes.front().report.predicted_y_o.size();
  const auto s =
      first.lanes.empty() ? 0 : first.lanes.front().report.g_box.size();

  std::ostringstream h;
  h << "t,time_s";
  for (Eigen::Index i = 0; i < n; ++i) h << ",x" << i;
  for (Eigen::Index i = 0; i < p; ++i) h << ",y" << i;
  for (Eigen::Index i = 0; i < p; ++i) h << ",v" << i;
  for (Eigen::Index i = 0; i < m; ++i) h << ",u_nom" << i;
  for (Eigen::Index i = 0; i < m; ++i) h << ",u_app" << i;
  if (acc_extras) h << ",h_true,d_safe";
  for (const auto& name : lane_names) {
    for (Eigen::Index i = 0; i < m; ++i)
      h << "," << name << "_f_lo" << i << "," << name << "_f_hi" << i;
    for (Eigen::Index i = 0; i < n; ++i)
      h << "," << name << "_box_lo" << i << "," << name << "_box_hi" << i;
    for (Eigen::Index i = 0; i < s; ++i)
      h << "," << name << "_g_lo" << i << "," << name << "_g_hi" << i;
    for (Eigen::Index i = 0; i < p; ++i)
      h << "," << name << "_pred_y_lo" << i << "," << name << "_pred_y_hi" << i;
    for (Eigen::Index i = 0; i < l; ++i)
      h << "," << name << "_pred_yo_lo" << i << "," << name << "_pred_yo_hi"
        << i;
    for (Eigen::Index i = 0; i < m; ++i) h << "," << name << "_act_alarm" << i;
    for (Eigen::Index i = 0; i < l; ++i) h << "," << name << "_out_alarm" << i;
    for (Eigen::Index i = 0; i < n; ++i) h << "," << name << "_state_safe" << i;
    for (Eigen::Index i = 0; i < n; ++i)
      h << "," << name << "_pred_state_safe" << i;
    for (Eigen::Index i = 0; i < p; ++i)
      h << "," << name << "_pred_output_safe" << i;
    h << "," << name << "_contains_true," << name << "_decrement," << name
      << "_nodes";
  }
  out << h.str() << "\n";

  for (const auto& rec : trace) {
    std::ostringstream row;
    row << rec.t << "," << fmt(rec.time_s);
    for (Eigen::Index i = 0; i < n; ++i) row << "," << fmt(rec.x[i]);
    for (Eigen::Index i = 0; i < p; ++i) row << "," << fmt(rec.y_measured[i]);
    for (Eigen::Index i = 0; i < p; ++i) row << "," << fmt(rec.v[i]);
    for (Eigen::Index i = 0; i < m; ++i) row << "," << fmt(rec.u_nominal[i]);
    for (Eigen::Index i = 0; i < m; ++i) row << "," << fmt(rec.u_applied[i]);
    if (acc_extras) row << "," << fmt(rec.h_true) << "," << fmt(rec.d_safe_true);
    for (const auto& lane : rec.lanes) {
      const auto& rep = lane.report;
      for (Eigen::Index i = 0; i < m; ++i)
        row << "," << fmt(rep.nn.box.lower()[i]) << ","
            << fmt(rep.nn.box.upper()[i]);
      for (Eigen::Index i = 0; i < n; ++i)
        row << "," << fmt(rep.box.lower()[i]) << "," << fmt(rep.box.upper()[i]);
      for (Eigen::Index i = 0; i < s; ++i)
        row << "," << fmt(rep.g_box.lower()[i]) << ","
            << fmt(rep.g_box.upper()[i]);
      for (Eigen::Index i = 0; i < p; ++i)
        row << "," << fmt(rep.predicted_y.lower()[i]) << ","
            << fmt(rep.predicted_y.upper()[i]);
      for (Eigen::Index i = 0; i < l; ++i)
        row << "," << fmt(rep.predicted_y_o.lower()[i]) << ","
            << fmt(rep.predicted_y_o.upper()[i]);
      for (Eigen::Index i = 0; i < m; ++i)
        row << "," << (rep.actuator_alarm[static_cast<std::size_t>(i)] ? 1 : 0);
      for (Eigen::Index i = 0; i < l; ++i)
        row << "," << (rep.output_alarm[static_cast<std::size_t>(i)] ? 1 : 0);
      auto flag = [&row](const std::vector<Safety>& flags) {
        for (Safety f : flags)
          row << ","
              << (f == Safety::Safe ? 0 : f == Safety::Undefined ? 1 : 2);
      };
      flag(rep.state_safe);
      flag(rep.predicted_state_safe);
      flag(rep.predicted_output_safe);
      row << "," << (lane.contains_true ? 1 : 0) << "," << fmt(lane.decrement)
          << "," << rep.nn.nodes;
    }
    out << row.str() << "\n";
  }
}

RunSummary run_scenario(const ScenarioConfig& cfg) {
  ContinuousModel cont;
  Eigen::VectorXd r;
  std::vector<NonlinearChannelSpec> channels;
  if (cfg.model == "acc") {
    auto acc = build_acc_model(cfg.acc);
    cont = acc.continuous;
    r = acc.reference;
    channels = acc.nonlinearities;
    for (auto& ch : channels) {
      ch.segments = cfg.envelope.segments;
      ch.domain_lo = cfg.envelope.domain_lo;
      ch.domain_hi = cfg.envelope.domain_hi;
      if (cfg.envelope.floor_zero) ch.floor = 0.0;
      ch.monotonic_shortcut = cfg.envelope.monotonic_shortcut;
    }
  } else {
    cont = cfg.inline_model;
    r = cfg.inline_reference;
    channels = cfg.inline_nonlinearities;
  }

  auto disc = discretize(cont, cfg.ts, cfg.discretization);
  SystemModel model = disc.model;
  try {
    model.validate();
  } catch (const invalid_input& e) {
    throw config_error(std::string("scenario: model invalid: ") + e.what());
  }

  auto net = load_network(cfg.network_path);
  validate_dimensions(cfg, model, net, r);

  ObserverCertificate cert;
  if (cfg.certificate_in.empty()) {
    cert = synthesize(model, cfg.synthesis_eps);
  } else {
    auto file = load_certificate(cfg.certificate_in);
    if (file.model.A.rows() != model.n() ||
        (file.model.A - model.A).cwiseAbs().maxCoeff() > 1e-12 ||
        (file.model.C - model.C).cwiseAbs().maxCoeff() > 1e-12)
      throw config_error("scenario: certificate was built for another model");
    cert = file.cert;
    if (!verify_certificate(model, cert).passes(cert.eps))
      throw config_error("scenario: supplied certificate fails verification");
  }

  std::vector<EnvelopeBinding> bindings;
  ElementaryEnvelope first_raw;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto& ch = channels[i];
    if (ch.state_index < 0 || ch.state_index >= model.n())
      throw config_error("scenario: nonlinearity state index out of range");
    auto f = channel_function(ch);
    auto env = build_envelope(f, ch.domain_lo, ch.domain_hi, ch.segments);
    if (i == 0) first_raw = env;
    if (ch.floor || ch.ceiling) env = refine_with_prior(env, ch.floor, ch.ceiling);
    const bool shortcut = ch.monotonic_shortcut && env.monotone_on &&
                          env.monotone_on->first <= ch.domain_lo &&
                          env.monotone_on->second >= ch.domain_hi;
    bindings.push_back({ch.state_index, env, shortcut});
  }
  auto g_true = [&channels](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(channels.size()));
    for (std::size_t i = 0; i < channels.size(); ++i) {
      const double xi = x[channels[i].state_index];
      g[static_cast<Eigen::Index>(i)] =
          channels[i].kind == "square" ? xi * xi : xi;
    }
    return g;
  };

  // Continuous-time additive inputs are integrated by gamma; with a known
  // lead control the disturbance box has zero width.
  const Eigen::Index n = model.n(), p = model.p(), m = model.m(), l = model.l();
  DisturbanceBounds dist;
  if (cfg.model == "acc") {
    const auto gamma = disc.gamma;
    const double ts = cfg.ts;
    const auto lead = cfg.lead;
    dist.w = [gamma, ts, lead, n](long t) {
      Eigen::VectorXd wc = Eigen::VectorXd::Zero(n);
      wc[2] = 2.0 * lead.at(static_cast<double>(t) * ts);
      return IntervalVectorXd::degenerate(gamma * wc);
    };
  } else {
    if (cfg.disturbance_lower.size() != n ||
        cfg.disturbance_upper.size() != n)
      throw config_error("scenario: inline disturbance bounds must be n-dim");
    const IntervalVectorXd wc(cfg.disturbance_lower, cfg.disturbance_upper);
    const auto box = propagate_affine(disc.gamma, wc);
    dist.w = [box](long) { return box; };
  }
  const IntervalVectorXd v_box(Eigen::VectorXd::Constant(p, -cfg.noise_bound),
                               Eigen::VectorXd::Constant(p, cfg.noise_bound));
  dist.v = [v_box](long) { return v_box; };

  FaultProfile profile;
  if (cfg.actuator_fault.enabled) {
    const auto f = cfg.actuator_fault;
    const double ts = cfg.ts;
    profile.actuator = [f, ts, m](long t) {
      return Eigen::VectorXd::Constant(
          m, f.amplitude * std::sin(f.omega * M_PI * ts * static_cast<double>(t)));
    };
  }
  if (cfg.sensor_fault.enabled) {
    profile.F_s = sensor_column(cfg, model);
    const auto f = cfg.sensor_fault;
    const double ts = cfg.ts;
    profile.sensor = [f, ts](long t) {
      return Eigen::VectorXd::Constant(
          1, f.amplitude * std::sin(f.omega * M_PI * ts * static_cast<double>(t)));
    };
  }

  Eigen::VectorXd state_lo, state_hi, out_lo, out_hi;
  bounds_from_ranges(cfg.state_safety, n, state_lo, state_hi);
  bounds_from_ranges(cfg.output_safety, p, out_lo, out_hi);

  std::vector<Lane> lanes;
  auto add_lane = [&](const std::string& name, BoundingMethod method) {
    Lane lane;
    lane.name = name;
    lane.method = method;
    lane.state = ObserverState{
        IntervalVectorXd(cfg.initial_lower, cfg.initial_upper), 0};
    lane.summary.method = name;
    lane.summary.max_decrement = -kInf;
    lane.summary.output_alarm_channel_counts.assign(
        static_cast<std::size_t>(l), 0);
    lanes.push_back(std::move(lane));
  };
  if (cfg.method == "an" || cfg.method == "both")
    add_lane("an", BoundingMethod::Auxiliary);
  if (cfg.method == "op" || cfg.method == "both")
    add_lane("op", BoundingMethod::Optimization);

  Rng rng(cfg.seed);
  Eigen::VectorXd x = cfg.initial_state;
  std::vector<TraceRecord> trace;
  trace.reserve(static_cast<std::size_t>(cfg.horizon));
  RunSummary summary;
  summary.name = cfg.name;
  summary.horizon = cfg.horizon;

  for (long t = 0; t < cfg.horizon; ++t) {
    TraceRecord rec;
    rec.t = t;
    rec.time_s = static_cast<double>(t) * cfg.ts;
    rec.x = x;

    Eigen::VectorXd v(p);
    for (Eigen::Index i = 0; i < p; ++i)
      v[i] = rng.uniform(-cfg.noise_bound, cfg.noise_bound);
    const auto w_box = dist.w(t);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i)
      w[i] = rng.uniform(w_box.lower()[i], w_box.upper()[i]);

    rec.v = v;
    rec.y_clean = measured_output(model, x, v);
    rec.y_measured =
        apply_faults(profile, Eigen::VectorXd::Zero(m), rec.y_clean, t).second;
    const Eigen::VectorXd y_o = model.C_o * rec.y_measured;

    Eigen::VectorXd z(r.size() + l);
    z << r, y_o;
    rec.u_nominal = forward(net, z);
    rec.u_applied =
        apply_faults(profile, rec.u_nominal, rec.y_clean, t).first;

    if (cfg.model == "acc") {
      rec.h_true = x[0] - x[3];
      rec.d_safe_true = cfg.acc.t_gap * x[4] + cfg.acc.d_still;
    }

    const Eigen::VectorXd x_next =
        plant_step(model, x, rec.u_applied, w, g_true);
    const Eigen::VectorXd g_now = g_true(x);

    IntervalVectorXd an_f, op_f;
    for (auto& lane : lanes) {
      LaneRecord lrec;
      StepReport& rep = lrec.report;
      rep.t = t;
      rep.box = lane.state.box;

      rep.g_box = nonlinear_interval(bindings, lane.state.box);
      const auto z_box = nn_input_box(model, lane.state.box, v_box, r);
      const auto solve_start = std::chrono::steady_clock::now();
      rep.nn = nn_interval(net, z_box, lane.method, cfg.node_budget);
      rep.solve_micros = std::chrono::duration<double, std::micro>(
                             std::chrono::steady_clock::now() - solve_start)
                             .count();
      if (lane.method == BoundingMethod::Auxiliary) an_f = rep.nn.box;
      else op_f = rep.nn.box;

      auto next = observer_step(cert, model, lane.state, rec.y_measured,
                                rep.nn.box, rep.g_box, w_box, v_box);
      rep.next_box = next.box;
      rep.predicted_y = predict_output_box(model, next.box, dist.v(t + 1));
      rep.predicted_y_o = propagate_affine(model.C_o, rep.predicted_y);

      rep.state_safe = check_box_safety(rep.box, state_lo, state_hi);
      rep.predicted_state_safe = check_box_safety(next.box, state_lo, state_hi);
      rep.predicted_output_safe =
          check_box_safety(rep.predicted_y, out_lo, out_hi);
      rep.actuator_alarm = detect_actuator_fault(rec.u_applied, rep.nn.box);
      if (lane.has_prediction) {
        rep.output_alarm = detect_output_fault(y_o, lane.pending_pred_y_o);
        if (!lane.pending_pred_y.contains(rec.y_measured))
          ++summary.prediction_misses;
      } else {
        rep.output_alarm.assign(static_cast<std::size_t>(l), false);
        rep.warmup = true;
      }

      lrec.contains_true = next.box.contains(x_next, 1e-9);

      // Realized error pairs for the certified quadratic form.
      const Eigen::Index q = model.q();
      Eigen::VectorXd xi_up(q), xi_lo(q);
      xi_up << rep.nn.box.upper() - rec.u_nominal,
          rep.g_box.upper() - g_now, v_box.upper() - v, w_box.upper() - w;
      xi_lo << rec.u_nominal - rep.nn.box.lower(),
          g_now - rep.g_box.lower(), v - v_box.lower(), w - w_box.lower();
      lrec.decrement = std::max(
          lyapunov_decrement(cert, model, lane.state.box.upper() - x, xi_up),
          lyapunov_decrement(cert, model, x - lane.state.box.lower(), xi_lo));

      auto& ls = lane.summary;
      bool any_act = false;
      for (bool b : rep.actuator_alarm) any_act = any_act || b;
      if (any_act) {
        ++ls.actuator_alarm_steps;
        if (ls.first_actuator_alarm < 0) ls.first_actuator_alarm = t;
      }
      bool any_out = false;
      for (std::size_t i = 0; i < rep.output_alarm.size(); ++i)
        if (rep.output_alarm[i]) {
          any_out = true;
          ++ls.output_alarm_channel_counts[i];
        }
      if (any_out) {
        ++ls.output_alarm_steps;
        if (ls.first_output_alarm < 0) ls.first_output_alarm = t;
      }
      if (!lrec.contains_true) {
        ++ls.containment_failures;
        if (ls.first_containment_failure < 0)
          ls.first_containment_failure = t + 1;
      }
      ls.max_decrement = std::max(ls.max_decrement, lrec.decrement);
      ls.total_nodes += rep.nn.nodes;
      ls.total_micros += rep.nn.micros;

      lane.state = next;
      lane.pending_pred_y = rep.predicted_y;
      lane.pending_pred_y_o = rep.predicted_y_o;
      lane.has_prediction = true;
      rec.lanes.push_back(std::move(lrec));
    }

    if (lanes.size() == 2) {
      const Eigen::VectorXd an_w = width(an_f), op_w = width(op_f);
      if ((op_w.array() > an_w.array() + 1e-9).any()) ++summary.op_wider_steps;
      if ((an_w.array() - op_w.array() > 1e-6).any()) ++summary.op_tighter_steps;
    }

    x = x_next;
    trace.push_back(std::move(rec));
  }

  for (const auto& lane : lanes) {
    summary.lanes.push_back(lane.summary);
    if (lane.summary.containment_failures > 0) summary.unsound = true;
  }

  std::filesystem::create_directories(cfg.out_dir);
  std::vector<std::string> lane_names;
  for (const auto& lane : lanes) lane_names.push_back(lane.name);
  summary.csv_path = cfg.out_dir + "/" + cfg.csv_name;
  emit_csv(summary.csv_path, trace, lane_names, cfg.model == "acc");
  write_timings(cfg.out_dir + "/timings.csv", trace, lane_names);
  if (cfg.save_certificate)
    save_certificate(cfg.out_dir + "/certificate.json", model, cert);
  if (cfg.plots && cfg.model == "acc")
    emit_acc_plots(cfg.out_dir, trace, lane_names, bindings, first_raw);

  log_info("scenario %s: %ld steps, unsound=%d, prediction misses %ld",
           cfg.name.c_str(), cfg.horizon, summary.unsound ? 1 : 0,
           summary.prediction_misses);
  return summary;
}

}  // namespace iobs
