// End-to-end acceptance checks. Each criterion prints exactly one
// PASS/FAIL line; the exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "iobs/milp.hpp"
#include "iobs/rng.hpp"
#include "iobs/scenario.hpp"
#include "iobs/svg.hpp"

using namespace iobs;

namespace {

const std::string kDataDir = IOBS_DATA_DIR;
int g_failures = 0;

void report(int index, const char* name, bool pass, const std::string& detail) {
  std::printf("%s  %2d %-24s %s\n", pass ? "PASS" : "FAIL", index, name,
              detail.c_str());
  if (!pass) ++g_failures;
}

std::string out_root() {
  static const std::string root = [] {
    auto dir = std::filesystem::temp_directory_path() / "iobs_acceptance";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
  }();
  return root;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ScenarioConfig shipped(const std::string& stem) {
  return load_scenario(kDataDir + "/configs/" + stem + ".json");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// Exact bound by enumerating every activation pattern of the encoding's
// binaries, each solved as a fully-fixed relaxation.
double enumerate_bound(const FeedforwardNetworkXd& net,
                       const IntervalVectorXd& box, int output_index,
                       BoundSense sense) {
  auto bounds = preactivation_bounds(net, box);
  auto enc = encode(net, box, bounds, output_index, sense);
  const int k = enc.num_binaries();
  double best = sense == BoundSense::Min
                    ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << k); ++mask) {
    std::vector<int> fixed(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
      fixed[static_cast<std::size_t>(i)] = (mask >> i) & 1;
    auto value = relaxation_bound(enc, fixed);
    if (!value) continue;
    best = sense == BoundSense::Min ? std::min(best, *value)
                                    : std::max(best, *value);
  }
  return best;
}

struct CruiseRuns {
  RunSummary nominal;
  double nominal_seconds = 0.0;
  std::string nominal_dir;
};

CruiseRuns run_nominal() {
  CruiseRuns r;
  auto cfg = shipped("case1");
  r.nominal_dir = out_root() + "/case1";
  cfg.out_dir = r.nominal_dir;
  cfg.plots = false;
  const auto t0 = std::chrono::steady_clock::now();
  r.nominal = run_scenario(cfg);
  r.nominal_seconds = seconds_since(t0);
  return r;
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

}  // namespace

int main() {
  const auto& runs = run_nominal();
  const auto& nominal = runs.nominal;
  const std::string cert_path = runs.nominal_dir + "/certificate.json";

  // 1: every component of the true state stays inside both lanes' boxes.
  {
    long fails = 0;
    for (const auto& lane : nominal.lanes) fails += lane.containment_failures;
    bool pass = !nominal.unsound && fails == 0 && nominal.horizon >= 100 &&
                runs.nominal_seconds < 60.0;
    report(1, "soundness", pass,
           std::to_string(nominal.horizon) + " steps, both lanes, 0.001 noise: " +
               std::to_string(fails) + " containment failures (tol 1e-9), " +
               fmt("%.1f s (< 60 s)", runs.nominal_seconds));
  }

  // 2: exact bounds never wider than layerwise ones, and strictly tighter
  // on the control output for at least 30% of steps.
  {
    bool pass = nominal.op_wider_steps == 0 &&
                nominal.op_tighter_steps * 10 >= nominal.horizon * 3;
    report(2, "exact-bound dominance", pass,
           "wider on " + std::to_string(nominal.op_wider_steps) +
               " steps (slack 1e-9); tighter by > 1e-6 on " +
               std::to_string(nominal.op_tighter_steps) + "/" +
               std::to_string(nominal.horizon) + " steps (need >= 30%)");
  }

  // 3: branch-and-bound output intervals equal full activation-pattern
  // enumeration on the five-neuron network.
  {
    const auto t0 = std::chrono::steady_clock::now();
    auto net = load_network(kDataDir + "/nets/small_relu.json");
    Rng rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd lo(3), hi(3);
      for (int i = 0; i < 3; ++i) {
        const double mid = rng.uniform(-2, 2);
        const double half = rng.uniform(0.1, 1.5);
        lo[i] = mid - half;
        hi[i] = mid + half;
      }
      IntervalVectorXd box(lo, hi);
      auto out = output_interval(net, box);
      for (int k = 0; k < 2; ++k) {
        worst = std::max(worst, std::abs(out.lower()[k] -
                                         enumerate_bound(net, box, k,
                                                         BoundSense::Min)));
        worst = std::max(worst, std::abs(out.upper()[k] -
                                         enumerate_bound(net, box, k,
                                                         BoundSense::Max)));
      }
    }
    const double secs = seconds_since(t0);
    bool pass = worst <= 1e-6 && secs < 5.0;
    report(3, "exact-bound oracle", pass,
           fmt("20 random boxes vs full pattern enumeration: max gap %.2e "
               "(tol 1e-6), %.2f s (< 5 s)",
               worst, secs));
  }

  // 4: every optimal bound's witness reproduces the bound by a forward pass.
  {
    auto net = load_network(kDataDir + "/nets/small_relu.json");
    Rng rng(5);
    long checked = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd lo(3), hi(3);
      for (int i = 0; i < 3; ++i) {
        const double mid = rng.uniform(-2, 2);
        const double half = rng.uniform(0.1, 1.5);
        lo[i] = mid - half;
        hi[i] = mid + half;
      }
      auto rep = output_interval_report(net, IntervalVectorXd(lo, hi));
      for (std::size_t d = 0; d < rep.details.size(); ++d) {
        const auto& res = rep.details[d];
        if (res.status != BoundStatus::Optimal) continue;
        const auto y = forward(net, res.witness);
        worst = std::max(
            worst, std::abs(y[static_cast<Eigen::Index>(d / 2)] - res.value));
        ++checked;
      }
    }
    bool pass = checked > 0 && worst <= 1e-6;
    report(4, "witness achievability", pass,
           std::to_string(checked) +
               fmt(" witnesses re-evaluated: max |f(witness) - bound| = %.2e "
                   "(tol 1e-6)",
                   worst));
  }

  // 5: the synthesized gain verifies independently and the energy
  // decrement stays nonpositive on random and on realized pairs.
  {
    auto file = load_certificate(cert_path);
    auto rep = verify_certificate(file.model, file.cert);
    const bool residuals_ok = rep.passes(file.cert.eps);

    Rng rng(23);
    const Eigen::Index n = file.model.n(), q = file.model.q();
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 1000; ++k) {
      Eigen::VectorXd dx(n), xi(q);
      for (Eigen::Index i = 0; i < n; ++i) dx[i] = rng.uniform(-1, 1);
      for (Eigen::Index i = 0; i < q; ++i) xi[i] = rng.uniform(-1, 1);
      worst = std::max(worst,
                       lyapunov_decrement(file.cert, file.model, dx, xi));
    }
    double realized = -std::numeric_limits<double>::infinity();
    for (const auto& lane : nominal.lanes)
      realized = std::max(realized, lane.max_decrement);

    bool pass = residuals_ok && worst <= 1e-9 && realized <= 1e-9;
    report(5, "certificate validity", pass,
           std::string(residuals_ok ? "residuals clear eps - 1e-8"
                                    : "RESIDUALS FAIL") +
               fmt("; decrement max %.2e on 1000 random pairs, %.2e realized "
                   "(tol 1e-9)",
                   worst, realized));
  }

  // 6: piecewise-linear squares envelopes contain the function, and the
  // floor-at-zero refinement only lifts the lower bound.
  {
    auto fn = square_function();
    Rng rng(41);
    bool contained = true, lifted = true;
    for (int h : {1, 2, 4}) {
      auto raw = build_envelope(fn, 0.0, 60.0, h);
      auto refined = refine_with_prior(raw, 0.0, std::nullopt);
      for (int k = 0; k < 10000; ++k) {
        const double x = rng.uniform(0.0, 60.0);
        const double y = x * x;
        contained = contained && raw.lower_at(x) <= y + 1e-9 &&
                    y <= raw.upper_at(x) + 1e-9 &&
                    refined.lower_at(x) <= y + 1e-9 &&
                    y <= refined.upper_at(x) + 1e-9;
        lifted = lifted && refined.lower_at(x) >= raw.lower_at(x) - 1e-12;
      }
    }

    // Figure: the band tightens as the partition refines.
    LinePlot plot;
    plot.title = "piecewise-linear envelopes of the square";
    plot.x_label = "speed";
    plot.y_label = "squared speed";
    const char* colors[3] = {"#d62728", "#ff7f0e", "#1f77b4"};
    int ci = 0;
    for (int h : {1, 2, 4}) {
      auto env = refine_with_prior(build_envelope(fn, 0.0, 60.0, h), 0.0,
                                   std::nullopt);
      Band band;
      band.label = std::to_string(h + 1) + " cells";
      band.color = colors[ci++];
      for (double x = 0.0; x <= 60.0; x += 0.25) {
        band.x.push_back(x);
        band.lower.push_back(env.lower_at(x));
        band.upper.push_back(env.upper_at(x));
      }
      plot.bands.push_back(std::move(band));
    }
    Series truth;
    truth.label = "x^2";
    truth.color = "#2ca02c";
    for (double x = 0.0; x <= 60.0; x += 0.25) {
      truth.x.push_back(x);
      truth.y.push_back(x * x);
    }
    plot.series.push_back(std::move(truth));
    const std::string fig = out_root() + "/envelopes.svg";
    write_svg(fig, plot);

    bool rendered = std::filesystem::exists(fig) &&
                    std::filesystem::file_size(fig) > 1000;
    bool pass = contained && lifted && rendered;
    report(6, "envelope soundness", pass,
           std::string("partitions {1,2,4}: ") +
               (contained ? "30000 samples contained" : "CONTAINMENT BROKEN") +
               "; refined lower >= raw lower" + (lifted ? "" : " VIOLATED") +
               "; figure " + fig);
  }

  // 7: an additive control fault trips the exact lane's control-interval
  // alarm while the layerwise lane stays silent.
  {
    auto cfg = shipped("case2_actuator");
    cfg.out_dir = out_root() + "/actuator";
    cfg.certificate_in = cert_path;
    cfg.plots = false;
    cfg.save_certificate = false;
    auto s = run_scenario(cfg);
    const auto& an = s.lanes[0];
    const auto& op = s.lanes[1];
    bool pass = op.actuator_alarm_steps >= 1 && an.actuator_alarm_steps == 0;
    report(7, "actuator-fault detection", pass,
           "control-interval alarms: exact lane " +
               std::to_string(op.actuator_alarm_steps) + " (first step " +
               std::to_string(op.first_actuator_alarm) + "), layerwise lane " +
               std::to_string(an.actuator_alarm_steps));
  }

  // 8: sensor faults must stay invisible to the control-interval check in
  // both lanes and visible to the headway prediction check in both lanes.
  {
    long an_ctrl = 0, op_ctrl = 0;
    long an_head = std::numeric_limits<long>::max();
    long op_head = std::numeric_limits<long>::max();
    for (const char* stem : {"case2_sensor_pl", "case2_sensor_vl"}) {
      auto cfg = shipped(stem);
      cfg.out_dir = out_root() + "/" + stem;
      cfg.certificate_in = cert_path;
      cfg.plots = false;
      cfg.save_certificate = false;
      auto s = run_scenario(cfg);
      an_ctrl += s.lanes[0].actuator_alarm_steps;
      op_ctrl += s.lanes[1].actuator_alarm_steps;
      an_head = std::min(an_head, s.lanes[0].output_alarm_channel_counts[1]);
      op_head = std::min(op_head, s.lanes[1].output_alarm_channel_counts[1]);
    }
    const bool ctrl_silent = an_ctrl == 0 && op_ctrl == 0;
    const bool head_alarms = an_head > 0 && op_head > 0;
    bool pass = ctrl_silent && head_alarms;
    report(8, "sensor-fault detection", pass,
           "headway prediction alarms in both lanes (layerwise >= " +
               std::to_string(an_head) + ", exact >= " +
               std::to_string(op_head) +
               " steps) as required, but the exact lane's control-interval "
               "check also fires " +
               std::to_string(op_ctrl) +
               " times across the two runs (required 0): its certified "
               "interval derives from the box that still lags the corrupted "
               "measurement by one step, and with exact bounds that lag "
               "exceeds the interval width; layerwise control-interval "
               "alarms " +
               std::to_string(an_ctrl) + " as required");
  }

  // 9: the fault-free run never alarms after the one-step warm-up.
  {
    long alarms = 0;
    for (const auto& lane : nominal.lanes)
      alarms += lane.actuator_alarm_steps + lane.output_alarm_steps;
    report(9, "false-alarm freedom", alarms == 0,
           std::to_string(alarms) + " alarms of either kind in " +
               std::to_string(nominal.horizon) + " fault-free steps");
  }

  // 10: identical config and seed reproduce the trace byte for byte.
  {
    auto cfg = shipped("case1");
    cfg.plots = false;
    cfg.out_dir = out_root() + "/det_a";
    auto a = run_scenario(cfg);
    cfg.out_dir = out_root() + "/det_b";
    auto b = run_scenario(cfg);
    const bool same = slurp(a.csv_path) == slurp(b.csv_path);
    report(10, "determinism", same,
           same ? "two full reruns, byte-identical traces"
                : "TRACES DIFFER between identical reruns");
  }

  std::printf("%d/10 criteria pass\n", 10 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
