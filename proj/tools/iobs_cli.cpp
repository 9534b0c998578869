#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "iobs/milp.hpp"
#include "iobs/scenario.hpp"

namespace {

using namespace iobs;

IntervalVectorXd parse_box(const std::string& text) {
  std::vector<double> lo, hi;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ';')) {
    double a = 0, b = 0;
    if (std::sscanf(part.c_str(), "%lf,%lf", &a, &b) != 2)
      throw config_error("box must look like lo,hi;lo,hi;... got '" + part +
                         "'");
    lo.push_back(a);
    hi.push_back(b);
  }
  if (lo.empty()) throw config_error("box is empty");
  Eigen::VectorXd l(static_cast<Eigen::Index>(lo.size()));
  Eigen::VectorXd u(static_cast<Eigen::Index>(hi.size()));
  for (std::size_t i = 0; i < lo.size(); ++i) {
    l[static_cast<Eigen::Index>(i)] = lo[i];
    u[static_cast<Eigen::Index>(i)] = hi[i];
  }
  return IntervalVectorXd(l, u);
}

void print_interval(const char* label, const IntervalVectorXd& box) {
  std::printf("%s:", label);
  for (Eigen::Index i = 0; i < box.size(); ++i)
    std::printf(" [%.9g, %.9g]", box.lower()[i], box.upper()[i]);
  std::printf("\n");
}

int cmd_run(const std::string& config_path) {
  auto cfg = load_scenario(config_path);
  auto summary = run_scenario(cfg);
  std::printf("scenario %s: %ld steps\n", summary.name.c_str(),
              summary.horizon);
  for (const auto& lane : summary.lanes) {
    std::printf(
        "  %s: actuator alarms %ld (first %ld), output alarms %ld (first "
        "%ld), containment failures %ld\n",
        lane.method.c_str(), lane.actuator_alarm_steps,
        lane.first_actuator_alarm, lane.output_alarm_steps,
        lane.first_output_alarm, lane.containment_failures);
  }
  if (summary.lanes.size() == 2)
    std::printf("  exact bounds strictly tighter on %ld/%ld steps\n",
                summary.op_tighter_steps, summary.horizon);
  std::printf("  trace: %s\n", summary.csv_path.c_str());
  if (summary.unsound) {
    std::fprintf(stderr,
                 "iobs: true state left the certified interval; the run is "
                 "not sound\n");
    return exit_unsound;
  }
  return exit_ok;
}

int cmd_synth(const std::string& config_path) {
  auto cfg = load_scenario(config_path);
  ContinuousModel cont;
  if (cfg.model == "acc") {
    cont = build_acc_model(cfg.acc).continuous;
  } else {
    cont = cfg.inline_model;
  }
  auto disc = discretize(cont, cfg.ts, cfg.discretization);
  disc.model.validate();
  auto cert = synthesize(disc.model, cfg.synthesis_eps);
  auto report = verify_certificate(disc.model, cert);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/certificate.json";
  save_certificate(path, disc.model, cert);
  std::printf("rho = %.12g\n", cert.rho);
  std::printf("%s\n", report.to_string().c_str());
  std::printf("certificate: %s\n", path.c_str());
  return report.passes(cert.eps) ? exit_ok : exit_unsound;
}

int cmd_bounds(const std::string& net_path, const std::string& box_text,
               long budget) {
  auto net = load_network(net_path);
  auto box = parse_box(box_text);
  if (box.size() != net.weights.front().cols())
    throw config_error("network expects " +
                       std::to_string(net.weights.front().cols()) +
                       " inputs, box has " + std::to_string(box.size()));
  auto an = an_bounds(net, box);
  print_interval("auxiliary  ", an);
  auto op = output_interval_report(net, box, budget);
  for (const auto& d : op.details)
    if (d.status == BoundStatus::IterationLimit)
      throw budget_exhausted("node budget exhausted; bounds are one-sided");
  print_interval("optimization", op.box);
  std::printf("nodes: %ld\n", op.total_nodes);
  return exit_ok;
}

int cmd_verify(const std::string& cert_path) {
  auto file = load_certificate(cert_path);
  auto report = verify_certificate(file.model, file.cert);
  std::printf("rho = %.12g\n", file.cert.rho);
  std::printf("%s\n", report.to_string().c_str());
  if (!report.passes(file.cert.eps)) {
    std::fprintf(stderr, "iobs: certificate fails verification\n");
    return exit_unsound;
  }
  std::printf("certificate verifies\n");
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Interval observer toolkit for neural-network-controlled systems"};
  app.require_subcommand(1);
  app.footer("Set IOBS_LOG=info or IOBS_LOG=debug for progress output.");

  std::string config_path, net_path, box_text, cert_path;
  long budget = 100000;

  auto* run = app.add_subcommand("run", "Run a scenario end to end");
  run->add_option("config", config_path, "scenario JSON file")->required();

  auto* synth =
      app.add_subcommand("synth", "Synthesize and save an observer gain");
  synth->add_option("config", config_path, "scenario JSON file")->required();

  auto* bounds = app.add_subcommand(
      "bounds", "Bound a network's outputs over an input box");
  bounds->add_option("network", net_path, "network JSON file")->required();
  bounds->add_option("box", box_text, "input box lo,hi;lo,hi;...")->required();
  bounds->add_option("--budget", budget, "branch-and-bound node budget");

  auto* verify =
      app.add_subcommand("verify", "Re-check a saved observer certificate");
  verify->add_option("certificate", cert_path, "certificate JSON file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? iobs::exit_ok : iobs::exit_config;
  }

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (synth->parsed()) return cmd_synth(config_path);
    if (bounds->parsed()) return cmd_bounds(net_path, box_text, budget);
    return cmd_verify(cert_path);
  } catch (const iobs::config_error& e) {
    std::fprintf(stderr, "iobs: %s\n", e.what());
    return iobs::exit_config;
  } catch (const iobs::synthesis_infeasible& e) {
    std::fprintf(stderr, "iobs: %s\n", e.what());
    return iobs::exit_infeasible;
  } catch (const iobs::budget_exhausted& e) {
    std::fprintf(stderr, "iobs: %s\n", e.what());
    return iobs::exit_budget;
  } catch (const iobs::domain_escape& e) {
    std::fprintf(stderr,
                 "iobs: %s (declare a wider physical domain in the config)\n",
                 e.what());
    return iobs::exit_config;
  } catch (const iobs::invalid_input& e) {
    std::fprintf(stderr, "iobs: %s\n", e.what());
    return iobs::exit_config;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "iobs: %s\n", e.what());
    return iobs::exit_unsound;
  }
}
