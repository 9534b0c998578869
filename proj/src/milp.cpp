#include "iobs/milp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace iobs {

namespace {

constexpr double kIntegralityTol = 1e-6;
constexpr double kIncumbentTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct NodeSolution {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;  // objective in the original sense
  Eigen::VectorXd x;
};

NodeSolution solve_node(const MilpEncoding& enc,
                        const std::vector<std::int8_t>& fixed) {
  LinearProgram lp = enc.lp;
  for (std::size_t i = 0; i < enc.sigmas.size(); ++i) {
    if (fixed[i] < 0) continue;
    const double v = fixed[i];
    lp.set_bounds(enc.sigmas[i].var, v, v);
  }
  LpResult r = lp.solve();
  NodeSolution out;
  out.status = r.status;
  if (r.status == LpStatus::Unbounded)
    throw internal_error("relaxation of a boxed network cannot be unbounded");
  if (r.status == LpStatus::Optimal) {
    out.value = enc.objective_scale * r.objective + enc.objective_constant;
    out.x = std::move(r.x);
  }
  return out;
}

Eigen::VectorXd extract_witness(const MilpEncoding& enc,
                                const Eigen::VectorXd& x) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(enc.input_vars.size()));
  for (std::size_t d = 0; d < enc.input_vars.size(); ++d) {
    const int var = enc.input_vars[d];
    // Clip solver round-off so the witness stays inside the box.
    w[static_cast<Eigen::Index>(d)] =
        std::clamp(x[var], enc.lp.lower_bound(var), enc.lp.upper_bound(var));
  }
  return w;
}

}  // namespace

MilpEncoding encode(const FeedforwardNetworkXd& net,
                    const IntervalVectorXd& input, const LayerBoundsXd& bounds,
                    int output_index, BoundSense sense, long node_budget) {
  net.validate();
  if (input.size() != net.input_dim())
    throw invalid_input("encode: input box dimension mismatch");
  if (output_index < 0 || output_index >= net.output_dim())
    throw invalid_input("encode: output index out of range");
  const Eigen::Index hidden = net.num_layers() - 1;
  if (static_cast<Eigen::Index>(bounds.pre_lower.size()) != hidden)
    throw invalid_input("encode: layer bounds do not match the network");

  MilpEncoding enc;
  enc.sense = sense;
  enc.objective_scale = sense == BoundSense::Min ? 1.0 : -1.0;
  enc.node_budget = node_budget;

  if (width(input).maxCoeff() == 0.0) {
    enc.pinned_input = input.lower();
    enc.pinned_value = forward(net, enc.pinned_input)[output_index];
    return enc;
  }

  std::vector<int> prev;
  prev.reserve(static_cast<std::size_t>(input.size()));
  for (Eigen::Index d = 0; d < input.size(); ++d)
    prev.push_back(enc.lp.add_variable(input.lower()[d], input.upper()[d]));
  enc.input_vars = prev;

  for (Eigen::Index i = 0; i < hidden; ++i) {
    const Eigen::MatrixXd& w = net.weights[static_cast<std::size_t>(i)];
    const Eigen::VectorXd& b = net.biases[static_cast<std::size_t>(i)];
    std::vector<int> cur;
    cur.reserve(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index j = 0; j < w.rows(); ++j) {
      const double lhat = bounds.pre_lower[static_cast<std::size_t>(i)][j];
      const double uhat = bounds.pre_upper[static_cast<std::size_t>(i)][j];
      const NeuronPhase phase = classify_neuron(lhat, uhat);

      if (phase == NeuronPhase::Inactive) {
        cur.push_back(enc.lp.add_variable(0.0, 0.0));
        continue;
      }

      std::vector<std::pair<int, double>> affine;  // z - W z_prev
      affine.reserve(prev.size() + 2);
      const int z = phase == NeuronPhase::Active
                        ? enc.lp.add_variable(lhat, uhat)
                        : enc.lp.add_variable(0.0, uhat);
      affine.emplace_back(z, 1.0);
      for (Eigen::Index k = 0; k < w.cols(); ++k)
        if (w(j, k) != 0.0)
          affine.emplace_back(prev[static_cast<std::size_t>(k)], -w(j, k));

      if (phase == NeuronPhase::Active) {
        enc.lp.add_row(affine, 0, b[j]);  // z = z-hat
      } else {
        const int sigma = enc.lp.add_variable(0.0, 1.0);
        enc.sigmas.push_back({sigma, static_cast<int>(i), static_cast<int>(j)});
        enc.lp.add_row(affine, 1, b[j]);  // z >= z-hat
        enc.lp.add_row({{z, 1.0}, {sigma, -uhat}}, -1, 0.0);  // z <= u-hat sigma
        auto upper = affine;
        upper.emplace_back(sigma, -lhat);
        enc.lp.add_row(upper, -1, b[j] - lhat);  // z <= z-hat - l-hat (1 - sigma)
      }
      cur.push_back(z);
    }
    prev = std::move(cur);
  }

  const Eigen::MatrixXd& wl = net.weights.back();
  for (Eigen::Index k = 0; k < wl.cols(); ++k)
    enc.lp.set_cost(prev[static_cast<std::size_t>(k)],
                    enc.objective_scale * wl(output_index, k));
  enc.objective_constant = net.biases.back()[output_index];
  return enc;
}

std::optional<double> relaxation_bound(const MilpEncoding& enc,
                                       const std::vector<int>& fixed) {
  if (fixed.size() != enc.sigmas.size())
    throw invalid_input("relaxation_bound: assignment length mismatch");
  if (enc.pinned_value) return enc.pinned_value;
  std::vector<std::int8_t> f(fixed.size());
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (fixed[i] < -1 || fixed[i] > 1)
      throw invalid_input("relaxation_bound: assignments must be -1, 0 or 1");
    f[i] = static_cast<std::int8_t>(fixed[i]);
  }
  const NodeSolution sol = solve_node(enc, f);
  if (sol.status != LpStatus::Optimal) return std::nullopt;
  return sol.value;
}

BoundResult solve_bound(const MilpEncoding& enc) {
  if (enc.pinned_value) {
    BoundResult out;
    out.value = *enc.pinned_value;
    out.witness = enc.pinned_input;
    out.status = BoundStatus::Optimal;
    out.nodes_explored = 0;
    return out;
  }

  const bool minimizing = enc.sense == BoundSense::Min;
  const double worst = minimizing ? kInf : -kInf;
  const auto improves = [&](double candidate, double reference) {
    return minimizing ? candidate < reference - kIncumbentTol
                      : candidate > reference + kIncumbentTol;
  };

  struct Node {
    std::vector<std::int8_t> fixed;
    double bound;
  };
  std::vector<Node> stack;
  stack.push_back({std::vector<std::int8_t>(enc.sigmas.size(), -1),
                   minimizing ? -kInf : kInf});

  double incumbent = worst;
  Eigen::VectorXd incumbent_x;
  long nodes = 0;

  while (!stack.empty()) {
    if (nodes >= enc.node_budget) {
      // Fold the open nodes into a still-valid one-sided bound.
      double valid = incumbent;
      if (std::isfinite(incumbent))
        valid += minimizing ? -kIncumbentTol : kIncumbentTol;
      for (const Node& open : stack)
        valid = minimizing ? std::min(valid, open.bound)
                           : std::max(valid, open.bound);
      BoundResult out;
      out.value = valid;
      out.witness = incumbent_x;
      out.status = BoundStatus::IterationLimit;
      out.nodes_explored = nodes;
      return out;
    }

    Node node = std::move(stack.back());
    stack.pop_back();
    if (std::isfinite(incumbent) && !improves(node.bound, incumbent)) continue;

    const NodeSolution sol = solve_node(enc, node.fixed);
    ++nodes;
    if (sol.status != LpStatus::Optimal) continue;
    if (std::isfinite(incumbent) && !improves(sol.value, incumbent)) continue;

    int branch = -1;
    double branch_dist = kIntegralityTol;
    for (std::size_t i = 0; i < enc.sigmas.size(); ++i) {
      if (node.fixed[i] >= 0) continue;
      const double v = sol.x[enc.sigmas[i].var];
      const double dist = std::abs(v - std::round(v));
      if (dist > branch_dist) {
        branch_dist = dist;
        branch = static_cast<int>(i);
      }
    }

    if (branch < 0) {
      // All binaries integral: this relaxation value is attained by the
      // network itself.
      incumbent = sol.value;
      incumbent_x = extract_witness(enc, sol.x);
      continue;
    }

    const double v = sol.x[enc.sigmas[static_cast<std::size_t>(branch)].var];
    const std::int8_t preferred = v > 0.5 ? 1 : 0;
    Node off = node, on = std::move(node);
    off.fixed[static_cast<std::size_t>(branch)] =
        static_cast<std::int8_t>(1 - preferred);
    on.fixed[static_cast<std::size_t>(branch)] = preferred;
    off.bound = sol.value;
    on.bound = sol.value;
    stack.push_back(std::move(off));
    stack.push_back(std::move(on));  // preferred child explored first
  }

  BoundResult out;
  out.nodes_explored = nodes;
  if (!std::isfinite(incumbent)) {
    out.status = BoundStatus::Infeasible;
    out.value = worst;
    return out;
  }
  out.status = BoundStatus::Optimal;
  out.value = incumbent;
  out.witness = std::move(incumbent_x);
  return out;
}

OutputIntervalReport output_interval_report(const FeedforwardNetworkXd& net,
                                            const IntervalVectorXd& input,
                                            long node_budget) {
  const LayerBoundsXd bounds = preactivation_bounds(net, input);
  const Eigen::Index m = net.output_dim();
  Eigen::VectorXd lo(m), hi(m);
  OutputIntervalReport report;
  report.details.reserve(static_cast<std::size_t>(2 * m));
  for (Eigen::Index j = 0; j < m; ++j) {
    for (const BoundSense sense : {BoundSense::Min, BoundSense::Max}) {
      const MilpEncoding enc =
          encode(net, input, bounds, static_cast<int>(j), sense, node_budget);
      BoundResult r = solve_bound(enc);
      if (r.status == BoundStatus::Infeasible)
        throw internal_error("bound solve reported an infeasible network");
      if (!std::isfinite(r.value))
        throw budget_exhausted("node budget too small to produce a finite bound");
      (sense == BoundSense::Min ? lo[j] : hi[j]) = r.value;
      report.total_nodes += r.nodes_explored;
      report.details.push_back(std::move(r));
    }
  }
  report.box = IntervalVectorXd(lo, hi);
  return report;
}

IntervalVectorXd output_interval(const FeedforwardNetworkXd& net,
                                 const IntervalVectorXd& input,
                                 long node_budget) {
  return output_interval_report(net, input, node_budget).box;
}

}  // namespace iobs
