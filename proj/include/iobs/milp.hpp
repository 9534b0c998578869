#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "iobs/interval.hpp"
#include "iobs/network.hpp"
#include "iobs/simplex.hpp"

namespace iobs {

// Exact ReLU output bounds via a big-M mixed-integer encoding, solved by
// depth-first branch-and-bound over the unstable neurons with an LP
// relaxation at each node.

enum class BoundSense { Min, Max };

enum class BoundStatus { Optimal, Infeasible, IterationLimit };

struct BoundResult {
  double value = 0.0;
  Eigen::VectorXd witness;  // an input achieving value (best found)
  BoundStatus status = BoundStatus::Infeasible;
  long nodes_explored = 0;
};

struct MilpEncoding {
  LinearProgram lp;  // costs already oriented for the requested sense

  struct SigmaRef {
    int var;     // LP variable index
    int layer;   // hidden layer (0-based)
    int neuron;  // row within the layer
  };

  std::vector<int> input_vars;
  std::vector<SigmaRef> sigmas;  // ordered by (layer, neuron)
  BoundSense sense = BoundSense::Min;
  double objective_scale = 1.0;     // +1 for min, -1 for max
  double objective_constant = 0.0;  // output-layer bias term

  // Set when the input box has zero width everywhere: the answer is a
  // single forward pass and no LP is ever solved.
  std::optional<double> pinned_value;
  Eigen::VectorXd pinned_input;

  long node_budget = 100000;

  int num_binaries() const { return static_cast<int>(sigmas.size()); }
};

// Builds the encoding for output component `output_index`. `bounds` must
// come from preactivation_bounds(net, input); its layer intervals double
// as the big-M constants. Unstable neurons get one relaxed binary each,
// stable neurons are substituted in place.
MilpEncoding encode(const FeedforwardNetworkXd& net,
                    const IntervalVectorXd& input, const LayerBoundsXd& bounds,
                    int output_index, BoundSense sense,
                    long node_budget = 100000);

// Bound of the LP relaxation under a partial binary assignment: entry -1
// leaves a sigma free in [0,1], 0 or 1 pins it. Returns nothing when the
// pinned pattern is infeasible. The value is <= the true optimum for
// sense Min and >= it for Max.
std::optional<double> relaxation_bound(const MilpEncoding& enc,
                                       const std::vector<int>& fixed);

// Depth-first branch-and-bound. Branches on the sigma farthest from an
// integer (ties: lowest (layer, neuron)), prunes nodes whose relaxation
// cannot improve the incumbent by more than 1e-9. On budget exhaustion
// the returned value is still a valid (one-sided) bound.
BoundResult solve_bound(const MilpEncoding& enc);

// Stacked [solve_bound(min), solve_bound(max)] per output dimension.
IntervalVectorXd output_interval(const FeedforwardNetworkXd& net,
                                 const IntervalVectorXd& input,
                                 long node_budget = 100000);

// Same, but keeps the per-bound diagnostics (2 * output_dim results,
// ordered min then max per dimension).
struct OutputIntervalReport {
  IntervalVectorXd box;
  std::vector<BoundResult> details;
  long total_nodes = 0;
};

OutputIntervalReport output_interval_report(const FeedforwardNetworkXd& net,
                                            const IntervalVectorXd& input,
                                            long node_budget = 100000);

}  // namespace iobs
