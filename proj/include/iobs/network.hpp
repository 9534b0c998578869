#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "iobs/errors.hpp"
#include "iobs/interval.hpp"

namespace iobs {

// L-layer feedforward ReLU network. Hidden layers apply ReLU, the last
// layer is affine.
template <typename Scalar>
struct FeedforwardNetwork {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  Eigen::Index num_layers() const {
    return static_cast<Eigen::Index>(weights.size());
  }
  Eigen::Index input_dim() const { return weights.front().cols(); }
  Eigen::Index output_dim() const { return weights.back().rows(); }

  void validate() const {
    if (weights.size() != biases.size())
      throw invalid_input("network: weight/bias count mismatch");
    if (weights.size() < 2)
      throw invalid_input("network: need at least one hidden layer");
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i].rows() != biases[i].size())
        throw invalid_input("network: bias dimension mismatch at layer " +
                            std::to_string(i));
      if (i > 0 && weights[i].cols() != weights[i - 1].rows())
        throw invalid_input("network: weight chain broken at layer " +
                            std::to_string(i));
    }
  }
};

using FeedforwardNetworkXd = FeedforwardNetwork<double>;

// Pre- and post-activation interval bounds per hidden layer.
template <typename Scalar>
struct LayerBounds {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  std::vector<Vector> pre_lower, pre_upper;    // l-hat, u-hat
  std::vector<Vector> post_lower, post_upper;  // relu of the above
};

using LayerBoundsXd = LayerBounds<double>;

enum class NeuronPhase { Active, Inactive, Unstable };

// Ties classify as stable: l-hat = 0 is Active, u-hat = 0 is Inactive.
template <typename Scalar>
NeuronPhase classify_neuron(Scalar pre_lower, Scalar pre_upper) {
  if (pre_lower >= Scalar(0)) return NeuronPhase::Active;
  if (pre_upper <= Scalar(0)) return NeuronPhase::Inactive;
  return NeuronPhase::Unstable;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> forward(
    const FeedforwardNetwork<Scalar>& net,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& z0) {
  if (z0.size() != net.input_dim())
    throw invalid_input("forward: input dimension mismatch");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z = z0;
  const Eigen::Index last = net.num_layers() - 1;
  for (Eigen::Index i = 0; i < last; ++i)
    z = (net.weights[i] * z + net.biases[i]).cwiseMax(Scalar(0));
  return net.weights[last] * z + net.biases[last];
}

// Interval-arithmetic pre-activation recursion:
//   l-hat_i = W+ l_{i-1} - W- u_{i-1} + b_i
//   u-hat_i = -W- l_{i-1} + W+ u_{i-1} + b_i
template <typename Scalar>
LayerBounds<Scalar> preactivation_bounds(const FeedforwardNetwork<Scalar>& net,
                                         const IntervalVector<Scalar>& input) {
  if (input.size() != net.input_dim())
    throw invalid_input("preactivation_bounds: input dimension mismatch");
  LayerBounds<Scalar> out;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lo = input.lower(), hi = input.upper();
  const Eigen::Index hidden = net.num_layers() - 1;
  for (Eigen::Index i = 0; i < hidden; ++i) {
    auto split = split_matrix(net.weights[i]);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lhat =
        split.pos * lo - split.neg * hi + net.biases[i];
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> uhat =
        -split.neg * lo + split.pos * hi + net.biases[i];
    out.pre_lower.push_back(lhat);
    out.pre_upper.push_back(uhat);
    lo = lhat.cwiseMax(Scalar(0));
    hi = uhat.cwiseMax(Scalar(0));
    out.post_lower.push_back(lo);
    out.post_upper.push_back(hi);
  }
  return out;
}

// Coupled auxiliary recursion over both endpoints; the output layer is
// affine without the ReLU clamp.
template <typename Scalar>
IntervalVector<Scalar> an_bounds(const FeedforwardNetwork<Scalar>& net,
                                 const IntervalVector<Scalar>& input) {
  if (input.size() != net.input_dim())
    throw invalid_input("an_bounds: input dimension mismatch");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lo = input.lower(), hi = input.upper();
  const Eigen::Index last = net.num_layers() - 1;
  for (Eigen::Index i = 0; i < last; ++i) {
    auto split = split_matrix(net.weights[i]);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> next_lo =
        (split.pos * lo - split.neg * hi + net.biases[i]).cwiseMax(Scalar(0));
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> next_hi =
        (-split.neg * lo + split.pos * hi + net.biases[i]).cwiseMax(Scalar(0));
    lo = next_lo;
    hi = next_hi;
  }
  auto split = split_matrix(net.weights[last]);
  return IntervalVector<Scalar>(
      split.pos * lo - split.neg * hi + net.biases[last],
      -split.neg * lo + split.pos * hi + net.biases[last]);
}

// JSON file format: {"weights": [[...row-major...]], "biases": [[...]]},
// layers ordered input to output.
FeedforwardNetworkXd load_network(const std::string& path);
void save_network(const FeedforwardNetworkXd& net, const std::string& path);

}  // namespace iobs
