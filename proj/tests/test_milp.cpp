#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "iobs/milp.hpp"
#include "iobs/network.hpp"
#include "iobs/rng.hpp"

using namespace iobs;

namespace {

const std::string kDataDir = IOBS_DATA_DIR;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

FeedforwardNetworkXd tiny_net(double hidden_bias) {
  FeedforwardNetworkXd net;
  net.weights = {Eigen::MatrixXd::Constant(1, 1, 1.0),
                 Eigen::MatrixXd::Constant(1, 1, 2.0)};
  net.biases = {Eigen::VectorXd::Constant(1, hidden_bias),
                Eigen::VectorXd::Constant(1, 3.0)};
  return net;
}

// Extremum over every activation pattern, each solved as a fully-fixed
// relaxation. Exact by construction, so it is the reference the
// branch-and-bound must reproduce.
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
    for (int i = 0; i < k; ++i) fixed[static_cast<std::size_t>(i)] = (mask >> i) & 1;
    auto value = relaxation_bound(enc, fixed);
    if (!value) continue;
    best = sense == BoundSense::Min ? std::min(best, *value)
                                    : std::max(best, *value);
  }
  return best;
}

}  // namespace

TEST_CASE("stable neurons are substituted without binaries") {
  {
    auto net = tiny_net(5.0);  // pre-activation in [5, 6]: always active
    IntervalVectorXd box(vec({0}), vec({1}));
    auto bounds = preactivation_bounds(net, box);
    auto enc = encode(net, box, bounds, 0, BoundSense::Min);
    CHECK(enc.num_binaries() == 0);
    auto out = output_interval(net, box);
    CHECK(out.lower()[0] == doctest::Approx(13.0).epsilon(1e-9));
    CHECK(out.upper()[0] == doctest::Approx(15.0).epsilon(1e-9));
  }
  {
    auto net = tiny_net(-7.0);  // pre-activation in [-7, -6]: always off
    IntervalVectorXd box(vec({0}), vec({1}));
    auto bounds = preactivation_bounds(net, box);
    auto enc = encode(net, box, bounds, 0, BoundSense::Max);
    CHECK(enc.num_binaries() == 0);
    auto out = output_interval(net, box);
    CHECK(out.lower()[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(out.upper()[0] == doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("one unstable neuron is solved exactly") {
  auto net = tiny_net(0.0);  // 2*relu(x) + 3 over [-1, 1]
  IntervalVectorXd box(vec({-1}), vec({1}));
  auto bounds = preactivation_bounds(net, box);
  CHECK(encode(net, box, bounds, 0, BoundSense::Min).num_binaries() == 1);
  auto out = output_interval(net, box);
  CHECK(out.lower()[0] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(out.upper()[0] == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("3-5-2 network on the unit box matches frozen exact bounds") {
  auto net = load_network(kDataDir + "/nets/small_relu.json");
  IntervalVectorXd box(vec({-1, -1, -1}), vec({1, 1, 1}));
  auto bounds = preactivation_bounds(net, box);
  CHECK(encode(net, box, bounds, 0, BoundSense::Min).num_binaries() == 5);

  auto out = output_interval(net, box);
  CHECK(out.lower()[0] == doctest::Approx(-1.2818686357329887).epsilon(1e-9));
  CHECK(out.upper()[0] == doctest::Approx(-0.04387262999999997).epsilon(1e-9));
  CHECK(out.lower()[1] == doctest::Approx(-1.8416568300000002).epsilon(1e-9));
  CHECK(out.upper()[1] == doctest::Approx(0.12887761831093525).epsilon(1e-9));

  // Tighter than (or equal to) the coupled-recursion interval.
  CHECK(out.contained_in(an_bounds(net, box), 1e-9));
}

TEST_CASE("3-5-2 network on an offset box: frozen bounds and witnesses") {
  auto net = load_network(kDataDir + "/nets/small_relu.json");
  IntervalVectorXd box(vec({0.2, -0.5, -1.0}), vec({0.8, 0.1, 0.4}));
  auto bounds = preactivation_bounds(net, box);

  const double expected[2][2] = {
      {-1.0719, -0.44272535700000004},
      {-1.3124878047018884, -0.2090173780000001},
  };
  for (int j = 0; j < 2; ++j) {
    for (auto sense : {BoundSense::Min, BoundSense::Max}) {
      auto enc = encode(net, box, bounds, j, sense);
      auto r = solve_bound(enc);
      REQUIRE(r.status == BoundStatus::Optimal);
      const double want = expected[j][sense == BoundSense::Min ? 0 : 1];
      CHECK(r.value == doctest::Approx(want).epsilon(1e-9));
      REQUIRE(r.witness.size() == 3);
      CHECK(box.contains(r.witness, 1e-9));
      CHECK(forward(net, r.witness)[j] == doctest::Approx(r.value).epsilon(1e-6));
      CHECK(r.nodes_explored >= 1);
    }
  }
}

TEST_CASE("branch-and-bound equals the 32-pattern enumeration") {
  auto net = load_network(kDataDir + "/nets/small_relu.json");
  for (auto& box : {IntervalVectorXd(vec({-1, -1, -1}), vec({1, 1, 1})),
                    IntervalVectorXd(vec({0.2, -0.5, -1.0}), vec({0.8, 0.1, 0.4}))}) {
    auto bounds = preactivation_bounds(net, box);
    for (int j = 0; j < 2; ++j) {
      for (auto sense : {BoundSense::Min, BoundSense::Max}) {
        auto enc = encode(net, box, bounds, j, sense);
        auto r = solve_bound(enc);
        REQUIRE(r.status == BoundStatus::Optimal);
        CHECK(r.value ==
              doctest::Approx(enumerate_bound(net, box, j, sense)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("relaxation bound dominates the exact optimum") {
  auto net = load_network(kDataDir + "/nets/small_relu.json");
  IntervalVectorXd box(vec({-1, -1, -1}), vec({1, 1, 1}));
  auto bounds = preactivation_bounds(net, box);
  for (int j = 0; j < 2; ++j) {
    auto enc_min = encode(net, box, bounds, j, BoundSense::Min);
    std::vector<int> all_free(static_cast<std::size_t>(enc_min.num_binaries()), -1);
    auto relax = relaxation_bound(enc_min, all_free);
    REQUIRE(relax.has_value());
    CHECK(*relax <= solve_bound(enc_min).value + 1e-9);

    auto enc_max = encode(net, box, bounds, j, BoundSense::Max);
    auto relax_max = relaxation_bound(enc_max, all_free);
    REQUIRE(relax_max.has_value());
    CHECK(*relax_max >= solve_bound(enc_max).value - 1e-9);
  }
}

TEST_CASE("ACC controller bounds on a wide and a narrow box") {
  auto net = load_network(kDataDir + "/nets/acc_controller.json");
  IntervalVectorXd wide(vec({1.4, 30, 19, 38, -2}), vec({1.4, 30, 21, 42, 2}));
  auto bounds = preactivation_bounds(net, wide);
  CHECK(encode(net, wide, bounds, 0, BoundSense::Min).num_binaries() == 3);

  auto out = output_interval(net, wide);
  CHECK(out.lower()[0] == doctest::Approx(-1.145277750000016).epsilon(1e-9));
  CHECK(out.upper()[0] == doctest::Approx(7.502388799458512).epsilon(1e-9));
  CHECK(out.contained_in(an_bounds(net, wide), 1e-9));

  IntervalVectorXd narrow(vec({1.4, 30, 19.9, 39.99, -0.11}),
                          vec({1.4, 30, 20.1, 40.01, 0.11}));
  auto out2 = output_interval(net, narrow);
  CHECK(out2.lower()[0] == doctest::Approx(3.1306112664999883).epsilon(1e-9));
  CHECK(out2.upper()[0] == doctest::Approx(3.659078755499987).epsilon(1e-9));
  CHECK(out2.contained_in(an_bounds(net, narrow), 1e-9));

  Rng rng(5);
  for (int s = 0; s < 2000; ++s) {
    Eigen::VectorXd z(5);
    for (int i = 0; i < 5; ++i)
      z[i] = rng.uniform(wide.lower()[i], wide.upper()[i]);
    const double y = forward(net, z)[0];
    CHECK(y >= out.lower()[0] - 1e-9);
    CHECK(y <= out.upper()[0] + 1e-9);
  }
}

TEST_CASE("degenerate boxes shortcut to a forward pass") {
  auto net = load_network(kDataDir + "/nets/acc_controller.json");
  auto point = vec({1.4, 30, 20, 40, 0});
  auto box = IntervalVectorXd::degenerate(point);
  auto bounds = preactivation_bounds(net, box);
  auto enc = encode(net, box, bounds, 0, BoundSense::Min);
  auto r = solve_bound(enc);
  CHECK(r.status == BoundStatus::Optimal);
  CHECK(r.nodes_explored == 0);
  CHECK(r.value == doctest::Approx(3.3905782099999775).epsilon(1e-12));
  CHECK(r.witness == point);
}

TEST_CASE("node budget exhaustion still returns a valid one-sided bound") {
  auto net = load_network(kDataDir + "/nets/small_relu.json");
  IntervalVectorXd box(vec({-1, -1, -1}), vec({1, 1, 1}));
  auto bounds = preactivation_bounds(net, box);

  auto enc_min = encode(net, box, bounds, 0, BoundSense::Min, 1);
  auto r_min = solve_bound(enc_min);
  CHECK(r_min.status == BoundStatus::IterationLimit);
  CHECK(r_min.nodes_explored <= 1);
  CHECK(r_min.value <= -1.2818686357329887 + 1e-9);

  auto enc_max = encode(net, box, bounds, 0, BoundSense::Max, 1);
  auto r_max = solve_bound(enc_max);
  CHECK(r_max.status == BoundStatus::IterationLimit);
  CHECK(r_max.value >= -0.04387262999999997 - 1e-9);
}

TEST_CASE("bad arguments are rejected") {
  auto net = load_network(kDataDir + "/nets/small_relu.json");
  IntervalVectorXd box(vec({-1, -1, -1}), vec({1, 1, 1}));
  auto bounds = preactivation_bounds(net, box);
  CHECK_THROWS_AS(encode(net, box, bounds, 2, BoundSense::Min), invalid_input);
  CHECK_THROWS_AS(encode(net, box, bounds, -1, BoundSense::Min), invalid_input);
  IntervalVectorXd small(vec({0}), vec({1}));
  CHECK_THROWS_AS(encode(net, small, bounds, 0, BoundSense::Min), invalid_input);

  auto enc = encode(net, box, bounds, 0, BoundSense::Min);
  CHECK_THROWS_AS(relaxation_bound(enc, {0, 1}), invalid_input);
  CHECK_THROWS_AS(relaxation_bound(enc, {0, 1, 2, 0, 0}), invalid_input);
}

TEST_CASE("output_interval agrees with per-component solves") {
  auto net = load_network(kDataDir + "/nets/small_relu.json");
  IntervalVectorXd box(vec({-0.3, -0.7, 0.1}), vec({0.5, 0.2, 0.9}));
  auto report = output_interval_report(net, box);
  REQUIRE(report.details.size() == 4);
  auto bounds = preactivation_bounds(net, box);
  for (int j = 0; j < 2; ++j) {
    auto lo = solve_bound(encode(net, box, bounds, j, BoundSense::Min));
    auto hi = solve_bound(encode(net, box, bounds, j, BoundSense::Max));
    CHECK(report.box.lower()[j] == doctest::Approx(lo.value).epsilon(1e-12));
    CHECK(report.box.upper()[j] == doctest::Approx(hi.value).epsilon(1e-12));
  }
  long sum = 0;
  for (const auto& d : report.details) sum += d.nodes_explored;
  CHECK(report.total_nodes == sum);
}
