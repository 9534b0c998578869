#include <fstream>

#include <json.hpp>

#include "iobs/network.hpp"

namespace iobs {

using nlohmann::json;

FeedforwardNetworkXd load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open network file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error("network file " + path + ": " + e.what());
  }
  if (!j.contains("weights") || !j.contains("biases"))
    throw config_error("network file " + path + ": missing weights or biases");

  FeedforwardNetworkXd net;
  for (const auto& layer : j["weights"]) {
    const std::size_t rows = layer.size();
    if (rows == 0) throw config_error("network file: empty weight matrix");
    const std::size_t cols = layer[0].size();
    Eigen::MatrixXd w(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      if (layer[r].size() != cols)
        throw config_error("network file: ragged weight matrix");
      for (std::size_t c = 0; c < cols; ++c) w(r, c) = layer[r][c].get<double>();
    }
    net.weights.push_back(std::move(w));
  }
  for (const auto& layer : j["biases"]) {
    Eigen::VectorXd b(layer.size());
    for (std::size_t i = 0; i < layer.size(); ++i) b(i) = layer[i].get<double>();
    net.biases.push_back(std::move(b));
  }
  try {
    net.validate();
  } catch (const invalid_input& e) {
    throw config_error("network file " + path + ": " + e.what());
  }
  return net;
}

void save_network(const FeedforwardNetworkXd& net, const std::string& path) {
  json j;
  for (const auto& w : net.weights) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
      rows.push_back(row);
    }
    j["weights"].push_back(rows);
  }
  for (const auto& b : net.biases) {
    json row = json::array();
    for (Eigen::Index i = 0; i < b.size(); ++i) row.push_back(b(i));
    j["biases"].push_back(row);
  }
  std::ofstream out(path);
  if (!out) throw config_error("cannot write network file: " + path);
  out << j.dump(1) << "\n";
}

}  // namespace iobs
