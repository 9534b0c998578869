#include <fstream>

#include <json.hpp>

#include "iobs/errors.hpp"
#include "iobs/observer.hpp"

namespace iobs {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty())
    throw config_error("certificate file: " + name + " must be a 2-d array");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw config_error("certificate file: ragged matrix " + name);
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array())
    throw config_error("certificate file: " + name + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

void save_certificate(const std::string& path, const SystemModel& model,
                      const ObserverCertificate& cert) {
  json j;
  j["model"]["A"] = matrix_to_json(model.A);
  j["model"]["B"] = matrix_to_json(model.B);
  j["model"]["F"] = matrix_to_json(model.F);
  j["model"]["C"] = matrix_to_json(model.C);
  j["model"]["C_o"] = matrix_to_json(model.C_o);
  json p = json::array();
  for (Eigen::Index i = 0; i < cert.P.size(); ++i) p.push_back(cert.P[i]);
  j["certificate"]["P"] = p;
  j["certificate"]["H1"] = matrix_to_json(cert.H1);
  j["certificate"]["H2"] = matrix_to_json(cert.H2);
  j["certificate"]["rho"] = cert.rho;
  j["certificate"]["eps"] = cert.eps;

  std::ofstream out(path);
  if (!out) throw config_error("cannot write certificate file: " + path);
  out << j.dump(1) << "\n";
}

CertificateFile load_certificate(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open certificate file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error("certificate file " + path + ": " + e.what());
  }
  if (!j.contains("model") || !j.contains("certificate"))
    throw config_error("certificate file " + path +
                       ": missing model or certificate");

  CertificateFile file;
  try {
    const json& m = j["model"];
    file.model.A = matrix_from_json(m.at("A"), "A");
    file.model.B = matrix_from_json(m.at("B"), "B");
    file.model.F = m.contains("F") && !m["F"].empty()
                       ? matrix_from_json(m["F"], "F")
                       : Eigen::MatrixXd(file.model.A.rows(), 0);
    file.model.C = matrix_from_json(m.at("C"), "C");
    file.model.C_o = matrix_from_json(m.at("C_o"), "C_o");

    const json& c = j["certificate"];
    file.cert.P = vector_from_json(c.at("P"), "P");
    file.cert.H1 = matrix_from_json(c.at("H1"), "H1");
    file.cert.H2 = matrix_from_json(c.at("H2"), "H2");
    file.cert.rho = c.at("rho").get<double>();
    file.cert.eps = c.at("eps").get<double>();
  } catch (const json::exception& e) {
    throw config_error("certificate file " + path + ": " + e.what());
  }

  if (file.cert.P.size() != file.model.A.rows() ||
      (file.cert.P.array() <= 0.0).any())
    throw config_error("certificate file " + path +
                       ": P must be positive with one entry per state");
  file.cert.L_o_pos = file.cert.P.cwiseInverse().asDiagonal() * file.cert.H1;
  file.cert.L_o_neg = file.cert.P.cwiseInverse().asDiagonal() * file.cert.H2;
  file.cert.L_o = file.cert.L_o_pos - file.cert.L_o_neg;
  return file;
}

}  // namespace iobs
