#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cstdio>
#include <filesystem>

#include "iobs/observer.hpp"
#include "iobs/rng.hpp"

using namespace iobs;

namespace {

SystemModel scalar_model() {
  SystemModel m;
  m.A = Eigen::MatrixXd::Constant(1, 1, 0.5);
  m.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  m.F = Eigen::MatrixXd(1, 0);
  m.C = Eigen::MatrixXd::Constant(1, 1, 1.0);
  m.C_o = Eigen::MatrixXd::Constant(1, 1, 1.0);
  return m;
}

SystemModel cruise_model() {
  const double ts = 0.1, mu = 1e-4;
  Eigen::MatrixXd Ac = Eigen::MatrixXd::Zero(6, 6);
  Ac(0, 1) = 1; Ac(1, 2) = 1; Ac(2, 2) = -2;
  Ac(3, 4) = 1; Ac(4, 5) = 1; Ac(5, 5) = -2;
  Eigen::MatrixXd Bc = Eigen::MatrixXd::Zero(6, 1);
  Bc(5, 0) = 2;
  Eigen::MatrixXd Fc = Eigen::MatrixXd::Zero(6, 2);
  Fc(2, 0) = -mu; Fc(5, 1) = -mu;

  SystemModel m;
  m.A = Eigen::MatrixXd::Identity(6, 6) + ts * Ac;
  m.B = ts * Bc;
  m.F = ts * Fc;
  m.C = Eigen::MatrixXd::Zero(4, 6);
  m.C(0, 3) = 1; m.C(1, 4) = 1;
  m.C(2, 0) = 1; m.C(2, 3) = -1;
  m.C(3, 1) = 1; m.C(3, 4) = -1;
  m.C_o = Eigen::MatrixXd::Zero(3, 4);
  m.C_o(0, 1) = 1; m.C_o(1, 2) = 1; m.C_o(2, 3) = 1;
  return m;
}

// Independently solved optimum for cruise_model (external SDP solver).
constexpr double kCruiseRho = 26.282120302513857;
const double kCruisePDiag[6] = {1.000001, 1.000001, 5.256427,
                                1.000001, 1.000001, 5.054253};

// The decrement is homogeneous quadratic in (dx, xi); polarization
// recovers its matrix exactly.
Eigen::MatrixXd decrement_form(const ObserverCertificate& cert,
                               const SystemModel& model) {
  const Eigen::Index n = model.n(), q = model.q(), d = n + q;
  auto at = [&](const Eigen::VectorXd& z) {
    return lyapunov_decrement(cert, model, z.head(n), z.tail(q));
  };
  Eigen::MatrixXd M(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd ei = Eigen::VectorXd::Unit(d, i);
    const double qi = at(ei);
    M(i, i) = qi;
    for (Eigen::Index j = i + 1; j < d; ++j) {
      Eigen::VectorXd ej = Eigen::VectorXd::Unit(d, j);
      const double qij = at(ei + ej);
      M(i, j) = M(j, i) = 0.5 * (qij - qi - at(ej));
    }
  }
  return M;
}

}  // namespace

TEST_CASE("scalar plant synthesizes to the known optimum") {
  auto m = scalar_model();
  auto cert = synthesize(m);
  CHECK(cert.rho == doctest::Approx(2.25).epsilon(1e-3));
  CHECK(cert.eps == 1e-6);
  CHECK(cert.P[0] > 0.0);
  auto rep = verify_certificate(m, cert);
  CHECK(rep.passes(cert.eps));
  CHECK(m.A(0, 0) - cert.L_o(0, 0) * m.C(0, 0) >= -1e-10);
}

TEST_CASE("cruise model synthesizes to the externally solved optimum") {
  auto m = cruise_model();
  m.validate();
  auto cert = synthesize(m);
  CHECK(cert.rho == doctest::Approx(kCruiseRho).epsilon(1e-4));
  for (int i = 0; i < 6; ++i)
    CHECK(cert.P[i] == doctest::Approx(kCruisePDiag[i]).epsilon(1e-3));
  auto rep = verify_certificate(m, cert);
  INFO(rep.to_string());
  CHECK(rep.passes(cert.eps));
  // Acceleration states are unmeasured; their gain rows stay empty.
  CHECK(cert.L_o.row(2).cwiseAbs().maxCoeff() <= 1e-5);
  CHECK(cert.L_o.row(5).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("synthesis is deterministic") {
  auto m = scalar_model();
  auto a = synthesize(m);
  auto b = synthesize(m);
  CHECK(a.rho == b.rho);
  CHECK((a.P.array() == b.P.array()).all());
  CHECK((a.H1.array() == b.H1.array()).all());
  CHECK((a.H2.array() == b.H2.array()).all());
}

TEST_CASE("decrement form is negative semidefinite at the optimum") {
  auto m = cruise_model();
  auto cert = synthesize(m);

  Eigen::VectorXd dx0 = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd xi0 = Eigen::VectorXd::Zero(13);
  CHECK(lyapunov_decrement(cert, m, dx0, xi0) == 0.0);

  Rng rng(29);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd dx(6), xi(13);
    for (int k = 0; k < 6; ++k) dx[k] = rng.uniform(-1.0, 1.0);
    for (int k = 0; k < 13; ++k) xi[k] = rng.uniform(-1.0, 1.0);
    CHECK(lyapunov_decrement(cert, m, dx, xi) <= 1e-9);
  }

  Eigen::MatrixXd M = decrement_form(cert, m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  CHECK(es.eigenvalues().maxCoeff() <= 1e-9);

  // Halving the disturbance budget must break the guarantee, and the top
  // eigenvector of the halved form exhibits the violation.
  ObserverCertificate weak = cert;
  weak.rho *= 0.5;
  Eigen::MatrixXd Mw = decrement_form(weak, m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esw(Mw);
  CHECK(esw.eigenvalues().maxCoeff() > 1e-3);
  Eigen::VectorXd top = esw.eigenvectors().col(18);
  CHECK(lyapunov_decrement(weak, m, top.head(6), top.tail(13)) > 1e-6);
  CHECK_FALSE(verify_certificate(m, weak).passes(weak.eps));
}

TEST_CASE("verification rejects corrupted certificates") {
  auto m = scalar_model();
  auto cert = synthesize(m);

  ObserverCertificate swapped = cert;
  std::swap(swapped.H1, swapped.H2);
  CHECK_FALSE(verify_certificate(m, swapped).passes(swapped.eps));

  ObserverCertificate scaled = cert;
  scaled.P *= 2.0;
  CHECK_FALSE(verify_certificate(m, scaled).passes(scaled.eps));
}

TEST_CASE("plants without a nonnegative observable gain are refused") {
  SystemModel bad;
  bad.A = Eigen::MatrixXd::Identity(2, 2);
  bad.A(0, 1) = -0.5;
  bad.B = Eigen::MatrixXd::Zero(2, 1);
  bad.F = Eigen::MatrixXd(2, 0);
  bad.C = Eigen::MatrixXd::Zero(1, 2);
  bad.C(0, 0) = 1.0;
  bad.C_o = Eigen::MatrixXd::Constant(1, 1, 1.0);
  bad.validate();
  CHECK_THROWS_AS(synthesize(bad), synthesis_infeasible);
}

TEST_CASE("model validation screens shapes and the output selector") {
  SystemModel m = scalar_model();
  m.C_o = Eigen::MatrixXd::Constant(1, 1, 0.5);
  CHECK_THROWS_AS(m.validate(), invalid_input);

  SystemModel unobs;
  unobs.A = Eigen::MatrixXd::Identity(2, 2);
  unobs.B = Eigen::MatrixXd::Zero(2, 1);
  unobs.F = Eigen::MatrixXd(2, 0);
  unobs.C = Eigen::MatrixXd::Zero(1, 2);
  unobs.C(0, 0) = 1.0;
  unobs.C_o = Eigen::MatrixXd::Constant(1, 1, 1.0);
  CHECK_THROWS_AS(unobs.validate(), invalid_input);

  SystemModel shapes = scalar_model();
  shapes.B = Eigen::MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(shapes.validate(), invalid_input);
}

TEST_CASE("certificate files round-trip bit for bit") {
  auto m = cruise_model();
  auto cert = synthesize(m);
  const auto path =
      (std::filesystem::temp_directory_path() / "iobs_cert_roundtrip.json")
          .string();
  save_certificate(path, m, cert);
  auto back = load_certificate(path);
  std::filesystem::remove(path);

  CHECK(back.cert.rho == cert.rho);
  CHECK(back.cert.eps == cert.eps);
  CHECK((back.cert.P.array() == cert.P.array()).all());
  CHECK((back.cert.H1.array() == cert.H1.array()).all());
  CHECK((back.cert.H2.array() == cert.H2.array()).all());
  CHECK((back.cert.L_o.array() == cert.L_o.array()).all());
  CHECK((back.model.A.array() == m.A.array()).all());
  CHECK((back.model.C.array() == m.C.array()).all());
  CHECK(back.model.F.cols() == m.F.cols());
  auto rep = verify_certificate(back.model, back.cert);
  CHECK(rep.passes(back.cert.eps));
}
