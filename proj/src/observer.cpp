#include "iobs/observer.hpp"

#include <cmath>
#include <sstream>

#include "iobs/errors.hpp"
#include "iobs/log.hpp"

namespace iobs {

void SystemModel::validate() const {
  if (A.rows() != A.cols() || A.rows() == 0)
    throw invalid_input("model: A must be square and nonempty");
  if (B.rows() != n()) throw invalid_input("model: B row count mismatch");
  if (F.rows() != n()) throw invalid_input("model: F row count mismatch");
  if (C.cols() != n() || C.rows() == 0)
    throw invalid_input("model: C shape mismatch");
  if (C_o.cols() != p() || C_o.rows() == 0 || C_o.rows() > p())
    throw invalid_input("model: C_o shape mismatch");

  // Selector form [0 | I | 0]: each row has a single unit entry, the unit
  // columns are consecutive.
  Eigen::Index offset = -1;
  for (Eigen::Index j = 0; j < p(); ++j)
    if (C_o(0, j) != 0.0) {
      offset = j;
      break;
    }
  if (offset < 0 || offset + l() > p())
    throw invalid_input("model: C_o is not a selector");
  for (Eigen::Index i = 0; i < l(); ++i)
    for (Eigen::Index j = 0; j < p(); ++j) {
      const double want = j == offset + i ? 1.0 : 0.0;
      if (C_o(i, j) != want)
        throw invalid_input("model: C_o must have the block form [0 | I | 0]");
    }

  Eigen::MatrixXd obs(p() * n(), n());
  Eigen::MatrixXd ca = C;
  for (Eigen::Index i = 0; i < n(); ++i) {
    obs.middleRows(i * p(), p()) = ca;
    ca = ca * A;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(obs);
  if (lu.rank() < n())
    throw invalid_input("model: (A, C) is not observable");
}

Eigen::MatrixXd certificate_block_matrix(const SystemModel& model,
                                         const Eigen::VectorXd& P,
                                         const Eigen::MatrixXd& H1,
                                         const Eigen::MatrixXd& H2,
                                         double rho) {
  const Eigen::Index n = model.n(), q = model.q();
  const Eigen::MatrixXd pahc =
      P.asDiagonal() * model.A - (H1 - H2) * model.C;
  Eigen::MatrixXd dhat(n, q);
  dhat << P.asDiagonal() * model.B.cwiseAbs(),
      P.asDiagonal() * model.F.cwiseAbs(), H1 + H2,
      Eigen::MatrixXd(P.asDiagonal());

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n + q, 2 * n + q);
  m.topLeftCorner(n, n) =
      Eigen::MatrixXd(P.asDiagonal()) - Eigen::MatrixXd::Identity(n, n);
  m.block(n, n, q, q) = rho * Eigen::MatrixXd::Identity(q, q);
  m.block(0, n + q, n, n) = pahc.transpose();
  m.block(n + q, 0, n, n) = pahc;
  m.block(n, n + q, q, n) = dhat.transpose();
  m.block(n + q, n, n, q) = dhat;
  m.bottomRightCorner(n, n) = P.asDiagonal();
  return m;
}

namespace {

// Variable layout of the synthesis program.
struct Layout {
  Eigen::Index n, m, s, p, q;
  int rho() const { return 0; }
  int pvar(Eigen::Index i) const { return 1 + static_cast<int>(i); }
  int h1(Eigen::Index i, Eigen::Index k) const {
    return 1 + static_cast<int>(n) + static_cast<int>(i * p + k);
  }
  int h2(Eigen::Index i, Eigen::Index k) const {
    return 1 + static_cast<int>(n + n * p) + static_cast<int>(i * p + k);
  }
  int total() const { return 1 + static_cast<int>(n + 2 * n * p); }
};

void sym_add(Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c, double v) {
  m(r, c) += v;
  if (r != c) m(c, r) += v;
}

ConicProgram build_program(const SystemModel& model, double eps,
                           const Layout& lay) {
  const Eigen::Index n = lay.n, m_in = lay.m, s = lay.s, p = lay.p, q = lay.q;
  const Eigen::Index d = 2 * n + q;
  const Eigen::MatrixXd babs = model.B.cwiseAbs();
  const Eigen::MatrixXd fabs = model.F.cwiseAbs();

  ConicProgram prog;
  prog.cost = Eigen::VectorXd::Zero(lay.total());
  prog.cost[lay.rho()] = 1.0;

  prog.psd_constant = -eps * Eigen::MatrixXd::Identity(d, d);
  prog.psd_constant.topLeftCorner(n, n) -= Eigen::MatrixXd::Identity(n, n);

  prog.psd_coeff.assign(static_cast<std::size_t>(lay.total()),
                        Eigen::MatrixXd::Zero(d, d));
  auto& coeff = prog.psd_coeff;

  // rho multiplies the middle identity block.
  for (Eigen::Index i = 0; i < q; ++i)
    coeff[static_cast<std::size_t>(lay.rho())](n + i, n + i) = 1.0;

  for (Eigen::Index i = 0; i < n; ++i) {
    auto& cp = coeff[static_cast<std::size_t>(lay.pvar(i))];
    cp(i, i) += 1.0;                  // P - I block
    cp(n + q + i, n + q + i) += 1.0;  // trailing P block
    for (Eigen::Index j = 0; j < n; ++j)
      if (model.A(i, j) != 0.0) sym_add(cp, n + q + i, j, model.A(i, j));
    for (Eigen::Index j = 0; j < m_in; ++j)
      if (babs(i, j) != 0.0) sym_add(cp, n + q + i, n + j, babs(i, j));
    for (Eigen::Index j = 0; j < s; ++j)
      if (fabs(i, j) != 0.0) sym_add(cp, n + q + i, n + m_in + j, fabs(i, j));
    sym_add(cp, n + q + i, n + m_in + s + p + i, 1.0);  // P inside Dhat
  }

  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < p; ++k) {
      auto& c1 = coeff[static_cast<std::size_t>(lay.h1(i, k))];
      auto& c2 = coeff[static_cast<std::size_t>(lay.h2(i, k))];
      for (Eigen::Index j = 0; j < n; ++j)
        if (model.C(k, j) != 0.0) {
          sym_add(c1, n + q + i, j, -model.C(k, j));
          sym_add(c2, n + q + i, j, model.C(k, j));
        }
      sym_add(c1, n + q + i, n + m_in + s + k, 1.0);  // H1 + H2 inside Dhat
      sym_add(c2, n + q + i, n + m_in + s + k, 1.0);
    }

  // Linear rows: rho >= eps, P_i >= eps, H >= 0, and the elementwise sign
  // condition on P A - (H1 - H2) C. Rows with no variable support are
  // dropped once their constant is checked.
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> consts;
  {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(lay.total());
    row[lay.rho()] = 1.0;
    rows.push_back(row);
    consts.push_back(-eps);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(lay.total());
    row[lay.pvar(i)] = 1.0;
    rows.push_back(row);
    consts.push_back(-eps);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < p; ++k)
      for (int which = 0; which < 2; ++which) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(lay.total());
        row[which == 0 ? lay.h1(i, k) : lay.h2(i, k)] = 1.0;
        rows.push_back(row);
        consts.push_back(0.0);
      }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::VectorXd row = Eigen::VectorXd::Zero(lay.total());
      if (model.A(i, j) != 0.0) row[lay.pvar(i)] = model.A(i, j);
      for (Eigen::Index k = 0; k < p; ++k)
        if (model.C(k, j) != 0.0) {
          row[lay.h1(i, k)] = -model.C(k, j);
          row[lay.h2(i, k)] = model.C(k, j);
        }
      if (row.isZero(0.0)) continue;  // 0 >= 0 holds vacuously
      rows.push_back(row);
      consts.push_back(0.0);
    }

  prog.row_coeff.resize(static_cast<Eigen::Index>(rows.size()), lay.total());
  prog.row_constant.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    prog.row_coeff.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    prog.row_constant[static_cast<Eigen::Index>(r)] = consts[r];
  }
  return prog;
}

}  // namespace

ObserverCertificate synthesize(const SystemModel& model, double eps) {
  model.validate();
  if (!(eps > 0)) throw invalid_input("synthesize: eps must be positive");

  Layout lay{model.n(), model.m(), model.s(), model.p(), model.q()};
  const ConicProgram prog = build_program(model, eps, lay);
  log_info("synthesis: %d variables, PSD block %ld, %ld sign rows",
           lay.total(), static_cast<long>(2 * lay.n + lay.q),
           static_cast<long>(prog.row_coeff.rows()));

  const ConicSolution sol = solve_conic(prog);
  if (!sol.feasible) {
    std::ostringstream msg;
    msg << "no strictly feasible gain: required cone inflation "
        << sol.infeasibility;
    throw synthesis_infeasible(msg.str());
  }

  ObserverCertificate cert;
  cert.eps = eps;
  cert.rho = sol.y[lay.rho()];
  cert.P.resize(model.n());
  for (Eigen::Index i = 0; i < model.n(); ++i) cert.P[i] = sol.y[lay.pvar(i)];
  cert.H1.resize(model.n(), model.p());
  cert.H2.resize(model.n(), model.p());
  for (Eigen::Index i = 0; i < model.n(); ++i)
    for (Eigen::Index k = 0; k < model.p(); ++k) {
      cert.H1(i, k) = sol.y[lay.h1(i, k)];
      cert.H2(i, k) = sol.y[lay.h2(i, k)];
    }
  cert.L_o_pos = cert.P.cwiseInverse().asDiagonal() * cert.H1;
  cert.L_o_neg = cert.P.cwiseInverse().asDiagonal() * cert.H2;
  cert.L_o = cert.L_o_pos - cert.L_o_neg;

  const ResidualReport report = verify_certificate(model, cert);
  if (!report.passes(eps))
    throw solver_failure("synthesized certificate fails its own audit: " +
                         report.to_string());
  log_info("synthesis: rho %.9g after %d Newton steps", cert.rho,
           sol.newton_iters);
  return cert;
}

ResidualReport verify_certificate(const SystemModel& model,
                                  const ObserverCertificate& cert) {
  if (cert.P.size() != model.n() || cert.H1.rows() != model.n() ||
      cert.H1.cols() != model.p() || cert.H2.rows() != model.n() ||
      cert.H2.cols() != model.p())
    throw invalid_input("verify_certificate: shape mismatch");

  ResidualReport r;
  r.p_min = cert.P.minCoeff();
  r.rho = cert.rho;
  r.h_min = std::min(cert.H1.minCoeff(), cert.H2.minCoeff());
  r.elementwise_min =
      (cert.P.asDiagonal() * model.A - (cert.H1 - cert.H2) * model.C)
          .minCoeff();
  r.a_o_min = (model.A - cert.L_o * model.C).minCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      certificate_block_matrix(model, cert.P, cert.H1, cert.H2, cert.rho),
      Eigen::EigenvaluesOnly);
  r.lmi_min_eig = es.eigenvalues().minCoeff();

  double split = 0.0;
  split = std::max(split, (cert.P.asDiagonal() * cert.L_o_pos - cert.H1)
                              .cwiseAbs()
                              .maxCoeff());
  split = std::max(split, (cert.P.asDiagonal() * cert.L_o_neg - cert.H2)
                              .cwiseAbs()
                              .maxCoeff());
  split = std::max(
      split,
      (cert.L_o - (cert.L_o_pos - cert.L_o_neg)).cwiseAbs().maxCoeff());
  r.split_error = split;
  return r;
}

std::string ResidualReport::to_string() const {
  std::ostringstream out;
  out << "p_min=" << p_min << " rho=" << rho << " h_min=" << h_min
      << " elementwise_min=" << elementwise_min << " a_o_min=" << a_o_min
      << " lmi_min_eig=" << lmi_min_eig << " split_error=" << split_error;
  return out.str();
}

double lyapunov_decrement(const ObserverCertificate& cert,
                          const SystemModel& model, const Eigen::VectorXd& dx,
                          const Eigen::VectorXd& xi) {
  if (dx.size() != model.n())
    throw invalid_input("lyapunov_decrement: state dimension mismatch");
  if (xi.size() != model.q())
    throw invalid_input("lyapunov_decrement: disturbance dimension mismatch");

  const Eigen::Index n = model.n(), m = model.m(), s = model.s(), p = model.p();
  Eigen::MatrixXd d(n, model.q());
  d << model.B.cwiseAbs(), model.F.cwiseAbs(), cert.L_o_pos + cert.L_o_neg,
      Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd next = (model.A - cert.L_o * model.C) * dx + d * xi;
  (void)m;
  (void)s;
  (void)p;
  return next.dot(cert.P.asDiagonal() * next) -
         dx.dot(cert.P.asDiagonal() * dx) + dx.squaredNorm() -
         cert.rho * xi.squaredNorm();
}

}  // namespace iobs
