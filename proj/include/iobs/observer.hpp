#pragma once

#include <Eigen/Dense>
#include <string>

#include "iobs/conic.hpp"
#include "iobs/interval.hpp"

namespace iobs {

// Discrete-time plant
//   x_{t+1} = A x_t + B u_t + F g(x_t) + w_t,   y_t = C x_t + v_t,
// with the controller fed the selection y^o = C_o y plus references.
struct SystemModel {
  Eigen::MatrixXd A;    // n x n
  Eigen::MatrixXd B;    // n x m
  Eigen::MatrixXd F;    // n x s (s may be 0)
  Eigen::MatrixXd C;    // p x n
  Eigen::MatrixXd C_o;  // l x p, block form [0 | I | 0]

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index s() const { return F.cols(); }
  Eigen::Index p() const { return C.rows(); }
  Eigen::Index l() const { return C_o.rows(); }
  Eigen::Index q() const { return m() + s() + p() + n(); }

  // Shape checks, the [0 | I | 0] selector form, and observability of
  // (A, C). Throws invalid_input.
  void validate() const;
};

// Gain certificate: a diagonal P > 0 and nonnegative H1, H2 with
// L_o = P^-1 H1 - P^-1 H2. The pos/neg parts are the certificate's own
// split (both factors nonnegative), not the sign split of L_o.
struct ObserverCertificate {
  Eigen::VectorXd P;   // diagonal entries, all > 0
  Eigen::MatrixXd H1;  // n x p, >= 0
  Eigen::MatrixXd H2;  // n x p, >= 0
  double rho = 0.0;
  double eps = 0.0;  // strictness margin the synthesis enforced

  Eigen::MatrixXd L_o, L_o_pos, L_o_neg;
};

// Independent recomputation of everything the certificate promises.
struct ResidualReport {
  double p_min = 0.0;            // min diagonal entry of P
  double rho = 0.0;
  double h_min = 0.0;            // min entry over H1 and H2
  double elementwise_min = 0.0;  // min entry of P A - (H1 - H2) C
  double a_o_min = 0.0;          // min entry of A - L_o C
  double lmi_min_eig = 0.0;      // smallest eigenvalue of the block matrix
  double split_error = 0.0;      // worst |P L_o_pos - H1|, |P L_o_neg - H2|,
                                 // |L_o - (L_o_pos - L_o_neg)| entry

  // Strict cones must clear eps - tol; elementwise signs may round to
  // -1e-10; the split must reproduce to 1e-8.
  bool passes(double eps, double tol = 1e-8) const {
    return p_min >= eps - tol && rho >= eps - tol && lmi_min_eig >= eps - tol &&
           h_min >= -1e-10 && elementwise_min >= -1e-10 &&
           a_o_min >= -1e-10 && split_error <= 1e-8;
  }

  std::string to_string() const;
};

// The 2n+q block matrix whose positive definiteness certifies the gain:
//   [ diag(P) - I      0        (P A - (H1-H2) C)^T ]
//   [      0        rho I_q          Dhat^T          ]
//   [     ...         ...           diag(P)          ]
// with Dhat = [P|B|, P|F|, H1+H2, diag(P)].
Eigen::MatrixXd certificate_block_matrix(const SystemModel& model,
                                         const Eigen::VectorXd& P,
                                         const Eigen::MatrixXd& H1,
                                         const Eigen::MatrixXd& H2, double rho);

// Minimizes rho over the strict cones (PSD block, P >= eps, rho >= eps)
// and the nonstrict elementwise rows. Throws synthesis_infeasible when no
// strictly feasible point exists, solver_failure when the interior-point
// loop cannot finish or the self-check fails.
ObserverCertificate synthesize(const SystemModel& model, double eps = 1e-6);

ResidualReport verify_certificate(const SystemModel& model,
                                  const ObserverCertificate& cert);

// Value of   V(dx') - V(dx) + dx.dx - rho xi.xi   with V(z) = z'Pz and
// dx' = (A - L_o C) dx + D xi, D = [|B|, |F|, L_o_pos + L_o_neg, I].
// A valid certificate keeps this nonpositive for every pair.
double lyapunov_decrement(const ObserverCertificate& cert,
                          const SystemModel& model, const Eigen::VectorXd& dx,
                          const Eigen::VectorXd& xi);

// Certificate file round-trip (model + certificate in one document).
struct CertificateFile {
  SystemModel model;
  ObserverCertificate cert;
};

void save_certificate(const std::string& path, const SystemModel& model,
                      const ObserverCertificate& cert);
CertificateFile load_certificate(const std::string& path);

}  // namespace iobs
