#pragma once

#include <Eigen/Dense>

#include "eit/forward.hpp"
#include "eit/mesh.hpp"

namespace eit {

/// Derivative of the stacked electrode-voltage map with respect to the
/// conductivity coefficients. Rows are measurements (pattern-major, k*L+ell),
/// columns conductivity coefficients.
struct Jacobian {
  Eigen::MatrixXd matrix;
  SigmaBasis basis = SigmaBasis::element_constant;
  Eigen::VectorXd linearization_point;

  int rows() const { return static_cast<int>(matrix.rows()); }
  int cols() const { return static_cast<int>(matrix.cols()); }
};

/// Computes the Jacobian with K + L solves against one factorization:
/// entry ((k,ell), m) = -int_{supp m} grad u_k . grad w_ell, where w_ell is
/// the auxiliary solution for a unit charge on electrode ell.
Jacobian compute_jacobian(const Mesh& mesh, const Conductivity& sigma,
                          const ElectrodeModel& electrodes, const CurrentPatterns& patterns);

/// Same, reusing the operator's current factorization and forward solution.
Jacobian compute_jacobian(const ForwardOperator& op);

/// Exact directional derivative of the stacked voltages along a conductivity
/// direction (one solve per pattern, no Jacobian matrix).
Eigen::VectorXd jacobian_vector_product(const ForwardOperator& op,
                                        const Eigen::VectorXd& direction,
                                        SigmaBasis basis = SigmaBasis::element_constant);

struct AdjointSolution {
  Eigen::MatrixXd nodal;      // N x K adjoint potentials
  Eigen::MatrixXd electrode;  // K x L adjoint electrode values (mean-free)
};

/// Solves the CEM adjoint problem: same system, injected "currents" equal to
/// the per-pattern residual rows (mean-projected first).
AdjointSolution adjoint_solve(const CemSystem& system, const Eigen::MatrixXd& residual);

/// Gradient of psi(sigma) = 1/2 sum_k |U_k(sigma) - U_k^delta|^2 with respect
/// to P1 nodal conductivity coefficients: sum_k -grad u_k . grad p_k projected
/// onto the nodal basis (mass-weighted dual vector).
Eigen::VectorXd gradient_data_fit(const ForwardSolution& forward, const AdjointSolution& adjoint,
                                  const Mesh& mesh);

/// Same gradient with respect to P0 element coefficients.
Eigen::VectorXd gradient_data_fit_p0(const ForwardSolution& forward,
                                     const AdjointSolution& adjoint, const Mesh& mesh);

}  // namespace eit
