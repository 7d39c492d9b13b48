#include "eit/jacobian.hpp"

#include <vector>

#include "eit/errors.hpp"

namespace eit {

namespace {

Jacobian jacobian_from_solves(const Mesh& mesh, const Conductivity& sigma,
                              const CemSystem& system, const CurrentPatterns& patterns,
                              const ForwardSolution& forward) {
  const int K = patterns.n_patterns();
  const int L = system.n_electrodes;
  const int M = sigma.basis == SigmaBasis::element_constant ? mesh.element_count()
                                                            : mesh.node_count();

  // Auxiliary fields: unit charge on each electrode.
  Eigen::MatrixXd aux(system.n_nodes, L);
  Eigen::VectorXd nodal, electrode;
  for (int ell = 0; ell < L; ++ell) {
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(L);
    unit[ell] = 1.0;
    system.solve_currents(unit, nodal, electrode);
    aux.col(ell) = nodal;
  }

  Jacobian jac;
  jac.basis = sigma.basis;
  jac.linearization_point = sigma.values;
  jac.matrix = Eigen::MatrixXd::Zero(K * L, M);

  Eigen::MatrixXd grad_u(2, K), grad_w(2, L);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    const Eigen::Matrix<double, 2, 3> g = p1_gradients(mesh, e);
    grad_u.setZero();
    grad_w.setZero();
    for (int a = 0; a < 3; ++a) {
      grad_u += g.col(a) * forward.nodal_potentials.row(el[a]);
      grad_w += g.col(a) * aux.row(el[a]);
    }
    // inner(k, ell) = grad u_k . grad w_ell on this element
    const Eigen::MatrixXd inner = grad_u.transpose() * grad_w;
    const double area = mesh.element_areas[e];
    if (sigma.basis == SigmaBasis::element_constant) {
      for (int k = 0; k < K; ++k)
        jac.matrix.col(e).segment(k * L, L) -= area * inner.row(k).transpose();
    } else {
      for (int a = 0; a < 3; ++a)
        for (int k = 0; k < K; ++k)
          jac.matrix.col(el[a]).segment(k * L, L) -= (area / 3.0) * inner.row(k).transpose();
    }
  }
  return jac;
}

}  // namespace

Jacobian compute_jacobian(const Mesh& mesh, const Conductivity& sigma,
                          const ElectrodeModel& electrodes, const CurrentPatterns& patterns) {
  const CemSystem system = assemble_cem_system(mesh, sigma, electrodes);
  const ForwardSolution forward = solve_forward(system, patterns);
  return jacobian_from_solves(mesh, sigma, system, patterns, forward);
}

Jacobian compute_jacobian(const ForwardOperator& op) {
  return jacobian_from_solves(op.mesh(), op.sigma(), op.system(), op.patterns(), op.solution());
}

Eigen::VectorXd jacobian_vector_product(const ForwardOperator& op,
                                        const Eigen::VectorXd& direction, SigmaBasis basis) {
  const Mesh& mesh = op.mesh();
  const CemSystem& system = op.system();
  const int K = op.patterns().n_patterns();
  const int L = system.n_electrodes;
  const int expected =
      basis == SigmaBasis::element_constant ? mesh.element_count() : mesh.node_count();
  if (direction.size() != expected)
    throw DimensionError("jacobian_vector_product: direction length mismatch");

  Eigen::VectorXd result(K * L);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(system.n_nodes + L + 1);
  for (int k = 0; k < K; ++k) {
    // rhs = dA(direction) * u_k on the nodal block.
    rhs.setZero();
    for (int e = 0; e < mesh.element_count(); ++e) {
      const auto el = mesh.elements.row(e);
      double coef;
      if (basis == SigmaBasis::element_constant)
        coef = direction[e];
      else
        coef = (direction[el[0]] + direction[el[1]] + direction[el[2]]) / 3.0;
      if (coef == 0.0) continue;
      const Eigen::Matrix<double, 2, 3> g = p1_gradients(mesh, e);
      Eigen::Vector2d grad_u = Eigen::Vector2d::Zero();
      for (int a = 0; a < 3; ++a) grad_u += g.col(a) * op.solution().nodal_potentials(el[a], k);
      const Eigen::Vector2d flux = coef * mesh.element_areas[e] * grad_u;
      for (int a = 0; a < 3; ++a) rhs[el[a]] += g.col(a).dot(flux);
    }
    const Eigen::VectorXd x = system.solve_raw(rhs);
    result.segment(k * L, L) = -x.segment(system.n_nodes, L);
  }
  return result;
}

AdjointSolution adjoint_solve(const CemSystem& system, const Eigen::MatrixXd& residual) {
  if (residual.cols() != system.n_electrodes)
    throw DimensionError("adjoint_solve: residual row length != electrode count");
  const int K = static_cast<int>(residual.rows());
  AdjointSolution adj;
  adj.nodal.resize(system.n_nodes, K);
  adj.electrode.resize(K, system.n_electrodes);
  Eigen::VectorXd nodal, electrode;
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd r = residual.row(k).transpose();
    r.array() -= r.mean();  // the CEM admits only mean-free injections
    system.solve_currents(r, nodal, electrode);
    adj.nodal.col(k) = nodal;
    adj.electrode.row(k) = electrode.transpose();
  }
  return adj;
}

namespace {

Eigen::VectorXd misfit_gradient(const ForwardSolution& forward, const AdjointSolution& adjoint,
                                const Mesh& mesh, SigmaBasis basis) {
  if (forward.nodal_potentials.cols() != adjoint.nodal.cols())
    throw DimensionError("gradient_data_fit: pattern count mismatch");
  const int K = static_cast<int>(forward.nodal_potentials.cols());
  const int M = basis == SigmaBasis::element_constant ? mesh.element_count() : mesh.node_count();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(M);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    const Eigen::Matrix<double, 2, 3> g = p1_gradients(mesh, e);
    double dot = 0.0;
    for (int k = 0; k < K; ++k) {
      Eigen::Vector2d gu = Eigen::Vector2d::Zero(), gp = Eigen::Vector2d::Zero();
      for (int a = 0; a < 3; ++a) {
        gu += g.col(a) * forward.nodal_potentials(el[a], k);
        gp += g.col(a) * adjoint.nodal(el[a], k);
      }
      dot += gu.dot(gp);
    }
    const double value = -mesh.element_areas[e] * dot;
    if (basis == SigmaBasis::element_constant) {
      grad[e] = value;
    } else {
      for (int a = 0; a < 3; ++a) grad[el[a]] += value / 3.0;
    }
  }
  return grad;
}

}  // namespace

Eigen::VectorXd gradient_data_fit(const ForwardSolution& forward, const AdjointSolution& adjoint,
                                  const Mesh& mesh) {
  return misfit_gradient(forward, adjoint, mesh, SigmaBasis::node_linear);
}

Eigen::VectorXd gradient_data_fit_p0(const ForwardSolution& forward,
                                     const AdjointSolution& adjoint, const Mesh& mesh) {
  return misfit_gradient(forward, adjoint, mesh, SigmaBasis::element_constant);
}

}  // namespace eit
