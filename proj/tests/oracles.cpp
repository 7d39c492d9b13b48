#include "oracles.hpp"

#include <array>
#include <cmath>

namespace eit::oracle {

namespace {

// Coefficients (c0, cx, cy) of the affine hat function of local vertex a.
Eigen::Vector3d hat_coeffs(const Mesh& mesh, int element, int local) {
  const auto el = mesh.elements.row(element);
  Eigen::Matrix3d vand;
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i)
    vand.row(i) << 1.0, mesh.nodes(el[i], 0), mesh.nodes(el[i], 1);
  rhs[local] = 1.0;
  return vand.fullPivLu().solve(rhs);
}

struct TriQuad {
  Eigen::Vector2d point;
  double weight;  // times element area
};

// Degree-2 exact midpoint rule.
std::array<TriQuad, 3> tri_rule(const Mesh& mesh, int element) {
  const auto el = mesh.elements.row(element);
  const Eigen::Vector2d a = mesh.nodes.row(el[0]);
  const Eigen::Vector2d b = mesh.nodes.row(el[1]);
  const Eigen::Vector2d c = mesh.nodes.row(el[2]);
  return {TriQuad{(a + b) / 2.0, 1.0 / 3.0}, TriQuad{(b + c) / 2.0, 1.0 / 3.0},
          TriQuad{(c + a) / 2.0, 1.0 / 3.0}};
}

double element_area_shoelace(const Mesh& mesh, int element) {
  const auto el = mesh.elements.row(element);
  const Eigen::Vector2d a = mesh.nodes.row(el[0]);
  const Eigen::Vector2d b = mesh.nodes.row(el[1]);
  const Eigen::Vector2d c = mesh.nodes.row(el[2]);
  return 0.5 * std::abs((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

}  // namespace

double hat_value(const Mesh& mesh, int element, int local, const Eigen::Vector2d& p) {
  const Eigen::Vector3d c = hat_coeffs(mesh, element, local);
  return c[0] + c[1] * p.x() + c[2] * p.y();
}

Eigen::Vector2d hat_gradient(const Mesh& mesh, int element, int local) {
  const Eigen::Vector3d c = hat_coeffs(mesh, element, local);
  return {c[1], c[2]};
}

DenseCem assemble_dense(const Mesh& mesh, const Conductivity& sigma,
                        const ElectrodeModel& electrodes) {
  const int n = mesh.node_count();
  const int l = electrodes.count();
  DenseCem dense;
  dense.admittance = Eigen::MatrixXd::Zero(n, n);
  dense.coupling = Eigen::MatrixXd::Zero(n, l);
  dense.conductance = Eigen::VectorXd::Zero(l);

  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    const double area = element_area_shoelace(mesh, e);
    Eigen::Vector2d grads[3];
    for (int a = 0; a < 3; ++a) grads[a] = hat_gradient(mesh, e, a);
    for (const TriQuad& q : tri_rule(mesh, e)) {
      double coef;
      if (sigma.basis == SigmaBasis::element_constant) {
        coef = sigma.values[e];
      } else {
        coef = 0.0;
        for (int a = 0; a < 3; ++a) coef += sigma.values[el[a]] * hat_value(mesh, e, a, q.point);
      }
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          dense.admittance(el[a], el[b]) += q.weight * area * coef * grads[a].dot(grads[b]);
    }
  }

  // 2-point Gauss on each electrode edge.
  const double gp = 1.0 / std::sqrt(3.0);
  for (int ell = 0; ell < l; ++ell) {
    const double zinv = 1.0 / electrodes.contact_impedance[ell];
    for (int edge : mesh.electrode_edges[ell]) {
      const int i = mesh.boundary_edges(edge, 0);
      const int j = mesh.boundary_edges(edge, 1);
      const Eigen::Vector2d a = mesh.nodes.row(i);
      const Eigen::Vector2d b = mesh.nodes.row(j);
      const double h = (b - a).norm();
      dense.conductance[ell] += zinv * h;
      for (double t : {-gp, gp}) {
        const double wa = (1.0 - t) / 2.0;  // hat of endpoint i along the edge
        const double wb = (1.0 + t) / 2.0;
        const double w = h / 2.0;
        dense.admittance(i, i) += zinv * w * wa * wa;
        dense.admittance(i, j) += zinv * w * wa * wb;
        dense.admittance(j, i) += zinv * w * wb * wa;
        dense.admittance(j, j) += zinv * w * wb * wb;
        dense.coupling(i, ell) -= zinv * w * wa;
        dense.coupling(j, ell) -= zinv * w * wb;
      }
    }
  }
  return dense;
}

Eigen::MatrixXd dense_forward_voltages(const Mesh& mesh, const Conductivity& sigma,
                                       const ElectrodeModel& electrodes,
                                       const CurrentPatterns& patterns) {
  const DenseCem blocks = assemble_dense(mesh, sigma, electrodes);
  const int n = mesh.node_count();
  const int l = electrodes.count();
  Eigen::MatrixXd saddle = Eigen::MatrixXd::Zero(n + l + 1, n + l + 1);
  saddle.topLeftCorner(n, n) = blocks.admittance;
  saddle.block(0, n, n, l) = blocks.coupling;
  saddle.block(n, 0, l, n) = blocks.coupling.transpose();
  saddle.block(n, n, l, l) = blocks.conductance.asDiagonal();
  saddle.block(n, n + l, l, 1).setOnes();
  saddle.block(n + l, n, 1, l).setOnes();

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(saddle);
  Eigen::MatrixXd voltages(patterns.n_patterns(), l);
  for (int k = 0; k < patterns.n_patterns(); ++k) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + l + 1);
    rhs.segment(n, l) = patterns.rows.row(k).transpose();
    voltages.row(k) = lu.solve(rhs).segment(n, l).transpose();
  }
  return voltages;
}

double h1_inner_quadrature(const Mesh& mesh, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  double total = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    const double area = element_area_shoelace(mesh, e);
    Eigen::Vector2d gu = Eigen::Vector2d::Zero(), gv = Eigen::Vector2d::Zero();
    for (int a = 0; a < 3; ++a) {
      gu += u[el[a]] * hat_gradient(mesh, e, a);
      gv += v[el[a]] * hat_gradient(mesh, e, a);
    }
    total += area * gu.dot(gv);
    for (const TriQuad& q : tri_rule(mesh, e)) {
      double uv = 0.0, vv = 0.0;
      for (int a = 0; a < 3; ++a) {
        uv += u[el[a]] * hat_value(mesh, e, a, q.point);
        vv += v[el[a]] * hat_value(mesh, e, a, q.point);
      }
      total += q.weight * area * uv * vv;
    }
  }
  return total;
}

}  // namespace eit::oracle
