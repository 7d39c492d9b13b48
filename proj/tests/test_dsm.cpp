#include <doctest.h>

#include <cmath>

#include "eit/dsm.hpp"
#include "eit/rng.hpp"

using namespace eit;

namespace {

struct Setup {
  Mesh mesh = build_disk_mesh(1.0, 16, 0.45, 400);
  ElectrodeModel electrodes = ElectrodeModel::uniform(16, 1e-2);
  CurrentPatterns patterns = adjacent_patterns(16, 0.002);

  Eigen::MatrixXd voltages_for(const Conductivity& sigma) const {
    const CemSystem system = assemble_cem_system(mesh, sigma, electrodes);
    return solve_forward(system, patterns).electrode_voltages;
  }
};

}  // namespace

TEST_CASE("zero voltage difference lifts to identically zero fields") {
  const Setup su;
  const Conductivity unit = Conductivity::homogeneous(su.mesh, 1.0);
  const LiftedField lift =
      lift_cauchy_difference(su.mesh, su.electrodes, unit, Eigen::MatrixXd::Zero(16, 16));
  CHECK(lift.nodal.cwiseAbs().maxCoeff() == 0.0);
  CHECK(dsm_index(lift, su.mesh).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lifting is linear in the voltage differences") {
  const Setup su;
  const Conductivity unit = Conductivity::homogeneous(su.mesh, 1.0);
  Rng rng(7);
  Eigen::MatrixXd diff_a(16, 16), diff_b(16, 16);
  for (int k = 0; k < 16; ++k)
    for (int l = 0; l < 16; ++l) {
      diff_a(k, l) = 1e-4 * rng.normal();
      diff_b(k, l) = 1e-4 * rng.normal();
    }
  const LiftedField la = lift_cauchy_difference(su.mesh, su.electrodes, unit, diff_a);
  const LiftedField lb = lift_cauchy_difference(su.mesh, su.electrodes, unit, diff_b);
  const LiftedField lab =
      lift_cauchy_difference(su.mesh, su.electrodes, unit, (2.0 * diff_a + 3.0 * diff_b).eval());
  const double scale = lab.nodal.cwiseAbs().maxCoeff();
  CHECK((lab.nodal - 2.0 * la.nodal - 3.0 * lb.nodal).cwiseAbs().maxCoeff() < 1e-10 * scale);
}

TEST_CASE("lifted fields reproduce their input charges (discrete flux recovery)") {
  const Setup su;
  const Conductivity unit = Conductivity::homogeneous(su.mesh, 1.0);
  Rng rng(9);
  Eigen::MatrixXd diff(4, 16);
  for (int k = 0; k < 4; ++k) {
    for (int l = 0; l < 16; ++l) diff(k, l) = 1e-3 * rng.normal();
    diff.row(k).array() -= diff.row(k).mean();  // mean-projected input
  }
  const LiftedField lift = lift_cauchy_difference(su.mesh, su.electrodes, unit, diff);

  // The discrete normal flux over electrode ell is row ell of B^T alpha + D V;
  // solve for V from the saddle equation residual.
  const CemSystem system = assemble_cem_system(su.mesh, unit, su.electrodes);
  for (int k = 0; k < 4; ++k) {
    Eigen::VectorXd nodal, electrode;
    system.solve_currents(diff.row(k).transpose(), nodal, electrode);
    const Eigen::VectorXd flux =
        system.coupling.transpose() * nodal +
        system.electrode_conductance.cwiseProduct(electrode);
    CHECK((flux - diff.row(k).transpose()).cwiseAbs().maxCoeff() <
          1e-9 * diff.row(k).cwiseAbs().maxCoeff());
    CHECK((lift.nodal.col(k) - nodal).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("index map: flat for homogeneous data, peaked inside an inclusion") {
  const Setup su;
  const Conductivity background = Conductivity::homogeneous(su.mesh, 1.31);
  const Eigen::MatrixXd u0 = su.voltages_for(background);

  // homogeneous truth, no noise: difference is zero, index flat zero
  const LiftedField flat = lift_cauchy_difference(
      su.mesh, su.electrodes, Conductivity::homogeneous(su.mesh, 1.0),
      (su.voltages_for(background) - u0).eval());
  CHECK(dsm_index(flat, su.mesh).cwiseAbs().maxCoeff() == 0.0);

  // single centered conductive inclusion
  Conductivity truth = background;
  for (int e = 0; e < su.mesh.element_count(); ++e)
    if (element_centroid(su.mesh, e).norm() < 0.3) truth.values[e] = 2.6;
  const Eigen::MatrixXd diff = su.voltages_for(truth) - u0;
  const LiftedField lift = lift_cauchy_difference(
      su.mesh, su.electrodes, Conductivity::homogeneous(su.mesh, 1.0), diff);
  const Eigen::VectorXd index = dsm_index(lift, su.mesh);

  CHECK(index.maxCoeff() == doctest::Approx(1.0));
  int argmax = 0;
  index.maxCoeff(&argmax);
  CHECK(su.mesh.nodes.row(argmax).norm() < 0.3);

  // peak dominates the boundary-region median by at least 2x
  std::vector<double> rim;
  for (int n = 0; n < su.mesh.node_count(); ++n)
    if (su.mesh.nodes.row(n).norm() > 0.75) rim.push_back(index[n]);
  std::nth_element(rim.begin(), rim.begin() + rim.size() / 2, rim.end());
  CHECK(index.maxCoeff() >= 2.0 * rim[rim.size() / 2]);
}

TEST_CASE("index map is invariant under scaling of the measurement residual") {
  const Setup su;
  const Conductivity unit = Conductivity::homogeneous(su.mesh, 1.0);
  Rng rng(17);
  Eigen::MatrixXd diff(16, 16);
  for (int k = 0; k < 16; ++k)
    for (int l = 0; l < 16; ++l) diff(k, l) = 1e-4 * rng.normal();
  const Eigen::VectorXd a =
      dsm_index(lift_cauchy_difference(su.mesh, su.electrodes, unit, diff), su.mesh);
  const Eigen::VectorXd b = dsm_index(
      lift_cauchy_difference(su.mesh, su.electrodes, unit, (37.0 * diff).eval()), su.mesh);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}
