#include <doctest.h>

#include <cmath>

#include "eit/errors.hpp"
#include "eit/jacobian.hpp"
#include "eit/recon_linear.hpp"
#include "eit/rng.hpp"

using namespace eit;

namespace {

struct Setup {
  Mesh mesh = build_disk_mesh(1.0, 16, 0.45, 400);
  ElectrodeModel electrodes = ElectrodeModel::uniform(16, 1e-2);
  CurrentPatterns patterns = adjacent_patterns(16, 0.002);
};

}  // namespace

TEST_CASE("smoothness prior: diagonal, decay, positive definiteness") {
  const Setup su;
  const SmoothnessPrior prior = build_smoothness_prior(su.mesh, 0.15 * 0.15, 0.2);
  const int m = su.mesh.element_count();
  for (int i = 0; i < m; i += 37)
    CHECK(prior.covariance(i, i) == doctest::Approx(0.0225).epsilon(1e-6));

  // entries decay monotonically with centroid distance
  const Eigen::MatrixX2d centers = element_centroids(su.mesh);
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int i = static_cast<int>(rng.uniform_index(m));
    const int j = static_cast<int>(rng.uniform_index(m));
    const int k = static_cast<int>(rng.uniform_index(m));
    const double dij = (centers.row(i) - centers.row(j)).norm();
    const double dik = (centers.row(i) - centers.row(k)).norm();
    if (dij < dik) CHECK(prior.covariance(i, j) >= prior.covariance(i, k));
  }

  // SPD: Cholesky succeeds and inverse power iteration finds a positive
  // smallest eigenvalue.
  const auto& llt = prior.factor();
  CHECK(llt.info() == Eigen::Success);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m).normalized();
  double lambda_inv = 0.0;
  for (int it = 0; it < 50; ++it) {
    v = llt.solve(v);
    lambda_inv = v.norm();
    v /= lambda_inv;
  }
  CHECK(1.0 / lambda_inv > 0.0);
}

TEST_CASE("prior rejects bad parameters") {
  const Setup su;
  CHECK_THROWS_AS(build_smoothness_prior(su.mesh, 0.0, 0.2), ValidationError);
  CHECK_THROWS_AS(build_smoothness_prior(su.mesh, 0.1, -1.0), ValidationError);
}

TEST_CASE("linearized reconstruction: baseline data gives zero update") {
  const Setup su;
  const SmoothnessPrior prior = build_smoothness_prior(su.mesh, 0.0225, 0.2);
  const LinearizedReconstructor lin(su.mesh, su.electrodes, su.patterns, 1.31, 1.0, prior);

  MeasurementFrame frame;
  frame.voltages = lin.baseline();
  frame.n_patterns = 16;
  frame.n_electrodes = 16;
  frame.delta = 0.0;
  const Eigen::VectorXd delta = lin.reconstruct(frame);
  CHECK(delta.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("alpha to infinity drives the update to zero monotonically") {
  const Setup su;
  const SmoothnessPrior prior = build_smoothness_prior(su.mesh, 0.0225, 0.2);
  const Jacobian j0 = compute_jacobian(su.mesh, Conductivity::homogeneous(su.mesh, 1.31),
                                       su.electrodes, su.patterns);
  const CemSystem system = assemble_cem_system(
      su.mesh, Conductivity::homogeneous(su.mesh, 1.31), su.electrodes);
  MeasurementFrame baseline = make_frame(solve_forward(system, su.patterns), su.patterns, "t");

  Conductivity truth = Conductivity::homogeneous(su.mesh, 1.31);
  for (int e = 0; e < su.mesh.element_count(); ++e)
    if ((element_centroid(su.mesh, e) - Eigen::Vector2d(0.3, 0.1)).norm() < 0.3)
      truth.values[e] = 2.5;
  const CemSystem sys_truth = assemble_cem_system(su.mesh, truth, su.electrodes);
  MeasurementFrame data = make_frame(solve_forward(sys_truth, su.patterns), su.patterns, "t");

  NoiseModel noise;
  noise.stddev = 1.0;
  double prev = 1e300;
  for (double alpha : {1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4}) {
    const Eigen::VectorXd delta = linearized_reconstruct(j0, baseline, data, alpha, noise, prior);
    const double norm = delta.norm();
    CHECK(norm < prev);
    prev = norm;
  }
  // and the limit is zero
  const Eigen::VectorXd tiny =
      linearized_reconstruct(j0, baseline, data, 1e12, noise, prior);
  CHECK(tiny.norm() < 1e-6);
}

TEST_CASE("update is linear in the data residual") {
  const Setup su;
  const SmoothnessPrior prior = build_smoothness_prior(su.mesh, 0.0225, 0.2);
  const LinearizedReconstructor lin(su.mesh, su.electrodes, su.patterns, 1.31, 1e-2, prior);

  Rng rng(5);
  Eigen::VectorXd residual(16 * 16);
  for (int i = 0; i < residual.size(); ++i) residual[i] = 1e-4 * rng.normal();

  MeasurementFrame f1, f2;
  f1.voltages = lin.baseline() + residual;
  f2.voltages = lin.baseline() + 3.0 * residual;
  f1.n_patterns = f2.n_patterns = 16;
  f1.n_electrodes = f2.n_electrodes = 16;
  NoiseModel noise;
  noise.stddev = 1.0;
  const Eigen::VectorXd d1 = lin.reconstruct(f1, noise);
  const Eigen::VectorXd d2 = lin.reconstruct(f2, noise);
  CHECK((d2 - 3.0 * d1).cwiseAbs().maxCoeff() < 1e-10 * d2.cwiseAbs().maxCoeff());
}

TEST_CASE("solution satisfies the normal-equation optimality system") {
  const Setup su;
  const SmoothnessPrior prior = build_smoothness_prior(su.mesh, 0.0225, 0.2);
  const LinearizedReconstructor lin(su.mesh, su.electrodes, su.patterns, 1.31, 0.5, prior);

  Rng rng(6);
  MeasurementFrame data;
  data.voltages = lin.baseline();
  for (int i = 0; i < data.voltages.size(); ++i) data.voltages[i] *= 1.0 + 0.05 * rng.normal();
  data.n_patterns = data.n_electrodes = 16;
  NoiseModel noise;
  noise.stddev = 2.5e-5;

  const Eigen::VectorXd delta = lin.reconstruct(data, noise);
  const Eigen::MatrixXd& j = lin.jacobian().matrix;
  const Eigen::VectorXd residual = data.voltages - lin.baseline();
  const double inv_var = 1.0 / (noise.stddev * noise.stddev);
  const Eigen::VectorXd rhs = inv_var * (j.transpose() * residual);
  const Eigen::VectorXd lhs =
      inv_var * (j.transpose() * (j * delta)) + lin.alpha() * prior.apply_inverse(delta);
  CHECK((lhs - rhs).norm() <= 1e-8 * rhs.norm());
}
