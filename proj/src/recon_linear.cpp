#include "eit/recon_linear.hpp"

#include <cmath>

#include "eit/errors.hpp"

namespace eit {

const Eigen::LLT<Eigen::MatrixXd>& SmoothnessPrior::factor() const {
  if (!llt_) {
    llt_ = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(covariance);
    if (llt_->info() != Eigen::Success)
      throw NumericalError("smoothness prior covariance is not positive definite");
  }
  return *llt_;
}

Eigen::VectorXd SmoothnessPrior::apply_inverse(const Eigen::VectorXd& x) const {
  return factor().solve(x);
}

SmoothnessPrior build_smoothness_prior(const Mesh& mesh, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw ValidationError("build_smoothness_prior: a and b must be positive");
  const Eigen::MatrixX2d centers = element_centroids(mesh);
  const int m = static_cast<int>(centers.rows());
  SmoothnessPrior prior;
  prior.a = a;
  prior.b = b;
  prior.jitter = 1e-8 * a;  // Gaussian kernels go numerically singular fast
  prior.covariance.resize(m, m);
  const double inv_len = 1.0 / ((2.0 * b) * (2.0 * b));
  for (int i = 0; i < m; ++i) {
    prior.covariance(i, i) = a + prior.jitter;
    for (int j = i + 1; j < m; ++j) {
      const double d2 = (centers.row(i) - centers.row(j)).squaredNorm();
      const double v = a * std::exp(-d2 * inv_len);
      prior.covariance(i, j) = v;
      prior.covariance(j, i) = v;
    }
  }
  return prior;
}

NoiseModel NoiseModel::from_frame(const MeasurementFrame& frame) {
  NoiseModel noise;
  const double scale = frame.delta * frame.voltages.cwiseAbs().mean();
  noise.stddev = scale > 0.0 ? scale : 1.0;
  return noise;
}

namespace {

Eigen::VectorXd solve_low_rank(const Eigen::MatrixXd& j, const Eigen::MatrixXd& cov_jt,
                               const Eigen::MatrixXd& core, const Eigen::MatrixXd& cov,
                               double beta, const Eigen::VectorXd& jt_r) {
  // (J^T J + beta C^-1)^-1 jt_r via the Woodbury identity; exact up to FP.
  const Eigen::VectorXd cv = cov.selfadjointView<Eigen::Lower>() * jt_r;
  Eigen::MatrixXd shifted = core;
  shifted.diagonal().array() += beta;
  const Eigen::VectorXd w = Eigen::LLT<Eigen::MatrixXd>(shifted).solve(j * cv);
  return (cv - cov_jt * w) / beta;
}

}  // namespace

LinearizedReconstructor::LinearizedReconstructor(const Mesh& mesh,
                                                 const ElectrodeModel& electrodes,
                                                 const CurrentPatterns& patterns,
                                                 double background, double alpha,
                                                 SmoothnessPrior prior)
    : background_(background), alpha_(alpha), prior_(std::move(prior)) {
  if (!(alpha > 0.0)) throw ValidationError("LinearizedReconstructor: alpha must be positive");
  const Conductivity sigma0 = Conductivity::homogeneous(mesh, background);
  const CemSystem system = assemble_cem_system(mesh, sigma0, electrodes);
  const ForwardSolution sol = solve_forward(system, patterns);
  baseline_ = sol.stacked();
  j0_ = compute_jacobian(mesh, sigma0, electrodes, patterns);
  cov_jt_.noalias() =
      prior_.covariance.selfadjointView<Eigen::Lower>() * j0_.matrix.transpose();
  core_.noalias() = j0_.matrix * cov_jt_;
}

Eigen::VectorXd LinearizedReconstructor::reconstruct(const MeasurementFrame& data) const {
  return reconstruct(data, NoiseModel::from_frame(data));
}

Eigen::VectorXd LinearizedReconstructor::reconstruct(const MeasurementFrame& data,
                                                     const NoiseModel& noise) const {
  if (data.voltages.size() != baseline_.size())
    throw DimensionError("linearized reconstruct: frame does not match pattern set");
  const Eigen::VectorXd residual = data.voltages - baseline_;
  const double beta = alpha_ * noise.stddev * noise.stddev;
  return solve_low_rank(j0_.matrix, cov_jt_, core_, prior_.covariance, beta,
                        j0_.matrix.transpose() * residual);
}

Eigen::VectorXd linearized_reconstruct(const Jacobian& j0, const MeasurementFrame& baseline,
                                       const MeasurementFrame& data, double alpha,
                                       const NoiseModel& noise, const SmoothnessPrior& prior) {
  if (!(alpha > 0.0)) throw ValidationError("linearized_reconstruct: alpha must be positive");
  if (baseline.voltages.size() != data.voltages.size() ||
      j0.rows() != static_cast<int>(data.voltages.size()))
    throw DimensionError("linearized_reconstruct: dimension mismatch");
  const Eigen::VectorXd residual = data.voltages - baseline.voltages;
  Eigen::MatrixXd cov_jt =
      prior.covariance.selfadjointView<Eigen::Lower>() * j0.matrix.transpose();
  Eigen::MatrixXd core = j0.matrix * cov_jt;
  const double beta = alpha * noise.stddev * noise.stddev;
  return solve_low_rank(j0.matrix, cov_jt, core, prior.covariance, beta,
                        j0.matrix.transpose() * residual);
}

}  // namespace eit
