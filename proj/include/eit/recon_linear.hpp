#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <memory>

#include "eit/jacobian.hpp"
#include "eit/mesh.hpp"
#include "eit/recon.hpp"

namespace eit {

/// Gaussian smoothness prior on element-constant coefficients:
/// cov(i,j) = a * exp(-|x_i - x_j|^2 / (2b)^2) at element centroids, with a
/// small recorded diagonal jitter so the matrix stays positive definite. The
/// regularizing matrix is R^T R = covariance^{-1} (applied via factorization).
struct SmoothnessPrior {
  Eigen::MatrixXd covariance;
  double a = 0.0;
  double b = 0.0;
  double jitter = 0.0;

  /// Cholesky factor of the covariance, computed on first use.
  const Eigen::LLT<Eigen::MatrixXd>& factor() const;
  /// covariance^{-1} * x.
  Eigen::VectorXd apply_inverse(const Eigen::VectorXd& x) const;

 private:
  mutable std::shared_ptr<Eigen::LLT<Eigen::MatrixXd>> llt_;
};

SmoothnessPrior build_smoothness_prior(const Mesh& mesh, double a, double b);

/// Diagonal Gaussian noise model, covariance = stddev^2 * I.
struct NoiseModel {
  double stddev = 1.0;

  /// stddev = delta * mean(|U|); falls back to 1 for noiseless frames, where
  /// the scale merges into the regularization weight.
  static NoiseModel from_frame(const MeasurementFrame& frame);
};

/// One-step linearized Tikhonov reconstruction around a homogeneous
/// background:
///   delta_sigma = (J^T S^-1 J + alpha C^-1)^-1 J^T S^-1 (U_delta - F(sigma0) I).
/// The solve uses the algebraically equivalent low-rank identity
///   (J^T J + beta C^-1)^-1 J^T r
///     = 1/beta [C - C J^T (beta I + J C J^T)^-1 J C] J^T r,  beta = alpha s^2,
/// so the expensive products with the dense covariance happen once at setup
/// and are reused across data frames.
Eigen::VectorXd linearized_reconstruct(const Jacobian& j0, const MeasurementFrame& baseline,
                                       const MeasurementFrame& data, double alpha,
                                       const NoiseModel& noise, const SmoothnessPrior& prior);

/// Reusable engine: Jacobian, baseline and covariance products are computed
/// once; reconstruct() is a handful of matrix-vector products per frame.
class LinearizedReconstructor {
 public:
  LinearizedReconstructor(const Mesh& mesh, const ElectrodeModel& electrodes,
                          const CurrentPatterns& patterns, double background, double alpha,
                          SmoothnessPrior prior);

  /// Conductivity perturbation (element basis).
  Eigen::VectorXd reconstruct(const MeasurementFrame& data) const;
  Eigen::VectorXd reconstruct(const MeasurementFrame& data, const NoiseModel& noise) const;

  const Jacobian& jacobian() const { return j0_; }
  const Eigen::VectorXd& baseline() const { return baseline_; }
  double background() const { return background_; }
  double alpha() const { return alpha_; }
  const SmoothnessPrior& prior() const { return prior_; }

 private:
  Jacobian j0_;
  Eigen::VectorXd baseline_;  // F(sigma0) I, stacked
  double background_;
  double alpha_;
  SmoothnessPrior prior_;
  Eigen::MatrixXd cov_jt_;    // C J^T
  Eigen::MatrixXd core_;      // J C J^T
};

}  // namespace eit
