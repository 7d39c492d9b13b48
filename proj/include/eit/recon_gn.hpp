#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "eit/jacobian.hpp"
#include "eit/mesh.hpp"
#include "eit/recon.hpp"

namespace eit {

/// Signed difference operator over interior inter-element edges: one row per
/// edge, +w/-w on the two adjacent elements (w = shared edge length when
/// edge_weighted). Used by the smoothed TV penalty sum_i sqrt((L sigma)_i^2 + gamma).
struct TvOperator {
  Eigen::SparseMatrix<double> diff;
  double gamma = 1e-4;
  bool edge_weighted = true;

  int n_edges() const { return static_cast<int>(diff.rows()); }
};

TvOperator build_tv_operator(const Mesh& mesh, double gamma, bool edge_weighted = true);

/// sum_i sqrt((L sigma)_i^2 + gamma)
double tv_value(const Eigen::VectorXd& sigma, const TvOperator& op);

/// Lagged-diffusivity gradient of the smoothed TV: L^T D^-1 L sigma with
/// D = diag(sqrt((L sigma)^2 + gamma)).
Eigen::VectorXd tv_gradient(const Eigen::VectorXd& sigma, const TvOperator& op);

struct GnConfig {
  double alpha = 3e-7;
  double gamma = 1e-4;
  int max_iters = 20;
  double step_damping = 1.0;   // initial step scale; halved on objective increase
  double stop_tol = 1e-4;      // relative misfit decrease threshold
  bool recompute_jacobian = true;
  double clip_lo = 1e-3;
  double clip_hi = 10.0;
  bool edge_weighted_tv = true;
};

/// One reweighted-least-squares Gauss-Newton update:
///   delta = (J^T J + alpha L^T D^-1 L)^-1 (J^T residual - alpha L^T D^-1 L sigma),
/// solved exactly through the low-rank identity against a sparse factorization
/// of the regularizer (J has only K*L rows).
Eigen::VectorXd gn_tv_step(const Eigen::VectorXd& sigma, const Jacobian& jac,
                           const Eigen::VectorXd& residual, const GnConfig& cfg,
                           const TvOperator& op);

/// Damped, box-projected Gauss-Newton TV iteration from the homogeneous
/// background. Stops at max_iters, at stop_tol on the relative misfit
/// decrease, or flags divergence when no damped step decreases the objective.
ReconResult gn_tv_reconstruct(const MeasurementFrame& data, const GnConfig& cfg, const Mesh& mesh,
                              const ElectrodeModel& electrodes, const CurrentPatterns& patterns,
                              double background);

}  // namespace eit
