#pragma once

#include <Eigen/Dense>
#include <utility>

#include "eit/jacobian.hpp"
#include "eit/mesh.hpp"
#include "eit/recon.hpp"
#include "eit/recon_gn.hpp"
#include "eit/recon_linear.hpp"

namespace eit {

/// Two-level-set parametrization of a piecewise constant conductivity with
/// four class values; sigma1/sigma4 are normally tied to the background so
/// three effective regions remain (background, conductive, resistive).
struct LevelSetState {
  Eigen::VectorXd phi1;  // node fields, signed-distance-like
  Eigen::VectorXd phi2;
  double sigma1 = 1.0;   // phi1 > 0, phi2 > 0   (background)
  double sigma2 = 5.0;   // phi1 > 0, phi2 <= 0  (conductive)
  double sigma3 = 0.1;   // phi1 <= 0, phi2 > 0  (resistive)
  double sigma4 = 1.0;   // phi1 <= 0, phi2 <= 0 (background)
  double epsilon = 0.05; // Heaviside smoothing width
  double step = 0.0;     // gradient-descent step, fixed after calibration
};

inline double smooth_heaviside(double s, double eps) {
  return std::atan(s / eps) / M_PI + 0.5;
}
inline double smooth_delta(double s, double eps) {
  return eps / (M_PI * (s * s + eps * eps));
}

/// sigma = s1 H(phi1)H(phi2) + s2 H(phi1)(1-H(phi2)) + s3 (1-H(phi1))H(phi2)
///       + s4 (1-H(phi1))(1-H(phi2)), evaluated at element centroids.
Eigen::VectorXd sigma_from_levelsets(const LevelSetState& state, const Mesh& mesh);

/// Hard-Heaviside class labels per element (resistive/background/conductive).
Eigen::VectorXi levelset_labels(const LevelSetState& state, const Mesh& mesh);

/// Gradient of the data term plus tv_weight times the lagged-diffusivity TV
/// term with respect to both level-set functions (node fields). J is the
/// voltage Jacobian at sigma(phi1, phi2) in the element basis and residual is
/// the stacked data residual of the level-set functional.
std::pair<Eigen::VectorXd, Eigen::VectorXd> levelset_gradient(const LevelSetState& state,
                                                              const Mesh& mesh,
                                                              const Jacobian& jac,
                                                              const Eigen::VectorXd& residual,
                                                              double tv_weight,
                                                              const TvOperator& op);

/// Approximate signed-distance reinitialization: exact distance to the
/// piecewise-linear zero level set, keeping the sign pattern. Fields without
/// a zero crossing are rescaled to unit amplitude.
Eigen::VectorXd reinitialize(const Eigen::VectorXd& phi, const Mesh& mesh);

/// Builds initial level sets from a linearized reconstruction by Otsu
/// thresholding into low/background/high regions. Returns the pair
/// (phi1, phi2) plus a degenerate flag when segmentation found a single class.
struct LevelSetInit {
  Eigen::VectorXd phi1;
  Eigen::VectorXd phi2;
  bool degenerate = false;
};
LevelSetInit init_from_linearized(const Eigen::VectorXd& delta_sigma, const Mesh& mesh);

struct LevelSetConfig {
  int iterations = 1000;
  double alpha = 5e-8;       // TV weight in the level-set functional
  double sigma_conductive = 5.0;
  double sigma_resistive = 0.1;
  int reinit_every = 50;
  double epsilon_factor = 2.0;  // epsilon = factor * median edge length
  double tv_gamma = 1e-6;
  double step_safety = 0.5;     // first update moves at most safety * epsilon
  double clip_lo = 1e-3;
  double clip_hi = 10.0;
};

struct LevelSetResult {
  ReconResult recon;
  Eigen::VectorXi labels;  // hard 3-class segmentation per element
};

/// Gradient descent on the difference-data functional with fixed step and
/// periodic reinitialization; background classes are tied to the homogeneous
/// background of the baseline frame.
LevelSetResult levelset_reconstruct(const MeasurementFrame& data,
                                    const MeasurementFrame& baseline,
                                    const LevelSetConfig& cfg, const Mesh& mesh,
                                    const ElectrodeModel& electrodes,
                                    const CurrentPatterns& patterns, double background,
                                    const LinearizedReconstructor* init_recon = nullptr);

}  // namespace eit
