#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <vector>

#include "eit/mesh.hpp"
#include "eit/recon.hpp"

namespace eit {

/// Solves -lap g + g = psi' with zero Dirichlet boundary values by P1 FEM.
/// The input is the dual (mass-weighted) gradient vector on nodes; the output
/// is a nodal field vanishing on the boundary. The factorization and the full
/// H1 matrix (stiffness + mass) are cached per mesh.
class SobolevSmoother {
 public:
  explicit SobolevSmoother(const Mesh& mesh);

  Eigen::VectorXd smooth(const Eigen::VectorXd& dual_gradient) const;

  const Eigen::SparseMatrix<double>& h1_matrix() const { return h1_; }
  double h1_inner(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    return x.dot(h1_ * y);
  }
  double h1_norm2(const Eigen::VectorXd& x) const { return h1_inner(x, x); }

 private:
  Eigen::SparseMatrix<double> h1_;  // stiffness + mass, no boundary conditions
  std::vector<int> interior_;
  Eigen::VectorXi node_to_interior_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> factor_;
};

/// Componentwise sign(t) * max(|t| - lambda, 0).
Eigen::VectorXd soft_shrink(const Eigen::VectorXd& v, double lambda);

enum class BbRule {
  hessian_ratio,  // <dx, dg> / <dx, dx>  (scalar secant fit of the Hessian)
  secant_step,    // <dx, dg> / <dg, dg>  (step-size variant)
};

struct SparsityConfig {
  double alpha = 1.0;        // l1 weight
  double tau = 1e-5;         // weak-monotonicity constant
  int memory = 5;            // objective history window M
  double shrink_factor = 0.5;  // geometric backtracking q
  double s_stop = 1e-6;
  double s_max = 1e3;
  double s_init = 1.0;
  int max_iters = 200;
  BbRule rule = BbRule::hessian_ratio;
  double clip_lo = 1e-3;
  double clip_hi = 10.0;
};

/// State of the sparsity iteration: current perturbation, bounded objective
/// history, and the previous point/gradient pair for the BB rule.
struct SparseIterate {
  Eigen::VectorXd delta_sigma;
  Eigen::VectorXd smoothed_grad;
  Eigen::VectorXd prev_delta_sigma;
  Eigen::VectorXd prev_smoothed_grad;
  std::vector<double> objective_history;  // length <= memory
  bool has_previous = false;
  double s_init = 1.0;
};

/// Barzilai-Borwein scalar from the H1 secant pair, clipped to
/// [s_stop, s_max]; returns s_init when no displacement is available.
double bb_step(const SparseIterate& it, const SobolevSmoother& smoother,
               const SparsityConfig& cfg);

/// Sparsity reconstruction of the perturbation around the homogeneous
/// background (node-linear basis). Returns sigma0 + delta_sigma.
ReconResult sparsity_reconstruct(const MeasurementFrame& data, const SparsityConfig& cfg,
                                 const Mesh& mesh, const ElectrodeModel& electrodes,
                                 const CurrentPatterns& patterns, double background);

}  // namespace eit
