#include "eit/recon_sparsity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "eit/errors.hpp"
#include "eit/forward.hpp"
#include "eit/jacobian.hpp"

namespace eit {

SobolevSmoother::SobolevSmoother(const Mesh& mesh) {
  h1_ = assemble_p1_stiffness(mesh);
  h1_ = h1_ + assemble_p1_mass(mesh);

  std::vector<char> on_boundary(mesh.node_count(), 0);
  for (int i = 0; i < mesh.boundary_edges.rows(); ++i) {
    on_boundary[mesh.boundary_edges(i, 0)] = 1;
    on_boundary[mesh.boundary_edges(i, 1)] = 1;
  }
  node_to_interior_ = Eigen::VectorXi::Constant(mesh.node_count(), -1);
  for (int n = 0; n < mesh.node_count(); ++n) {
    if (!on_boundary[n]) {
      node_to_interior_[n] = static_cast<int>(interior_.size());
      interior_.push_back(n);
    }
  }

  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < h1_.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(h1_, k); it; ++it) {
      const int r = node_to_interior_[it.row()];
      const int c = node_to_interior_[it.col()];
      if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
    }
  }
  Eigen::SparseMatrix<double> inner(static_cast<int>(interior_.size()),
                                    static_cast<int>(interior_.size()));
  inner.setFromTriplets(trip.begin(), trip.end());
  factor_.compute(inner);
  if (factor_.info() != Eigen::Success)
    throw NumericalError("SobolevSmoother: interior H1 matrix factorization failed");
}

Eigen::VectorXd SobolevSmoother::smooth(const Eigen::VectorXd& dual_gradient) const {
  if (dual_gradient.size() != node_to_interior_.size())
    throw DimensionError("sobolev_smooth: gradient must live on mesh nodes");
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(interior_.size()));
  for (std::size_t i = 0; i < interior_.size(); ++i) rhs[static_cast<Eigen::Index>(i)] = dual_gradient[interior_[i]];
  const Eigen::VectorXd g_int = factor_.solve(rhs);
  if (factor_.info() != Eigen::Success)
    throw NumericalError("sobolev_smooth: solve failed");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dual_gradient.size());
  for (std::size_t i = 0; i < interior_.size(); ++i) g[interior_[i]] = g_int[static_cast<Eigen::Index>(i)];
  return g;
}

Eigen::VectorXd soft_shrink(const Eigen::VectorXd& v, double lambda) {
  if (lambda < 0.0) throw ValidationError("soft_shrink: lambda must be >= 0");
  return v.array().sign() * (v.array().abs() - lambda).max(0.0);
}

double bb_step(const SparseIterate& it, const SobolevSmoother& smoother,
               const SparsityConfig& cfg) {
  if (!it.has_previous) return it.s_init;
  const Eigen::VectorXd dx = it.delta_sigma - it.prev_delta_sigma;
  const double dx2 = smoother.h1_norm2(dx);
  if (dx2 <= 0.0) return it.s_init;
  const Eigen::VectorXd dg = it.smoothed_grad - it.prev_smoothed_grad;
  double raw;
  if (cfg.rule == BbRule::hessian_ratio) {
    raw = smoother.h1_inner(dx, dg) / dx2;
  } else {
    const double dg2 = smoother.h1_norm2(dg);
    raw = dg2 > 0.0 ? smoother.h1_inner(dx, dg) / dg2 : it.s_init;
  }
  return std::clamp(raw, cfg.s_stop, cfg.s_max);
}

ReconResult sparsity_reconstruct(const MeasurementFrame& data, const SparsityConfig& cfg,
                                 const Mesh& mesh, const ElectrodeModel& electrodes,
                                 const CurrentPatterns& patterns, double background) {
  const auto t_start = std::chrono::steady_clock::now();
  const int K = patterns.n_patterns();
  const int L = patterns.n_electrodes();
  if (data.voltages.size() != static_cast<Eigen::Index>(K) * L)
    throw DimensionError("sparsity_reconstruct: frame does not match pattern set");

  const SobolevSmoother smoother(mesh);
  ReconResult result;

  Conductivity sigma = Conductivity::homogeneous(mesh, background, SigmaBasis::node_linear);
  sigma.lower = cfg.clip_lo;
  sigma.upper = cfg.clip_hi;
  const Eigen::VectorXd lo_shift = Eigen::VectorXd::Constant(mesh.node_count(), cfg.clip_lo - background);
  const Eigen::VectorXd hi_shift = Eigen::VectorXd::Constant(mesh.node_count(), cfg.clip_hi - background);

  ForwardOperator forward(mesh, electrodes, patterns);
  forward.set_sigma(sigma);

  auto objective_of = [&](const Eigen::VectorXd& predicted, const Eigen::VectorXd& delta) {
    return 0.5 * (predicted - data.voltages).squaredNorm() + cfg.alpha * delta.lpNorm<1>();
  };

  SparseIterate it;
  it.delta_sigma = Eigen::VectorXd::Zero(mesh.node_count());
  it.s_init = cfg.s_init;
  double objective = objective_of(forward.predicted(), it.delta_sigma);
  it.objective_history.push_back(objective);

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const auto t_iter = std::chrono::steady_clock::now();
    // Gradient of the data fit at the current point, then its H1 representative.
    Eigen::MatrixXd residual_rows(K, L);
    for (int k = 0; k < K; ++k)
      residual_rows.row(k) = (forward.solution().electrode_voltages.row(k).transpose() -
                              data.voltages.segment(k * L, L))
                                 .transpose();
    const AdjointSolution adjoint = adjoint_solve(forward.system(), residual_rows);
    const Eigen::VectorXd dual = gradient_data_fit(forward.solution(), adjoint, mesh);
    it.smoothed_grad = smoother.smooth(dual);

    double s = bb_step(it, smoother, cfg);
    const bool s_raw_stop = it.has_previous && s <= cfg.s_stop;

    // Geometric backtracking until the weak monotonicity bound holds.
    const double window_max =
        *std::max_element(it.objective_history.begin(), it.objective_history.end());
    int backtracks = 0;
    bool exhausted = false;
    Eigen::VectorXd candidate;
    double cand_objective = 0.0, bound = 0.0;
    while (true) {
      candidate = soft_shrink(it.delta_sigma - s * it.smoothed_grad, s * cfg.alpha)
                      .cwiseMax(lo_shift)
                      .cwiseMin(hi_shift);
      Conductivity trial = sigma;
      trial.values = (candidate.array() + background).matrix();
      forward.set_sigma(trial);
      cand_objective = objective_of(forward.predicted(), candidate);
      bound = window_max - cfg.tau * (s / 2.0) * smoother.h1_norm2(candidate - it.delta_sigma);
      if (cand_objective <= bound) break;
      s *= cfg.shrink_factor;
      ++backtracks;
      if (s < cfg.s_stop) {
        exhausted = true;
        break;
      }
    }

    if (exhausted) {
      // Accept the zero step and stop.
      Conductivity restore = sigma;
      restore.values = (it.delta_sigma.array() + background).matrix();
      forward.set_sigma(restore);
      result.warning = true;
      result.note = "backtracking exhausted the step budget; accepted zero step";
      break;
    }

    it.prev_delta_sigma = it.delta_sigma;
    it.prev_smoothed_grad = it.smoothed_grad;
    it.has_previous = true;
    it.delta_sigma = candidate;
    objective = cand_objective;
    it.objective_history.push_back(objective);
    if (static_cast<int>(it.objective_history.size()) > cfg.memory)
      it.objective_history.erase(it.objective_history.begin());

    IterationRecord rec;
    rec.iteration = iter + 1;
    rec.misfit = objective - cfg.alpha * it.delta_sigma.lpNorm<1>();
    rec.penalty = it.delta_sigma.lpNorm<1>();
    rec.step = s;
    rec.backtracks = backtracks;
    rec.nonzeros = static_cast<int>((it.delta_sigma.array() != 0.0).count());
    rec.monotonicity_ref = bound;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_iter).count();
    result.history.push_back(rec);

    if (s_raw_stop) {
      result.note = "BB step fell below s_stop";
      break;
    }
  }

  sigma.values = (it.delta_sigma.array() + background).matrix();
  result.sigma = sigma;
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace eit
