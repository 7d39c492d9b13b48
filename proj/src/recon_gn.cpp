#include "eit/recon_gn.hpp"

#include <Eigen/SparseCholesky>
#include <chrono>
#include <cmath>
#include <map>
#include <vector>

#include "eit/errors.hpp"

namespace eit {

TvOperator build_tv_operator(const Mesh& mesh, double gamma, bool edge_weighted) {
  if (!(gamma >= 0.0)) throw ValidationError("build_tv_operator: gamma must be >= 0");
  TvOperator op;
  op.gamma = gamma;
  op.edge_weighted = edge_weighted;

  std::map<std::pair<int, int>, int> first_owner;
  std::vector<Eigen::Triplet<double>> trip;
  int row = 0;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    for (int a = 0; a < 3; ++a) {
      const int u = el[a];
      const int v = el[(a + 1) % 3];
      const auto key = std::minmax(u, v);
      auto it = first_owner.find(key);
      if (it == first_owner.end()) {
        first_owner.emplace(key, e);
      } else {
        const double w =
            edge_weighted ? (mesh.nodes.row(u) - mesh.nodes.row(v)).norm() : 1.0;
        trip.emplace_back(row, it->second, w);
        trip.emplace_back(row, e, -w);
        ++row;
      }
    }
  }
  op.diff.resize(row, mesh.element_count());
  op.diff.setFromTriplets(trip.begin(), trip.end());
  return op;
}

double tv_value(const Eigen::VectorXd& sigma, const TvOperator& op) {
  if (sigma.size() != op.diff.cols()) throw DimensionError("tv_value: dimension mismatch");
  const Eigen::VectorXd jumps = op.diff * sigma;
  return (jumps.array().square() + op.gamma).sqrt().sum();
}

Eigen::VectorXd tv_gradient(const Eigen::VectorXd& sigma, const TvOperator& op) {
  const Eigen::VectorXd jumps = op.diff * sigma;
  const Eigen::VectorXd dinv = (jumps.array().square() + op.gamma).rsqrt();
  return op.diff.transpose() * dinv.cwiseProduct(jumps);
}

namespace {

// Solves (J^T J + P) x = rhs with P = alpha L^T D^-1 L + beta I sparse SPD:
//   x = P^-1 rhs - P^-1 J^T (I + J P^-1 J^T)^-1 J P^-1 rhs.
struct TvStepSolver {
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> reg_factor;
  Eigen::MatrixXd w;     // P^-1 J^T
  Eigen::LLT<Eigen::MatrixXd> core;
  double beta = 0.0;

  void prepare(const Eigen::VectorXd& sigma, const Eigen::MatrixXd& j, double alpha,
               const TvOperator& op) {
    const Eigen::VectorXd jumps = op.diff * sigma;
    const Eigen::VectorXd dinv = (jumps.array().square() + op.gamma).rsqrt();
    Eigen::SparseMatrix<double> reg =
        op.diff.transpose() * dinv.asDiagonal() * op.diff;
    reg *= alpha;
    // Tiny shift keeps the regularizer factorizable (L has constants in its
    // kernel); sized well below the 1e-8 normal-equation tolerance.
    double scale = 0.0;
    for (int c = 0; c < j.cols(); ++c) scale = std::max(scale, j.col(c).squaredNorm());
    for (int k = 0; k < reg.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(reg, k); it; ++it)
        if (it.row() == it.col()) scale = std::max(scale, it.value());
    beta = 1e-12 * scale;
    Eigen::SparseMatrix<double> ident(reg.rows(), reg.cols());
    ident.setIdentity();
    reg += beta * ident;
    reg_factor.compute(reg);
    if (reg_factor.info() != Eigen::Success)
      throw NumericalError("gn_tv_step: TV regularizer factorization failed");
    w = reg_factor.solve(j.transpose());
    Eigen::MatrixXd shifted = j * w;
    shifted.diagonal().array() += 1.0;
    core.compute(shifted);
    if (core.info() != Eigen::Success)
      throw NumericalError("gn_tv_step: normal-equation core is singular");
  }

  Eigen::VectorXd solve(const Eigen::MatrixXd& j, const Eigen::VectorXd& rhs) const {
    const Eigen::VectorXd px = reg_factor.solve(rhs);
    return px - w * core.solve(j * px);
  }
};

}  // namespace

Eigen::VectorXd gn_tv_step(const Eigen::VectorXd& sigma, const Jacobian& jac,
                           const Eigen::VectorXd& residual, const GnConfig& cfg,
                           const TvOperator& op) {
  if (jac.cols() != sigma.size() || jac.rows() != residual.size())
    throw DimensionError("gn_tv_step: dimension mismatch");
  TvStepSolver solver;
  solver.prepare(sigma, jac.matrix, cfg.alpha, op);
  const Eigen::VectorXd rhs =
      jac.matrix.transpose() * residual - cfg.alpha * tv_gradient(sigma, op);
  return solver.solve(jac.matrix, rhs);
}

ReconResult gn_tv_reconstruct(const MeasurementFrame& data, const GnConfig& cfg, const Mesh& mesh,
                              const ElectrodeModel& electrodes, const CurrentPatterns& patterns,
                              double background) {
  const auto t_start = std::chrono::steady_clock::now();
  ReconResult result;
  const TvOperator op = build_tv_operator(mesh, cfg.gamma, cfg.edge_weighted_tv);

  Conductivity sigma = Conductivity::homogeneous(mesh, background);
  sigma.lower = cfg.clip_lo;
  sigma.upper = cfg.clip_hi;

  ForwardOperator forward(mesh, electrodes, patterns);
  forward.set_sigma(sigma);

  auto misfit_of = [&](const Eigen::VectorXd& predicted) {
    return (data.voltages - predicted).squaredNorm();
  };
  double misfit = misfit_of(forward.predicted());
  double objective = misfit + cfg.alpha * tv_value(sigma.values, op);

  Eigen::VectorXd best_sigma = sigma.values;
  double best_objective = objective;

  Jacobian jac;
  TvStepSolver solver;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const auto t_iter = std::chrono::steady_clock::now();
    if (cfg.recompute_jacobian || iter == 0) jac = compute_jacobian(forward);
    const Eigen::VectorXd residual = data.voltages - forward.predicted();
    solver.prepare(sigma.values, jac.matrix, cfg.alpha, op);
    const Eigen::VectorXd rhs =
        jac.matrix.transpose() * residual - cfg.alpha * tv_gradient(sigma.values, op);
    const Eigen::VectorXd delta = solver.solve(jac.matrix, rhs);

    // Backtracking halving on objective increase.
    bool accepted = false;
    double eta = cfg.step_damping;
    double new_misfit = 0.0, new_objective = 0.0;
    Eigen::VectorXd candidate;
    for (int attempt = 0; attempt < 4; ++attempt, eta *= 0.5) {
      candidate =
          (sigma.values + eta * delta).cwiseMax(cfg.clip_lo).cwiseMin(cfg.clip_hi);
      Conductivity trial = sigma;
      trial.values = candidate;
      forward.set_sigma(trial);
      new_misfit = misfit_of(forward.predicted());
      new_objective = new_misfit + cfg.alpha * tv_value(candidate, op);
      if (new_objective <= objective) {
        accepted = true;
        break;
      }
    }

    IterationRecord rec;
    rec.iteration = iter + 1;
    rec.step = accepted ? eta : 0.0;
    if (!accepted) {
      // Divergence: every damped retry increased the objective.
      sigma.values = best_sigma;
      forward.set_sigma(sigma);
      result.warning = true;
      result.note = "objective increased for all damped retries; returning best iterate";
      rec.misfit = misfit;
      rec.penalty = tv_value(sigma.values, op);
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_iter).count();
      result.history.push_back(rec);
      break;
    }

    sigma.values = candidate;
    const double misfit_drop = (misfit - new_misfit) / std::max(misfit, 1e-300);
    misfit = new_misfit;
    objective = new_objective;
    if (objective < best_objective) {
      best_objective = objective;
      best_sigma = sigma.values;
    }
    rec.misfit = misfit;
    rec.penalty = tv_value(sigma.values, op);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_iter).count();
    result.history.push_back(rec);

    if (misfit_drop >= 0.0 && misfit_drop < cfg.stop_tol) break;
  }

  sigma.values = best_sigma;
  result.sigma = sigma;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace eit
