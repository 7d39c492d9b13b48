#include "eit/recon_levelset.hpp"

#include <chrono>
#include <cmath>
#include <vector>

#include "eit/defaults.hpp"
#include "eit/errors.hpp"
#include "eit/metrics.hpp"

namespace eit {

namespace {

// phi values interpolated at element centroids (P1 mean of the vertices).
Eigen::VectorXd centroid_values(const Eigen::VectorXd& phi, const Mesh& mesh) {
  Eigen::VectorXd c(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    c[e] = (phi[el[0]] + phi[el[1]] + phi[el[2]]) / 3.0;
  }
  return c;
}

}  // namespace

Eigen::VectorXd sigma_from_levelsets(const LevelSetState& state, const Mesh& mesh) {
  if (state.phi1.size() != mesh.node_count() || state.phi2.size() != mesh.node_count())
    throw DimensionError("sigma_from_levelsets: phi fields must live on nodes");
  const Eigen::VectorXd c1 = centroid_values(state.phi1, mesh);
  const Eigen::VectorXd c2 = centroid_values(state.phi2, mesh);
  Eigen::VectorXd sigma(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const double h1 = smooth_heaviside(c1[e], state.epsilon);
    const double h2 = smooth_heaviside(c2[e], state.epsilon);
    sigma[e] = state.sigma1 * h1 * h2 + state.sigma2 * h1 * (1.0 - h2) +
               state.sigma3 * (1.0 - h1) * h2 + state.sigma4 * (1.0 - h1) * (1.0 - h2);
  }
  return sigma;
}

Eigen::VectorXi levelset_labels(const LevelSetState& state, const Mesh& mesh) {
  const Eigen::VectorXd c1 = centroid_values(state.phi1, mesh);
  const Eigen::VectorXd c2 = centroid_values(state.phi2, mesh);
  Eigen::VectorXi labels(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    if (c1[e] > 0.0 && c2[e] <= 0.0)
      labels[e] = kClassConductive;
    else if (c1[e] <= 0.0 && c2[e] > 0.0)
      labels[e] = kClassResistive;
    else
      labels[e] = kClassBackground;
  }
  return labels;
}

namespace {

// Chain rule from an element-basis gradient d/dsigma to the two node fields.
std::pair<Eigen::VectorXd, Eigen::VectorXd> chain_to_levelsets(const LevelSetState& state,
                                                               const Mesh& mesh,
                                                               const Eigen::VectorXd& dsigma) {
  const Eigen::VectorXd c1 = centroid_values(state.phi1, mesh);
  const Eigen::VectorXd c2 = centroid_values(state.phi2, mesh);
  Eigen::VectorXd g1 = Eigen::VectorXd::Zero(mesh.node_count());
  Eigen::VectorXd g2 = Eigen::VectorXd::Zero(mesh.node_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const double h1 = smooth_heaviside(c1[e], state.epsilon);
    const double h2 = smooth_heaviside(c2[e], state.epsilon);
    const double b1 = state.sigma1 * h2 + state.sigma2 * (1.0 - h2) - state.sigma3 * h2 -
                      state.sigma4 * (1.0 - h2);
    const double b2 = state.sigma1 * h1 - state.sigma2 * h1 + state.sigma3 * (1.0 - h1) -
                      state.sigma4 * (1.0 - h1);
    const double d1 = smooth_delta(c1[e], state.epsilon) * b1 * dsigma[e] / 3.0;
    const double d2 = smooth_delta(c2[e], state.epsilon) * b2 * dsigma[e] / 3.0;
    const auto el = mesh.elements.row(e);
    for (int a = 0; a < 3; ++a) {
      g1[el[a]] += d1;
      g2[el[a]] += d2;
    }
  }
  return {std::move(g1), std::move(g2)};
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> levelset_gradient(const LevelSetState& state,
                                                              const Mesh& mesh,
                                                              const Jacobian& jac,
                                                              const Eigen::VectorXd& residual,
                                                              double tv_weight,
                                                              const TvOperator& op) {
  if (jac.cols() != mesh.element_count())
    throw DimensionError("levelset_gradient: Jacobian must use the element basis");
  if (jac.rows() != residual.size())
    throw DimensionError("levelset_gradient: residual length mismatch");
  const Eigen::VectorXd sigma = sigma_from_levelsets(state, mesh);
  Eigen::VectorXd dsigma = jac.matrix.transpose() * residual;
  if (tv_weight != 0.0) dsigma += tv_weight * tv_gradient(sigma, op);
  return chain_to_levelsets(state, mesh, dsigma);
}

Eigen::VectorXd reinitialize(const Eigen::VectorXd& phi, const Mesh& mesh) {
  if (phi.size() != mesh.node_count())
    throw DimensionError("reinitialize: phi must live on nodes");

  // Zero level set of the P1 interpolant as a collection of segments.
  std::vector<Eigen::Vector2d> seg_a, seg_b;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    Eigen::Vector2d pts[3];
    int npts = 0;
    for (int a = 0; a < 3; ++a) {
      const double va = phi[el[a]];
      const double vb = phi[el[(a + 1) % 3]];
      const Eigen::Vector2d pa = mesh.nodes.row(el[a]);
      const Eigen::Vector2d pb = mesh.nodes.row(el[(a + 1) % 3]);
      if (va == 0.0 && npts < 3) pts[npts++] = pa;
      if (va * vb < 0.0 && npts < 3) pts[npts++] = pa + va / (va - vb) * (pb - pa);
    }
    if (npts >= 2) {
      seg_a.push_back(pts[0]);
      seg_b.push_back(pts[1]);
    } else if (npts == 1) {
      seg_a.push_back(pts[0]);
      seg_b.push_back(pts[0]);
    }
  }

  if (seg_a.empty()) {
    const double amp = phi.cwiseAbs().maxCoeff();
    return amp > 0.0 ? Eigen::VectorXd(phi / amp) : phi;
  }

  Eigen::VectorXd out(phi.size());
  for (int n = 0; n < mesh.node_count(); ++n) {
    const Eigen::Vector2d p = mesh.nodes.row(n);
    double best = 1e300;
    for (std::size_t s = 0; s < seg_a.size(); ++s) {
      const Eigen::Vector2d d = seg_b[s] - seg_a[s];
      const double len2 = d.squaredNorm();
      double t = len2 > 0.0 ? (p - seg_a[s]).dot(d) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      best = std::min(best, (p - (seg_a[s] + t * d)).norm());
    }
    out[n] = phi[n] > 0.0 ? best : (phi[n] < 0.0 ? -best : 0.0);
  }
  return out;
}

LevelSetInit init_from_linearized(const Eigen::VectorXd& delta_sigma, const Mesh& mesh) {
  if (delta_sigma.size() != mesh.element_count())
    throw DimensionError("init_from_linearized: expected element-basis perturbation");
  const Eigen::VectorXi labels =
      segment_conductivity(delta_sigma, mesh.element_areas, 0.0);

  LevelSetInit init;
  init.degenerate = (labels.array() == kClassResistive).count() == 0 &&
                    (labels.array() == kClassConductive).count() == 0;
  if (init.degenerate) {
    init.phi1 = Eigen::VectorXd::Ones(mesh.node_count());
    init.phi2 = Eigen::VectorXd::Ones(mesh.node_count());
    return init;
  }

  // Node class by area vote of incident elements (background wins ties).
  Eigen::MatrixXd votes = Eigen::MatrixXd::Zero(mesh.node_count(), 3);
  for (int e = 0; e < mesh.element_count(); ++e)
    for (int a = 0; a < 3; ++a) votes(mesh.elements(e, a), labels[e]) += mesh.element_areas[e];
  init.phi1.resize(mesh.node_count());
  init.phi2.resize(mesh.node_count());
  for (int n = 0; n < mesh.node_count(); ++n) {
    int cls = kClassBackground;
    if (votes(n, kClassResistive) > votes(n, kClassBackground) &&
        votes(n, kClassResistive) >= votes(n, kClassConductive))
      cls = kClassResistive;
    else if (votes(n, kClassConductive) > votes(n, kClassBackground) &&
             votes(n, kClassConductive) > votes(n, kClassResistive))
      cls = kClassConductive;
    init.phi1[n] = cls == kClassResistive ? -1.0 : 1.0;
    init.phi2[n] = cls == kClassConductive ? -1.0 : 1.0;
  }
  init.phi1 = reinitialize(init.phi1, mesh);
  init.phi2 = reinitialize(init.phi2, mesh);
  return init;
}

LevelSetResult levelset_reconstruct(const MeasurementFrame& data,
                                    const MeasurementFrame& baseline, const LevelSetConfig& cfg,
                                    const Mesh& mesh, const ElectrodeModel& electrodes,
                                    const CurrentPatterns& patterns, double background,
                                    const LinearizedReconstructor* init_recon) {
  const auto t_start = std::chrono::steady_clock::now();
  if (data.voltages.size() != baseline.voltages.size())
    throw DimensionError("levelset_reconstruct: data and baseline frames disagree");

  // Initial guess from a linearized reconstruction.
  Eigen::VectorXd delta0;
  if (init_recon) {
    delta0 = init_recon->reconstruct(data);
  } else {
    const SmoothnessPrior prior = build_smoothness_prior(mesh, kPriorA, kPriorB);
    const LinearizedReconstructor lin(mesh, electrodes, patterns, background,
                                      kDefaultLinRecAlpha, prior);
    delta0 = lin.reconstruct(data);
  }
  LevelSetInit init = init_from_linearized(delta0, mesh);

  LevelSetState state;
  state.phi1 = std::move(init.phi1);
  state.phi2 = std::move(init.phi2);
  state.sigma1 = background;
  state.sigma4 = background;
  state.sigma2 = cfg.sigma_conductive;
  state.sigma3 = cfg.sigma_resistive;
  state.epsilon = cfg.epsilon_factor * median_edge_length(mesh);

  const TvOperator op = build_tv_operator(mesh, cfg.tv_gamma);
  ForwardOperator forward(mesh, electrodes, patterns);
  Conductivity sigma0 = Conductivity::homogeneous(mesh, background);
  sigma0.lower = cfg.clip_lo;
  sigma0.upper = cfg.clip_hi;
  forward.set_sigma(sigma0);
  const Eigen::VectorXd model_baseline = forward.predicted();
  const Eigen::VectorXd target = data.voltages - baseline.voltages;

  const int K = patterns.n_patterns();
  const int L = patterns.n_electrodes();
  LevelSetResult out;

  Conductivity sigma = sigma0;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const auto t_iter = std::chrono::steady_clock::now();
    sigma.values = sigma_from_levelsets(state, mesh);
    forward.set_sigma(sigma);
    const Eigen::VectorXd residual = (forward.predicted() - model_baseline) - target;

    // d/dsigma of the data term via the adjoint (equals J^T residual).
    Eigen::MatrixXd residual_rows(K, L);
    for (int k = 0; k < K; ++k) residual_rows.row(k) = residual.segment(k * L, L).transpose();
    const AdjointSolution adjoint = adjoint_solve(forward.system(), residual_rows);
    Eigen::VectorXd dsigma = gradient_data_fit_p0(forward.solution(), adjoint, mesh);
    dsigma += cfg.alpha * tv_gradient(sigma.values, op);
    auto [g1, g2] = chain_to_levelsets(state, mesh, dsigma);

    if (iter == 0) {
      const double gmax = std::max(g1.cwiseAbs().maxCoeff(), g2.cwiseAbs().maxCoeff());
      state.step = gmax > 0.0 ? cfg.step_safety * state.epsilon / gmax : 0.0;
    }

    state.phi1 -= state.step * g1;
    state.phi2 -= state.step * g2;
    if ((iter + 1) % cfg.reinit_every == 0) {
      state.phi1 = reinitialize(state.phi1, mesh);
      state.phi2 = reinitialize(state.phi2, mesh);
    }

    IterationRecord rec;
    rec.iteration = iter + 1;
    rec.misfit = 0.5 * residual.squaredNorm();
    rec.penalty = tv_value(sigma.values, op);
    rec.step = state.step;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_iter).count();
    out.recon.history.push_back(rec);
  }

  sigma.values = sigma_from_levelsets(state, mesh);
  out.recon.sigma = sigma;
  out.labels = levelset_labels(state, mesh);
  out.recon.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

}  // namespace eit
