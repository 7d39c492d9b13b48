#include "eit/forward.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <vector>

#include "eit/errors.hpp"
#include "eit/rng.hpp"

namespace eit {

struct CemFactorization {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>>
      solver;
  bool analyzed = false;
};

Conductivity Conductivity::homogeneous(const Mesh& mesh, double value, SigmaBasis basis) {
  Conductivity sigma;
  sigma.basis = basis;
  const int n = basis == SigmaBasis::element_constant ? mesh.element_count() : mesh.node_count();
  sigma.values = Eigen::VectorXd::Constant(n, value);
  return sigma;
}

void validate_admissible(const Conductivity& sigma, const Mesh& mesh) {
  const int expected = sigma.basis == SigmaBasis::element_constant ? mesh.element_count()
                                                                   : mesh.node_count();
  if (sigma.values.size() != expected)
    throw DimensionError("conductivity length does not match its basis on this mesh");
  if (!(sigma.lower > 0.0) || sigma.upper < sigma.lower)
    throw ValidationError("conductivity admissibility box must satisfy 0 < lower <= upper");
  if (sigma.values.minCoeff() < sigma.lower - 1e-12 ||
      sigma.values.maxCoeff() > sigma.upper + 1e-12)
    throw ValidationError("conductivity leaves the admissible box");
}

ElectrodeModel ElectrodeModel::uniform(int n_electrodes, double z) {
  if (z <= 0.0) throw ValidationError("contact impedance must be positive");
  ElectrodeModel m;
  m.contact_impedance = Eigen::VectorXd::Constant(n_electrodes, z);
  return m;
}

CurrentPatterns adjacent_patterns(int n_electrodes, double amplitude) {
  if (n_electrodes < 2) throw ValidationError("adjacent_patterns: need at least 2 electrodes");
  CurrentPatterns p;
  p.kind = "adjacent";
  p.amplitude = amplitude;
  p.rows = Eigen::MatrixXd::Zero(n_electrodes, n_electrodes);
  for (int k = 0; k < n_electrodes; ++k) {
    p.rows(k, k) = amplitude;
    p.rows(k, (k + 1) % n_electrodes) = -amplitude;
  }
  return p;
}

CurrentPatterns trig_patterns(int n_electrodes, double amplitude) {
  if (n_electrodes < 4 || n_electrodes % 2 != 0)
    throw ValidationError("trig_patterns: L must be even and >= 4");
  const int L = n_electrodes;
  CurrentPatterns p;
  p.kind = "trig";
  p.amplitude = amplitude;
  p.rows.resize(L - 1, L);
  for (int k = 1; k < L; ++k) {
    for (int ell = 0; ell < L; ++ell) {
      const double theta = 2.0 * M_PI * ell / L;
      p.rows(k - 1, ell) =
          (k % 2 == 1) ? std::cos((k + 1) * theta / 2.0) : std::sin(k * theta / 2.0);
    }
    p.rows.row(k - 1).array() -= p.rows.row(k - 1).mean();
    p.rows.row(k - 1) *= amplitude;
  }
  return p;
}

namespace {

void check_mean_free(const CurrentPatterns& patterns) {
  const double tol = 1e-12 * std::max(1.0, patterns.rows.cwiseAbs().maxCoeff());
  for (int k = 0; k < patterns.n_patterns(); ++k)
    if (std::abs(patterns.rows.row(k).sum()) > tol)
      throw ValidationError("current pattern " + std::to_string(k) + " is not mean-free");
}

// Assembles A, B, D and the grounded saddle matrix.
void assemble_blocks(const Mesh& mesh, const Conductivity& sigma,
                     const ElectrodeModel& electrodes, CemSystem& out) {
  validate_admissible(sigma, mesh);
  const int L = electrodes.count();
  if (mesh.electrode_count() != L)
    throw DimensionError("electrode model count does not match the mesh");
  const int N = mesh.node_count();

  std::vector<Eigen::Triplet<double>> a_trip;
  a_trip.reserve(9 * mesh.element_count() + 8 * mesh.boundary_edges.rows());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const double area = mesh.element_areas[e];
    if (!(area > 0.0)) throw GeometryError("assemble_cem_system: degenerate element");
    const auto el = mesh.elements.row(e);
    double coef;
    if (sigma.basis == SigmaBasis::element_constant)
      coef = sigma.values[e];
    else
      coef = (sigma.values[el[0]] + sigma.values[el[1]] + sigma.values[el[2]]) / 3.0;
    const Eigen::Matrix<double, 2, 3> g = p1_gradients(mesh, e);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        a_trip.emplace_back(el[a], el[b], coef * area * g.col(a).dot(g.col(b)));
  }

  std::vector<Eigen::Triplet<double>> b_trip;
  Eigen::VectorXd dg = Eigen::VectorXd::Zero(L);
  for (int ell = 0; ell < L; ++ell) {
    const double zinv = 1.0 / electrodes.contact_impedance[ell];
    for (int edge : mesh.electrode_edges[ell]) {
      const int i = mesh.boundary_edges(edge, 0);
      const int j = mesh.boundary_edges(edge, 1);
      const double h = (mesh.nodes.row(i) - mesh.nodes.row(j)).norm();
      // Edge mass matrix h/6 [2 1; 1 2], exact for the linear basis.
      a_trip.emplace_back(i, i, zinv * h / 3.0);
      a_trip.emplace_back(j, j, zinv * h / 3.0);
      a_trip.emplace_back(i, j, zinv * h / 6.0);
      a_trip.emplace_back(j, i, zinv * h / 6.0);
      b_trip.emplace_back(i, ell, -zinv * h / 2.0);
      b_trip.emplace_back(j, ell, -zinv * h / 2.0);
      dg[ell] += zinv * h;
    }
  }

  out.n_nodes = N;
  out.n_electrodes = L;
  out.admittance.resize(N, N);
  out.admittance.setFromTriplets(a_trip.begin(), a_trip.end());
  out.coupling.resize(N, L);
  out.coupling.setFromTriplets(b_trip.begin(), b_trip.end());
  out.electrode_conductance = dg;

  std::vector<Eigen::Triplet<double>> s_trip;
  s_trip.reserve(a_trip.size() + 2 * b_trip.size() + 3 * L);
  for (const auto& t : a_trip) s_trip.push_back(t);
  for (const auto& t : b_trip) {
    s_trip.emplace_back(t.row(), N + t.col(), t.value());
    s_trip.emplace_back(N + t.col(), t.row(), t.value());
  }
  for (int ell = 0; ell < L; ++ell) {
    s_trip.emplace_back(N + ell, N + ell, dg[ell]);
    s_trip.emplace_back(N + ell, N + L, 1.0);
    s_trip.emplace_back(N + L, N + ell, 1.0);
  }
  out.saddle.resize(N + L + 1, N + L + 1);
  out.saddle.setFromTriplets(s_trip.begin(), s_trip.end());
}

void factorize_into(CemSystem& system, const std::shared_ptr<CemFactorization>& fact) {
  if (!fact->analyzed) {
    fact->solver.analyzePattern(system.saddle);
    fact->analyzed = true;
  }
  fact->solver.factorize(system.saddle);
  if (fact->solver.info() != Eigen::Success)
    throw NumericalError("CEM saddle factorization failed");
  system.factorization = fact;
}

}  // namespace

CemSystem assemble_cem_system(const Mesh& mesh, const Conductivity& sigma,
                              const ElectrodeModel& electrodes) {
  CemSystem system;
  assemble_blocks(mesh, sigma, electrodes, system);
  factorize_into(system, std::make_shared<CemFactorization>());
  return system;
}

Eigen::VectorXd CemSystem::solve_raw(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != saddle.rows())
    throw DimensionError("solve_raw: right-hand side length mismatch");
  Eigen::VectorXd x = factorization->solver.solve(rhs);
  const double rhs_norm = rhs.norm();
  if (rhs_norm > 0.0) {
    const double rel = (saddle * x - rhs).norm() / rhs_norm;
    if (!(rel <= 1e-10))
      throw NumericalError("CEM solve residual " + std::to_string(rel) + " exceeds 1e-10");
  }
  return x;
}

void CemSystem::solve_currents(const Eigen::VectorXd& currents, Eigen::VectorXd& nodal,
                               Eigen::VectorXd& electrode) const {
  if (currents.size() != n_electrodes)
    throw DimensionError("solve_currents: current vector length != electrode count");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_nodes + n_electrodes + 1);
  rhs.segment(n_nodes, n_electrodes) = currents;
  const Eigen::VectorXd x = solve_raw(rhs);
  nodal = x.head(n_nodes);
  electrode = x.segment(n_nodes, n_electrodes);
}

ForwardSolution solve_forward(const CemSystem& system, const CurrentPatterns& patterns) {
  check_mean_free(patterns);
  if (patterns.n_electrodes() != system.n_electrodes)
    throw DimensionError("solve_forward: pattern length != electrode count");
  ForwardSolution sol;
  const int K = patterns.n_patterns();
  sol.nodal_potentials.resize(system.n_nodes, K);
  sol.electrode_voltages.resize(K, system.n_electrodes);
  Eigen::VectorXd nodal, electrode;
  for (int k = 0; k < K; ++k) {
    system.solve_currents(patterns.rows.row(k).transpose(), nodal, electrode);
    sol.nodal_potentials.col(k) = nodal;
    sol.electrode_voltages.row(k) = electrode.transpose();
  }
  return sol;
}

Eigen::VectorXd ForwardSolution::stacked() const {
  const int K = static_cast<int>(electrode_voltages.rows());
  const int L = static_cast<int>(electrode_voltages.cols());
  Eigen::VectorXd u(K * L);
  for (int k = 0; k < K; ++k) u.segment(k * L, L) = electrode_voltages.row(k).transpose();
  return u;
}

MeasurementFrame make_frame(const ForwardSolution& solution, const CurrentPatterns& patterns,
                            const std::string& mesh_tag) {
  MeasurementFrame frame;
  frame.voltages = solution.stacked();
  frame.pattern_kind = patterns.kind;
  frame.amplitude = patterns.amplitude;
  frame.n_patterns = patterns.n_patterns();
  frame.n_electrodes = patterns.n_electrodes();
  frame.mesh_tag = mesh_tag;
  return frame;
}

MeasurementFrame add_noise(const MeasurementFrame& clean, double delta, std::uint64_t seed) {
  if (delta < 0.0) throw ValidationError("add_noise: delta must be >= 0");
  MeasurementFrame noisy = clean;
  noisy.delta = delta;
  noisy.seed = seed;
  if (delta == 0.0) return noisy;
  const double scale = delta * clean.voltages.cwiseAbs().mean();
  Rng rng(seed);
  for (Eigen::Index i = 0; i < noisy.voltages.size(); ++i)
    noisy.voltages[i] += scale * rng.normal();
  return noisy;
}

Eigen::SparseMatrix<double> assemble_p1_stiffness(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    const Eigen::Matrix<double, 2, 3> g = p1_gradients(mesh, e);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        trip.emplace_back(el[a], el[b], mesh.element_areas[e] * g.col(a).dot(g.col(b)));
  }
  Eigen::SparseMatrix<double> K(mesh.node_count(), mesh.node_count());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

Eigen::SparseMatrix<double> assemble_p1_mass(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    const double w = mesh.element_areas[e] / 12.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) trip.emplace_back(el[a], el[b], (a == b ? 2.0 : 1.0) * w);
  }
  Eigen::SparseMatrix<double> M(mesh.node_count(), mesh.node_count());
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

ForwardOperator::ForwardOperator(const Mesh& mesh, ElectrodeModel electrodes,
                                 CurrentPatterns patterns)
    : mesh_(mesh),
      electrodes_(std::move(electrodes)),
      patterns_(std::move(patterns)),
      cached_(std::make_shared<CemFactorization>()) {
  check_mean_free(patterns_);
}

void ForwardOperator::set_sigma(const Conductivity& sigma) {
  sigma_ = sigma;
  assemble_blocks(mesh_, sigma_, electrodes_, system_);
  factorize_into(system_, cached_);
  solution_ = solve_forward(system_, patterns_);
}

}  // namespace eit
