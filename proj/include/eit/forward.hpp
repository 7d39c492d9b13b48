#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <memory>
#include <string>

#include "eit/mesh.hpp"

namespace eit {

enum class SigmaBasis { element_constant, node_linear };

/// Conductivity field with admissibility box [lower, upper], lower > 0.
struct Conductivity {
  SigmaBasis basis = SigmaBasis::element_constant;
  Eigen::VectorXd values;  // S/m; length = element count (P0) or node count (P1)
  double lower = 1e-3;
  double upper = 10.0;

  static Conductivity homogeneous(const Mesh& mesh, double value,
                                  SigmaBasis basis = SigmaBasis::element_constant);
};

/// Throws ValidationError if sigma leaves its admissible box or has the wrong
/// length for the mesh.
void validate_admissible(const Conductivity& sigma, const Mesh& mesh);

struct ElectrodeModel {
  Eigen::VectorXd contact_impedance;  // z_ell, Ohm*m, all positive

  int count() const { return static_cast<int>(contact_impedance.size()); }
  static ElectrodeModel uniform(int n_electrodes, double z);
};

/// K mean-free injection vectors of length L (amperes), one per row.
struct CurrentPatterns {
  Eigen::MatrixXd rows;
  double amplitude = 0.0;
  std::string kind;

  int n_patterns() const { return static_cast<int>(rows.rows()); }
  int n_electrodes() const { return static_cast<int>(rows.cols()); }
};

/// Row k injects +amplitude at electrode k and -amplitude at k+1 (mod L).
CurrentPatterns adjacent_patterns(int n_electrodes, double amplitude);

/// L-1 trigonometric patterns: cos((k+1)theta/2) for odd k, sin(k theta/2)
/// for even k, mean-subtracted and scaled to max amplitude. Requires even L.
CurrentPatterns trig_patterns(int n_electrodes, double amplitude);

struct CemFactorization;  // SimplicialLDLT of the saddle matrix

/// Assembled CEM blocks plus the grounded saddle system
///   [ A   B   0 ]
///   [ B^T D   1 ]
///   [ 0   1^T 0 ]
/// with the Lagrange multiplier enforcing sum(U) = 0. Immutable after
/// assembly; solves against the shared factorization are read-only.
struct CemSystem {
  Eigen::SparseMatrix<double> admittance;          // A, N x N
  Eigen::SparseMatrix<double> coupling;            // B, N x L
  Eigen::VectorXd electrode_conductance;           // D diagonal, |e_ell| / z_ell
  Eigen::SparseMatrix<double> saddle;              // (N+L+1) x (N+L+1)
  std::shared_ptr<const CemFactorization> factorization;
  int n_nodes = 0;
  int n_electrodes = 0;

  /// Solves the grounded system for one current vector (length L, need not be
  /// mean-free: the multiplier absorbs the incompatible part). Returns nodal
  /// potentials and electrode values.
  void solve_currents(const Eigen::VectorXd& currents, Eigen::VectorXd& nodal,
                      Eigen::VectorXd& electrode) const;

  /// Solves the saddle system for a full-length right-hand side.
  Eigen::VectorXd solve_raw(const Eigen::VectorXd& rhs) const;
};

CemSystem assemble_cem_system(const Mesh& mesh, const Conductivity& sigma,
                              const ElectrodeModel& electrodes);

struct ForwardSolution {
  Eigen::MatrixXd nodal_potentials;   // N x K
  Eigen::MatrixXd electrode_voltages; // K x L, row per pattern

  /// Pattern-major stacking (k*L + ell).
  Eigen::VectorXd stacked() const;
};

ForwardSolution solve_forward(const CemSystem& system, const CurrentPatterns& patterns);

/// Stacked electrode voltages (K*L, pattern-major) plus noise metadata.
struct MeasurementFrame {
  Eigen::VectorXd voltages;
  double delta = 0.0;  // relative noise level
  std::string pattern_kind;
  double amplitude = 0.0;
  int n_patterns = 0;
  int n_electrodes = 0;
  std::uint64_t seed = 0;
  std::string mesh_tag;

  Eigen::VectorXd pattern(int k) const { return voltages.segment(k * n_electrodes, n_electrodes); }
};

MeasurementFrame make_frame(const ForwardSolution& solution, const CurrentPatterns& patterns,
                            const std::string& mesh_tag);

/// U_delta = U + delta * mean(|U|) * eps with eps iid standard normal from the
/// seeded generator.
MeasurementFrame add_noise(const MeasurementFrame& clean, double delta, std::uint64_t seed);

// P1 stiffness (unit coefficient) and mass matrices; shared by the Sobolev
// gradient solver and the H1 inner products of the sparsity method.
Eigen::SparseMatrix<double> assemble_p1_stiffness(const Mesh& mesh);
Eigen::SparseMatrix<double> assemble_p1_mass(const Mesh& mesh);

/// Persistent forward engine for iterative reconstruction: the saddle sparsity
/// pattern and its symbolic analysis are computed once and reused across
/// conductivity updates.
class ForwardOperator {
 public:
  ForwardOperator(const Mesh& mesh, ElectrodeModel electrodes, CurrentPatterns patterns);

  void set_sigma(const Conductivity& sigma);

  const Mesh& mesh() const { return mesh_; }
  const ElectrodeModel& electrodes() const { return electrodes_; }
  const CurrentPatterns& patterns() const { return patterns_; }
  const CemSystem& system() const { return system_; }
  const ForwardSolution& solution() const { return solution_; }
  const Conductivity& sigma() const { return sigma_; }

  /// Stacked voltages at the current sigma.
  Eigen::VectorXd predicted() const { return solution_.stacked(); }

 private:
  const Mesh& mesh_;
  ElectrodeModel electrodes_;
  CurrentPatterns patterns_;
  Conductivity sigma_;
  CemSystem system_;
  ForwardSolution solution_;
  std::shared_ptr<CemFactorization> cached_;
};

}  // namespace eit
