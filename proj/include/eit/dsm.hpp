#pragma once

#include <Eigen/Dense>

#include "eit/forward.hpp"
#include "eit/mesh.hpp"

namespace eit {

/// Cauchy-difference lifting: per-pattern interior fields that solve the
/// background CEM driven by measured-minus-background electrode voltages.
struct LiftedField {
  Eigen::MatrixXd nodal;        // N x K
  Eigen::MatrixXd source_diff;  // K x L voltage differences (mean-projected)
};

/// Solves, for each pattern i, the CEM-type system at the background sigma0
/// with electrode charges set to the voltage difference row i.
LiftedField lift_cauchy_difference(const Mesh& mesh, const ElectrodeModel& electrodes,
                                   const Conductivity& sigma0,
                                   const Eigen::MatrixXd& voltage_diff);

/// Direct-sampling index map on nodes: |grad phi_i| normalized by the data
/// norm of pattern i, aggregated over patterns (maximum by default, mean with
/// mean_aggregate), scaled into [0, 1]. A set of all-zero lifted fields maps
/// to the flat zero index.
Eigen::VectorXd dsm_index(const LiftedField& fields, const Mesh& mesh,
                          bool mean_aggregate = false);

/// Node gradients of a P1 field by area-weighted averaging of element
/// gradients (columns x, y).
Eigen::MatrixX2d recover_node_gradients(const Eigen::VectorXd& field, const Mesh& mesh);

}  // namespace eit
