#pragma once

#include <Eigen/Dense>
#include <utility>

#include "eit/forward.hpp"
#include "eit/mesh.hpp"

namespace eit {

// Segmentation classes, in value order.
inline constexpr int kClassResistive = 0;
inline constexpr int kClassBackground = 1;
inline constexpr int kClassConductive = 2;

/// Area-weighted relative L1 and (squared-ratio) L2 errors between two
/// element-constant fields on the same mesh.
std::pair<double, double> relative_errors(const Eigen::VectorXd& gt, const Eigen::VectorXd& rec,
                                          const Mesh& mesh);

struct OtsuResult {
  double t1 = 0.0;
  double t2 = 0.0;
  bool degenerate = false;  // fewer than 3 usable value clusters
};

/// Two thresholds maximizing the between-class variance of a 3-way split,
/// exhaustive over a binned histogram (weights are typically element areas).
OtsuResult otsu_thresholds(const Eigen::VectorXd& values, const Eigen::VectorXd& weights,
                           int bins = 256);

/// Otsu segmentation of a reconstruction into resistive / background /
/// conductive. The Otsu interval containing background_value is mapped to the
/// background class, intervals below to resistive, above to conductive, which
/// keeps the labels meaningful when only one inclusion polarity is present.
Eigen::VectorXi segment_conductivity(const Eigen::VectorXd& values,
                                     const Eigen::VectorXd& weights, double background_value,
                                     int bins = 256);

/// Exact labels for a piecewise-constant ground truth.
Eigen::VectorXi labels_from_ground_truth(const Eigen::VectorXd& values, double background_value);

struct DiceOptions {
  double background_value = 1.0;
  /// Benchmark convention: average only over classes present in the ground
  /// truth. With false, all three classes enter the mean and a class absent
  /// from both fields scores 1.
  bool mean_over_present_only = true;
  int bins = 256;
};

struct DiceResult {
  double mean = 0.0;
  Eigen::Vector3d per_class = Eigen::Vector3d::Zero();  // absent-in-both classes score 1
};

/// Segments rec via Otsu and computes area-weighted per-class Dice overlap
/// against the ground-truth labels.
DiceResult dice_score(const Eigen::VectorXi& gt_labels, const Eigen::VectorXd& rec,
                      const Mesh& mesh, const DiceOptions& opts);

/// Dice between two label fields directly (mask-based evaluation).
DiceResult dice_labels(const Eigen::VectorXi& gt_labels, const Eigen::VectorXi& rec_labels,
                       const Eigen::VectorXd& weights, bool mean_over_present_only = true);

/// (max rec - min rec) / (max gt - min gt); gt must be non-constant.
double dynamic_range(const Eigen::VectorXd& gt, const Eigen::VectorXd& rec);

/// |F(rec) I - U_delta|^2 / |U_delta|^2 via one forward solve.
double measurement_error(const Conductivity& rec, const MeasurementFrame& data, const Mesh& mesh,
                         const ElectrodeModel& electrodes, const CurrentPatterns& patterns);

struct ScoreReport {
  double rel_l1 = 0.0;
  double rel_l2 = 0.0;
  double dice = 0.0;
  double dynamic_range = 0.0;
  double measurement_error = 0.0;
  Eigen::Vector3d dice_per_class = Eigen::Vector3d::Zero();
};

}  // namespace eit
