#include "eit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "eit/errors.hpp"

namespace eit {

std::pair<double, double> relative_errors(const Eigen::VectorXd& gt, const Eigen::VectorXd& rec,
                                          const Mesh& mesh) {
  if (gt.size() != mesh.element_count() || rec.size() != mesh.element_count())
    throw DimensionError("relative_errors: fields must be element-constant on the mesh");
  const Eigen::VectorXd& w = mesh.element_areas;
  const double l1_den = w.dot(gt.cwiseAbs());
  const double l2_den = w.dot(gt.cwiseAbs2());
  if (l1_den <= 0.0 || l2_den <= 0.0)
    throw ValidationError("relative_errors: zero-norm ground truth");
  const Eigen::VectorXd diff = gt - rec;
  const double l1 = w.dot(diff.cwiseAbs()) / l1_den;
  // The L2 score is the squared-norm ratio, not its square root.
  const double l2 = w.dot(diff.cwiseAbs2()) / l2_den;
  return {l1, l2};
}

OtsuResult otsu_thresholds(const Eigen::VectorXd& values, const Eigen::VectorXd& weights,
                           int bins) {
  if (values.size() != weights.size())
    throw DimensionError("otsu_thresholds: values/weights length mismatch");
  if (values.size() < 1) throw ValidationError("otsu_thresholds: empty input");

  OtsuResult res;
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  std::set<double> distinct;
  for (Eigen::Index i = 0; i < values.size() && distinct.size() < 3; ++i)
    distinct.insert(values[i]);
  if (distinct.size() < 3) {
    res.degenerate = true;
    res.t1 = lo;
    res.t2 = hi;
    return res;
  }

  const double width = (hi - lo) / bins;
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(bins);
  Eigen::VectorXd hist_mu = Eigen::VectorXd::Zero(bins);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    int b = static_cast<int>((values[i] - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    hist[b] += weights[i];
    hist_mu[b] += weights[i] * values[i];
  }
  Eigen::VectorXd cw(bins + 1), cm(bins + 1);
  cw[0] = cm[0] = 0.0;
  for (int b = 0; b < bins; ++b) {
    cw[b + 1] = cw[b] + hist[b];
    cm[b + 1] = cm[b] + hist_mu[b];
  }
  const double total_w = cw[bins];
  const double total_m = cm[bins];

  double best = -1.0;
  int best_a = 1, best_b = 2;
  // Thresholds sit between bins a-1|a and b-1|b.
  for (int a = 1; a < bins; ++a) {
    const double w0 = cw[a];
    if (w0 <= 0.0) continue;
    const double m0 = cm[a] / w0;
    for (int b = a + 1; b < bins; ++b) {
      const double w1 = cw[b] - cw[a];
      const double w2 = total_w - cw[b];
      if (w1 <= 0.0 || w2 <= 0.0) continue;
      const double m1 = (cm[b] - cm[a]) / w1;
      const double m2 = (total_m - cm[b]) / w2;
      const double mu = total_m / total_w;
      const double var = w0 * (m0 - mu) * (m0 - mu) + w1 * (m1 - mu) * (m1 - mu) +
                         w2 * (m2 - mu) * (m2 - mu);
      if (var > best) {
        best = var;
        best_a = a;
        best_b = b;
      }
    }
  }
  if (best < 0.0) {
    res.degenerate = true;
    res.t1 = lo;
    res.t2 = hi;
    return res;
  }
  res.t1 = lo + best_a * width;
  res.t2 = lo + best_b * width;
  return res;
}

Eigen::VectorXi segment_conductivity(const Eigen::VectorXd& values,
                                     const Eigen::VectorXd& weights, double background_value,
                                     int bins) {
  const OtsuResult otsu = otsu_thresholds(values, weights, bins);
  Eigen::VectorXi labels(values.size());
  if (otsu.degenerate) {
    labels.setConstant(kClassBackground);
    return labels;
  }
  // Which Otsu interval holds the background value?
  const double vb = std::clamp(background_value, values.minCoeff(), values.maxCoeff());
  const int bg_interval = vb <= otsu.t1 ? 0 : (vb <= otsu.t2 ? 1 : 2);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const int interval = values[i] <= otsu.t1 ? 0 : (values[i] <= otsu.t2 ? 1 : 2);
    labels[i] = interval < bg_interval   ? kClassResistive
                : interval > bg_interval ? kClassConductive
                                         : kClassBackground;
  }
  return labels;
}

Eigen::VectorXi labels_from_ground_truth(const Eigen::VectorXd& values, double background_value) {
  Eigen::VectorXi labels(values.size());
  const double tol = 1e-9 * std::max(1.0, std::abs(background_value));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    labels[i] = values[i] < background_value - tol   ? kClassResistive
                : values[i] > background_value + tol ? kClassConductive
                                                     : kClassBackground;
  }
  return labels;
}

DiceResult dice_labels(const Eigen::VectorXi& gt_labels, const Eigen::VectorXi& rec_labels,
                       const Eigen::VectorXd& weights, bool mean_over_present_only) {
  if (gt_labels.size() != rec_labels.size() || gt_labels.size() != weights.size())
    throw DimensionError("dice_labels: length mismatch");
  DiceResult out;
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < 3; ++c) {
    double tp = 0.0, fp = 0.0, fn = 0.0, gt_area = 0.0;
    for (Eigen::Index i = 0; i < gt_labels.size(); ++i) {
      const bool in_gt = gt_labels[i] == c;
      const bool in_rec = rec_labels[i] == c;
      if (in_gt) gt_area += weights[i];
      if (in_gt && in_rec) tp += weights[i];
      if (!in_gt && in_rec) fp += weights[i];
      if (in_gt && !in_rec) fn += weights[i];
    }
    const bool absent_both = tp + fp + fn == 0.0;
    out.per_class[c] = absent_both ? 1.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    if (!mean_over_present_only || gt_area > 0.0) {
      sum += out.per_class[c];
      ++counted;
    }
  }
  out.mean = counted > 0 ? sum / counted : 1.0;
  return out;
}

DiceResult dice_score(const Eigen::VectorXi& gt_labels, const Eigen::VectorXd& rec,
                      const Mesh& mesh, const DiceOptions& opts) {
  if (gt_labels.size() != mesh.element_count() || rec.size() != mesh.element_count())
    throw DimensionError("dice_score: fields must be element-constant on the mesh");
  const Eigen::VectorXi rec_labels =
      segment_conductivity(rec, mesh.element_areas, opts.background_value, opts.bins);
  return dice_labels(gt_labels, rec_labels, mesh.element_areas, opts.mean_over_present_only);
}

double dynamic_range(const Eigen::VectorXd& gt, const Eigen::VectorXd& rec) {
  const double gt_range = gt.maxCoeff() - gt.minCoeff();
  if (gt_range <= 0.0) throw ValidationError("dynamic_range: constant ground truth");
  return (rec.maxCoeff() - rec.minCoeff()) / gt_range;
}

double measurement_error(const Conductivity& rec, const MeasurementFrame& data, const Mesh& mesh,
                         const ElectrodeModel& electrodes, const CurrentPatterns& patterns) {
  const CemSystem system = assemble_cem_system(mesh, rec, electrodes);
  const ForwardSolution sol = solve_forward(system, patterns);
  const Eigen::VectorXd predicted = sol.stacked();
  if (predicted.size() != data.voltages.size())
    throw DimensionError("measurement_error: frame size does not match patterns");
  const double den = data.voltages.squaredNorm();
  if (den <= 0.0) throw ValidationError("measurement_error: zero measurement");
  return (predicted - data.voltages).squaredNorm() / den;
}

}  // namespace eit
