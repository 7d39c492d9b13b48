#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eit/metrics.hpp"
#include "eit/simulate.hpp"

namespace eit {

struct SummaryStats {
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  int n = 0;
};

SummaryStats summarize(std::vector<double> values);

/// Scores of one reconstructed frame against its ground truth.
ScoreReport score_frame(const Eigen::VectorXd& gt_values, const Conductivity& rec,
                        const MeasurementFrame& frame, const Mesh& mesh,
                        const ElectrodeModel& electrodes, const CurrentPatterns& patterns,
                        double background);

struct FrameScore {
  int id = 0;
  ScoreReport scores;
};

/// Mean/std for the field scores and median/quartiles for the measurement
/// error, mirroring the benchmark table layout.
struct MethodSummary {
  std::string method;
  SummaryStats rel_l1, rel_l2, dice, dynamic_range, measurement_error;
};

MethodSummary summarize_scores(const std::string& method, const std::vector<FrameScore>& scores);

void write_scores_csv(const std::filesystem::path& path, const std::vector<FrameScore>& scores);
void write_summary_json(const std::filesystem::path& path, const MethodSummary& summary);
MethodSummary read_summary_json(const std::filesystem::path& path);

/// Markdown table from several method summaries (the report subcommand).
std::string render_report(const std::vector<MethodSummary>& summaries, bool real_data_columns);

/// Conductivity restricted to the element basis (P1 fields take vertex means).
Eigen::VectorXd to_element_basis(const Conductivity& sigma, const Mesh& mesh);

}  // namespace eit
