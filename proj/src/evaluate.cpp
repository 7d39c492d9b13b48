#include "eit/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "eit/errors.hpp"
#include "eit/io.hpp"
#include "eit/recon.hpp"

namespace eit {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return (1.0 - t) * sorted[lo] + t * sorted[hi];
}

}  // namespace

SummaryStats summarize(std::vector<double> values) {
  SummaryStats s;
  s.n = static_cast<int>(values.size());
  if (values.empty()) return s;
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  s.mean = mean;
  s.stddev = std::sqrt(var);
  s.median = quantile(values, 0.5);
  s.q25 = quantile(values, 0.25);
  s.q75 = quantile(values, 0.75);
  return s;
}

Eigen::VectorXd to_element_basis(const Conductivity& sigma, const Mesh& mesh) {
  if (sigma.basis == SigmaBasis::element_constant) {
    if (sigma.values.size() != mesh.element_count())
      throw DimensionError("to_element_basis: field does not match the mesh");
    return sigma.values;
  }
  if (sigma.values.size() != mesh.node_count())
    throw DimensionError("to_element_basis: nodal field does not match the mesh");
  Eigen::VectorXd out(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    out[e] = (sigma.values[el[0]] + sigma.values[el[1]] + sigma.values[el[2]]) / 3.0;
  }
  return out;
}

ScoreReport score_frame(const Eigen::VectorXd& gt_values, const Conductivity& rec,
                        const MeasurementFrame& frame, const Mesh& mesh,
                        const ElectrodeModel& electrodes, const CurrentPatterns& patterns,
                        double background) {
  ScoreReport report;
  const Eigen::VectorXd rec_el = to_element_basis(rec, mesh);
  std::tie(report.rel_l1, report.rel_l2) = relative_errors(gt_values, rec_el, mesh);
  DiceOptions dopts;
  dopts.background_value = background;
  const Eigen::VectorXi gt_labels = labels_from_ground_truth(gt_values, background);
  const DiceResult dice = dice_score(gt_labels, rec_el, mesh, dopts);
  report.dice = dice.mean;
  report.dice_per_class = dice.per_class;
  report.dynamic_range = dynamic_range(gt_values, rec_el);
  Conductivity clipped = rec;
  clipped.values = clipped.values.cwiseMax(clipped.lower).cwiseMin(clipped.upper);
  report.measurement_error = measurement_error(clipped, frame, mesh, electrodes, patterns);
  return report;
}

MethodSummary summarize_scores(const std::string& method, const std::vector<FrameScore>& scores) {
  MethodSummary summary;
  summary.method = method;
  std::vector<double> l1, l2, ds, dr, me;
  for (const auto& s : scores) {
    l1.push_back(s.scores.rel_l1);
    l2.push_back(s.scores.rel_l2);
    ds.push_back(s.scores.dice);
    dr.push_back(s.scores.dynamic_range);
    me.push_back(s.scores.measurement_error);
  }
  summary.rel_l1 = summarize(std::move(l1));
  summary.rel_l2 = summarize(std::move(l2));
  summary.dice = summarize(std::move(ds));
  summary.dynamic_range = summarize(std::move(dr));
  summary.measurement_error = summarize(std::move(me));
  return summary;
}

void write_scores_csv(const std::filesystem::path& path, const std::vector<FrameScore>& scores) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "id,rel_l1,rel_l2,dice,dynamic_range,measurement_error,"
         "dice_resistive,dice_background,dice_conductive\n";
  out.precision(12);
  for (const auto& s : scores) {
    out << s.id << ',' << s.scores.rel_l1 << ',' << s.scores.rel_l2 << ',' << s.scores.dice << ','
        << s.scores.dynamic_range << ',' << s.scores.measurement_error << ','
        << s.scores.dice_per_class[0] << ',' << s.scores.dice_per_class[1] << ','
        << s.scores.dice_per_class[2] << '\n';
  }
}

namespace {

nlohmann::json stats_json(const SummaryStats& s) {
  return {{"mean", s.mean},   {"std", s.stddev}, {"median", s.median},
          {"q25", s.q25},     {"q75", s.q75},    {"n", s.n}};
}

SummaryStats stats_from_json(const nlohmann::json& j) {
  SummaryStats s;
  s.mean = j.at("mean").get<double>();
  s.stddev = j.at("std").get<double>();
  s.median = j.at("median").get<double>();
  s.q25 = j.at("q25").get<double>();
  s.q75 = j.at("q75").get<double>();
  s.n = j.at("n").get<int>();
  return s;
}

}  // namespace

void write_summary_json(const std::filesystem::path& path, const MethodSummary& summary) {
  nlohmann::json j;
  j["method"] = summary.method;
  j["rel_l1"] = stats_json(summary.rel_l1);
  j["rel_l2"] = stats_json(summary.rel_l2);
  j["dice"] = stats_json(summary.dice);
  j["dynamic_range"] = stats_json(summary.dynamic_range);
  j["measurement_error"] = stats_json(summary.measurement_error);
  write_json(path, j.dump(2));
}

MethodSummary read_summary_json(const std::filesystem::path& path) {
  const nlohmann::json j = nlohmann::json::parse(read_text(path));
  MethodSummary s;
  s.method = j.at("method").get<std::string>();
  s.rel_l1 = stats_from_json(j.at("rel_l1"));
  s.rel_l2 = stats_from_json(j.at("rel_l2"));
  s.dice = stats_from_json(j.at("dice"));
  s.dynamic_range = stats_from_json(j.at("dynamic_range"));
  s.measurement_error = stats_from_json(j.at("measurement_error"));
  return s;
}

std::string render_report(const std::vector<MethodSummary>& summaries, bool real_data_columns) {
  std::ostringstream out;
  auto fmt = [](double v) {
    std::ostringstream ss;
    if (v != 0.0 && (std::abs(v) < 1e-2 || std::abs(v) >= 1e4))
      ss << std::scientific << std::setprecision(2) << v;
    else
      ss << std::fixed << std::setprecision(3) << v;
    return ss.str();
  };
  if (real_data_columns) {
    out << "| Method | DS | Meas. Error |\n|---|---|---|\n";
    for (const auto& s : summaries)
      out << "| " << s.method << " | " << fmt(s.dice.mean) << " +- " << fmt(s.dice.stddev)
          << " | " << fmt(s.measurement_error.median) << " (" << fmt(s.measurement_error.q25)
          << ", " << fmt(s.measurement_error.q75) << ") |\n";
  } else {
    out << "| Method | Rel. L1-Error | Rel. L2-Error | DS | DR | Meas. Error |\n"
        << "|---|---|---|---|---|---|\n";
    for (const auto& s : summaries) {
      out << "| " << s.method << " | " << fmt(s.rel_l1.mean) << " +- " << fmt(s.rel_l1.stddev)
          << " | " << fmt(s.rel_l2.mean) << " +- " << fmt(s.rel_l2.stddev) << " | "
          << fmt(s.dice.mean) << " +- " << fmt(s.dice.stddev) << " | "
          << fmt(s.dynamic_range.mean) << " +- " << fmt(s.dynamic_range.stddev) << " | "
          << fmt(s.measurement_error.median) << " (" << fmt(s.measurement_error.q25) << ", "
          << fmt(s.measurement_error.q75) << ") |\n";
    }
  }
  return out.str();
}

void write_trace_csv(const std::string& path, const std::vector<IterationRecord>& history) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "iteration,misfit,penalty,step,backtracks,nonzeros,monotonicity_ref,wall_seconds\n";
  out.precision(12);
  for (const auto& r : history)
    out << r.iteration << ',' << r.misfit << ',' << r.penalty << ',' << r.step << ','
        << r.backtracks << ',' << r.nonzeros << ',' << r.monotonicity_ref << ','
        << r.wall_seconds << '\n';
}

}  // namespace eit
