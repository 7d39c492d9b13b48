#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eit/forward.hpp"
#include "eit/mesh.hpp"

namespace eit {

enum class InclusionKind { ellipse, rectangle, triangle, l_shape };

std::string to_string(InclusionKind kind);

struct Inclusion {
  InclusionKind kind = InclusionKind::ellipse;
  double value = 1.0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  // ellipse parameters
  double semi_a = 0.0, semi_b = 0.0, angle = 0.0;
  // polygonal kinds (CCW vertices)
  std::vector<Eigen::Vector2d> polygon;

  bool contains(const Eigen::Vector2d& p) const;
  /// Radius of the bounding circle about center (overlap tests).
  double bounding_radius() const;
  /// Analytic area (ellipse) or shoelace area (polygons).
  double area() const;
};

struct Phantom {
  std::vector<Inclusion> inclusions;
  double background = 1.0;
  std::uint64_t seed = 0;
  bool resampled = false;  // rejection budget was exhausted at least once

  /// Element-constant conductivity by centroid membership.
  Eigen::VectorXd render(const Mesh& mesh) const;
};

struct PhantomConfig {
  double background = 1.31;
  double low_min = 0.01, low_max = 0.3;
  double high_min = 2.0, high_max = 3.0;
  double center_max = 0.75;
  double axis_min = 0.15, axis_max = 0.4;
  double margin = 0.02;  // fraction of the disk radius
  int max_tries = 500;
};

/// 1-3 non-overlapping ellipses, conductive or resistive each, deterministic
/// per seed.
Phantom sample_ellipse_phantom(std::uint64_t seed, const PhantomConfig& cfg = {});

enum class OodKind { rectangle, triangle, l_shape, mixed };

std::string to_string(OodKind kind);

/// Out-of-distribution phantom with polygonal inclusions.
Phantom ood_phantom(OodKind kind, std::uint64_t seed, const PhantomConfig& cfg = {});

/// Renders the phantom on the simulation mesh, solves the forward problem and
/// adds relative noise. The reconstruction meshes stay coarser by protocol,
/// which keeps the inverse crime structural.
MeasurementFrame simulate_measurements(const Phantom& phantom, const Mesh& dense_mesh,
                                       const ElectrodeModel& electrodes,
                                       const CurrentPatterns& patterns, double delta,
                                       std::uint64_t seed);

struct DatasetConfig {
  std::filesystem::path out_dir;
  std::string preset = "ellipses";  // "ellipses" or "ood"
  int train = 2000;
  int val = 200;
  int test = 100;
  int ood_per_kind = 1;
  std::uint64_t master_seed = 20240817;
  double delta = 0.005;
  double background = 1.31;
  int n_electrodes = 16;
  double coverage = 0.45;
  int coarse_elements = 5248;
  int dense_elements = 8072;
  double amplitude = 0.002;
  std::string pattern_kind = "adjacent";
  double contact_impedance = 1e-2;
  PhantomConfig phantom;
};

struct DatasetEntry {
  int id = 0;
  std::string split;  // train/val/test/ood
  std::string kind;   // ellipse or ood kind
  std::string phantom_path;
  std::string frame_path;
  std::uint64_t seed = 0;
  double snr_db = 0.0;
};

struct DatasetManifest {
  DatasetConfig config;
  std::vector<DatasetEntry> entries;
  std::string baseline_clean;
  std::string baseline_noisy;
  std::uint64_t baseline_seed = 0;

  std::vector<DatasetEntry> split(const std::string& name) const;
};

/// Writes manifest.json, phantoms/NNNN.f64 (coarse-mesh element fields),
/// frames/NNNN.f64 plus sidecars, and the background baseline frames.
DatasetManifest generate_dataset(const DatasetConfig& cfg);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Convenience: rebuilds the protocol objects a dataset was generated with.
struct ProtocolObjects {
  Mesh coarse;
  Mesh dense;
  ElectrodeModel electrodes;
  CurrentPatterns patterns;
};
ProtocolObjects protocol_from_config(const DatasetConfig& cfg);

MeasurementFrame read_frame(const std::filesystem::path& f64_path);
void write_frame(const std::filesystem::path& f64_path, const MeasurementFrame& frame);

}  // namespace eit
