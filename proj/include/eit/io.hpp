#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "eit/mesh.hpp"

namespace eit {

// Raw little-endian float64 array with a JSON sidecar next to it
// (<path>.json for <path>). Vectors are written in storage order, matrices
// row-major.
void write_f64(const std::filesystem::path& path, const Eigen::VectorXd& values);
void write_f64_rowmajor(const std::filesystem::path& path, const Eigen::MatrixXd& values);
Eigen::VectorXd read_f64(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const std::string& json_text);
std::string read_text(const std::filesystem::path& path);

/// PGM (P5) export; bits must be 8 or 16. Values are mapped linearly from
/// [lo, hi] (lo == hi falls back to the value range of the data).
void write_pgm(const std::filesystem::path& path, const PixelGrid& grid, int bits = 8,
               double lo = 0.0, double hi = 0.0);

/// PGM import as raw gray levels.
PixelGrid read_pgm(const std::filesystem::path& path);

/// Grid export: <stem>.f64 + <stem>.f64.json sidecar (resolution, fill) and a
/// PGM preview.
void write_grid(const std::filesystem::path& stem, const PixelGrid& grid, int pgm_bits = 8);

// Mesh serialization: JSON document with nodes/elements/boundary_edges/
// electrode_edges/radius/coverage.
void write_mesh_json(const std::filesystem::path& path, const Mesh& mesh);
Mesh read_mesh_json(const std::filesystem::path& path);

/// CSV ingestion for externally measured voltage data: header row declaring
/// electrode order ("e0,e1,..."), one row of L voltages per pattern.
Eigen::MatrixXd read_voltage_csv(const std::filesystem::path& path);
void write_voltage_csv(const std::filesystem::path& path, const Eigen::MatrixXd& rows);

}  // namespace eit
