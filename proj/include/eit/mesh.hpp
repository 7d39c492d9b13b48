#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace eit {

/// Triangulated disk with boundary nodes aligned to electrode extents.
/// Node ordering is center, then concentric rings outward; the boundary ring
/// comes last, laid out electrode-by-electrode. Immutable after construction.
struct Mesh {
  Eigen::MatrixX2d nodes;
  Eigen::MatrixX3i elements;        // CCW triples
  Eigen::MatrixX2i boundary_edges;  // CCW along boundary (domain on the left)
  std::vector<std::vector<int>> electrode_edges;  // indices into boundary_edges
  Eigen::VectorXd element_areas;
  double radius = 1.0;
  double coverage = 0.0;

  int node_count() const { return static_cast<int>(nodes.rows()); }
  int element_count() const { return static_cast<int>(elements.rows()); }
  int electrode_count() const { return static_cast<int>(electrode_edges.size()); }
};

/// n x n pixels over [-radius, radius]^2; pixel (ix, iy) is stored at
/// iy*n + ix with iy counting upward from the bottom row.
struct PixelGrid {
  int resolution = 0;
  Eigen::VectorXd values;
  std::vector<std::uint8_t> inside_mask;  // pixel center inside the disk
  double fill = 0.0;
  double radius = 1.0;

  double pixel_width() const { return 2.0 * radius / resolution; }
  Eigen::Vector2d pixel_center(int ix, int iy) const {
    const double w = pixel_width();
    return {-radius + (ix + 0.5) * w, -radius + (iy + 0.5) * w};
  }
};

/// Structured polar-layer mesh of the disk. Electrode endpoints coincide with
/// boundary nodes; electrode ell is centered at angle 2*pi*ell/L. The layer
/// count is chosen by a closed-form estimate so the element count lands within
/// +-15% of target_elements. edges_per_electrode == 0 picks the edge count
/// that balances radial and circumferential spacing.
Mesh build_disk_mesh(double radius, int n_electrodes, double coverage,
                     int target_elements, int edges_per_electrode = 0);

/// Point-location accelerator (uniform bins over element bounding boxes).
class MeshLocator {
 public:
  explicit MeshLocator(const Mesh& mesh);

  /// Element containing p, or -1 if p is outside the triangulation.
  int locate(const Eigen::Vector2d& p) const;

  /// Element with the nearest centroid; never fails on a nonempty mesh.
  int nearest(const Eigen::Vector2d& p) const;

 private:
  const Mesh& mesh_;
  int nbins_;
  double cell_;
  Eigen::Vector2d lo_;
  std::vector<std::vector<int>> bins_;
  Eigen::MatrixX2d centroids_;
};

PixelGrid mesh_to_grid(const Mesh& mesh, const Eigen::VectorXd& field,
                       int resolution, double fill);

/// Bilinear interpolation of the grid at element centroids.
Eigen::VectorXd grid_to_mesh(const PixelGrid& grid, const Mesh& mesh);

/// Nearest-pixel lookup at element centroids (for categorical grids).
Eigen::VectorXd grid_to_mesh_nearest(const PixelGrid& grid, const Mesh& mesh);

// --- element geometry helpers ---

inline double triangle_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                            const Eigen::Vector2d& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

/// Gradients of the three P1 shape functions on element e (columns).
Eigen::Matrix<double, 2, 3> p1_gradients(const Mesh& mesh, int e);

Eigen::Vector2d element_centroid(const Mesh& mesh, int e);

/// Centroids of all elements, row per element.
Eigen::MatrixX2d element_centroids(const Mesh& mesh);

double median_edge_length(const Mesh& mesh);

/// Barycentric coordinates of p in element e.
Eigen::Vector3d barycentric(const Mesh& mesh, int e, const Eigen::Vector2d& p);

}  // namespace eit
