#include "eit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eit/errors.hpp"

namespace eit {

namespace {

struct RingLayout {
  int edges_per_electrode = 0;
  int edges_per_gap = 0;
  int n_boundary = 0;
  int layers = 0;
  std::vector<int> ring_counts;  // ring_counts[j-1] = nodes on ring j, j = 1..layers
};

std::vector<int> ring_counts_for(int layers, int n_boundary, int L) {
  std::vector<int> counts(layers);
  for (int j = 1; j < layers; ++j) {
    const double ideal = static_cast<double>(n_boundary) * j / layers;
    counts[j - 1] = L * std::max<int>(1, static_cast<int>(std::lround(ideal / L)));
  }
  counts[layers - 1] = n_boundary;
  return counts;
}

int element_count_for(const std::vector<int>& counts) {
  int total = counts[0];  // center fan
  for (std::size_t j = 1; j < counts.size(); ++j) total += counts[j - 1] + counts[j];
  return total;
}

RingLayout plan_layout(int L, double coverage, int target_elements, int edges_per_electrode) {
  RingLayout lay;
  const double nb_ideal = std::sqrt(2.0 * M_PI * target_elements);
  if (edges_per_electrode > 0) {
    lay.edges_per_electrode = edges_per_electrode;
    lay.edges_per_gap = std::max<int>(
        1, static_cast<int>(std::lround(edges_per_electrode * (1.0 - coverage) / coverage)));
  } else {
    lay.edges_per_electrode =
        std::max<int>(1, static_cast<int>(std::lround(coverage * nb_ideal / L)));
    lay.edges_per_gap =
        std::max<int>(1, static_cast<int>(std::lround((1.0 - coverage) * nb_ideal / L)));
  }
  lay.n_boundary = L * (lay.edges_per_electrode + lay.edges_per_gap);

  const int m0 = std::max(2, static_cast<int>(std::lround(
                                 static_cast<double>(target_elements) / lay.n_boundary)));
  int best_m = 0;
  long best_err = -1;
  for (int m = std::max(2, m0 - 4); m <= m0 + 4; ++m) {
    const auto counts = ring_counts_for(m, lay.n_boundary, L);
    const long err = std::labs(element_count_for(counts) - target_elements);
    if (best_err < 0 || err < best_err) {
      best_err = err;
      best_m = m;
    }
  }
  lay.layers = best_m;
  lay.ring_counts = ring_counts_for(best_m, lay.n_boundary, L);
  return lay;
}

// Triangulates the annulus between two concentric node rings, both listed in
// increasing angular order with node counts divisible by n_sectors. One
// angular sector is triangulated greedily by angle and then replicated by
// index rotation, so the connectivity is exactly n_sectors-fold symmetric.
void zip_rings(const std::vector<int>& inner, const std::vector<double>& inner_angles,
               const std::vector<int>& outer, const std::vector<double>& outer_angles,
               int n_sectors, std::vector<Eigen::Vector3i>& out) {
  const int ni = static_cast<int>(inner.size());
  const int no = static_cast<int>(outer.size());
  const int ni_s = ni / n_sectors;
  const int no_s = no / n_sectors;

  auto angle_at = [](const std::vector<double>& angles, int pos, int n) {
    return angles[pos % n] + 2.0 * M_PI * (pos / n);
  };

  int o_start = 0;
  while (o_start < no && outer_angles[o_start] < inner_angles[0]) ++o_start;

  // Local walk over one sector: advance whichever ring's next node comes
  // first by angle (ties advance the outer ring).
  struct Step {
    bool outer;
    int ii, oi;
  };
  std::vector<Step> steps;
  steps.reserve(ni_s + no_s);
  int ii = 0, oi = o_start;
  while (ii < ni_s || oi < o_start + no_s) {
    const bool can_i = ii < ni_s;
    const bool can_o = oi < o_start + no_s;
    bool take_outer;
    if (can_i && can_o)
      take_outer = angle_at(outer_angles, oi + 1, no) <= angle_at(inner_angles, ii + 1, ni);
    else
      take_outer = can_o;
    steps.push_back({take_outer, ii, oi});
    if (take_outer)
      ++oi;
    else
      ++ii;
  }

  for (int s = 0; s < n_sectors; ++s) {
    const int di = s * ni_s;
    const int doo = s * no_s;
    for (const Step& st : steps) {
      if (st.outer)
        out.emplace_back(outer[(st.oi + doo) % no], outer[(st.oi + 1 + doo) % no],
                         inner[(st.ii + di) % ni]);
      else
        out.emplace_back(inner[(st.ii + di) % ni], outer[(st.oi + doo) % no],
                         inner[(st.ii + 1 + di) % ni]);
    }
  }
}

}  // namespace

Mesh build_disk_mesh(double radius, int n_electrodes, double coverage, int target_elements,
                     int edges_per_electrode) {
  if (radius <= 0.0) throw ValidationError("build_disk_mesh: radius must be positive");
  if (n_electrodes < 2) throw ValidationError("build_disk_mesh: need at least 2 electrodes");
  if (target_elements < 64) throw ValidationError("build_disk_mesh: target_elements < 64");
  if (!(coverage > 0.0) || !(coverage < 1.0))
    throw GeometryError("build_disk_mesh: coverage must lie strictly in (0,1)");

  const int L = n_electrodes;
  const RingLayout lay = plan_layout(L, coverage, target_elements, edges_per_electrode);
  const int m = lay.layers;
  const int nb = lay.n_boundary;
  const int e_edges = lay.edges_per_electrode;
  const int g_edges = lay.edges_per_gap;

  const double arc_e = coverage * 2.0 * M_PI / L;     // electrode angular extent
  const double arc_g = (1.0 - coverage) * 2.0 * M_PI / L;

  // --- nodes ---
  int n_nodes = 1;
  for (int c : lay.ring_counts) n_nodes += c;
  Eigen::MatrixX2d nodes(n_nodes, 2);
  nodes.row(0).setZero();

  std::vector<int> ring_start(m + 1, 0);
  std::vector<std::vector<double>> ring_angles(m + 1);
  int cursor = 1;
  for (int j = 1; j <= m; ++j) {
    const int nj = lay.ring_counts[j - 1];
    const double rj = radius * j / m;
    ring_start[j] = cursor;
    ring_angles[j].resize(nj);
    if (j < m) {
      const double stagger = (j % 2) ? M_PI / nj : 0.0;
      for (int i = 0; i < nj; ++i) {
        const double th = stagger + 2.0 * M_PI * i / nj;
        ring_angles[j][i] = th;
        nodes.row(cursor++) = Eigen::RowVector2d(rj * std::cos(th), rj * std::sin(th));
      }
    } else {
      // Boundary ring: nodes at exact electrode endpoints, equal spacing
      // within each electrode and each gap.
      int i = 0;
      for (int ell = 0; ell < L; ++ell) {
        const double start = 2.0 * M_PI * ell / L - 0.5 * arc_e;
        for (int t = 0; t < e_edges; ++t)
          ring_angles[j][i++] = start + arc_e * t / e_edges;
        for (int t = 0; t < g_edges; ++t)
          ring_angles[j][i++] = start + arc_e + arc_g * t / g_edges;
      }
      // zip_rings needs increasing angles; shift the initial negative stretch.
      for (double& th : ring_angles[j])
        if (th < ring_angles[j][0]) th += 2.0 * M_PI;
      for (int k = 0; k < nj; ++k) {
        const double th = ring_angles[j][k];
        nodes.row(cursor++) = Eigen::RowVector2d(radius * std::cos(th), radius * std::sin(th));
      }
    }
  }

  // --- elements ---
  std::vector<Eigen::Vector3i> tris;
  tris.reserve(element_count_for(lay.ring_counts));
  {
    const int n1 = lay.ring_counts[0];
    for (int i = 0; i < n1; ++i)
      tris.emplace_back(0, ring_start[1] + i, ring_start[1] + (i + 1) % n1);
  }
  for (int j = 2; j <= m; ++j) {
    const int ni = lay.ring_counts[j - 2];
    const int no = lay.ring_counts[j - 1];
    std::vector<int> inner(ni), outer(no);
    std::iota(inner.begin(), inner.end(), ring_start[j - 1]);
    std::iota(outer.begin(), outer.end(), ring_start[j]);
    zip_rings(inner, ring_angles[j - 1], outer, ring_angles[j], L, tris);
  }

  Mesh mesh;
  mesh.radius = radius;
  mesh.coverage = coverage;
  mesh.nodes = std::move(nodes);
  mesh.elements.resize(static_cast<int>(tris.size()), 3);
  for (std::size_t t = 0; t < tris.size(); ++t) mesh.elements.row(static_cast<int>(t)) = tris[t];

  // --- Laplacian smoothing of interior nodes (Jacobi sweeps keep the L-fold
  // rotational symmetry of the layout intact) ---
  const int first_boundary = ring_start[m];
  {
    std::vector<std::vector<int>> nbrs(mesh.node_count());
    std::vector<std::vector<int>> incident(mesh.node_count());
    for (int t = 0; t < mesh.element_count(); ++t) {
      for (int a = 0; a < 3; ++a) {
        const int u = mesh.elements(t, a);
        incident[u].push_back(t);
        for (int b = 0; b < 3; ++b)
          if (a != b) nbrs[u].push_back(mesh.elements(t, b));
      }
    }
    for (auto& v : nbrs) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    const double relax = 0.5;
    for (int pass = 0; pass < 6; ++pass) {
      Eigen::MatrixX2d fresh = mesh.nodes;
      for (int u = 1; u < first_boundary; ++u) {
        Eigen::Vector2d avg = Eigen::Vector2d::Zero();
        for (int v : nbrs[u]) avg += mesh.nodes.row(v).transpose();
        avg /= static_cast<double>(nbrs[u].size());
        const Eigen::Vector2d cand =
            (1.0 - relax) * mesh.nodes.row(u).transpose() + relax * avg;
        bool ok = true;
        for (int t : incident[u]) {
          Eigen::Vector2d p[3];
          for (int a = 0; a < 3; ++a) {
            const int w = mesh.elements(t, a);
            p[a] = (w == u) ? cand : Eigen::Vector2d(mesh.nodes.row(w));
          }
          if (triangle_area(p[0], p[1], p[2]) <= 1e-14) {
            ok = false;
            break;
          }
        }
        if (ok) fresh.row(u) = cand;
      }
      mesh.nodes = std::move(fresh);
    }
  }

  // --- boundary edges and electrode groups ---
  mesh.boundary_edges.resize(nb, 2);
  for (int i = 0; i < nb; ++i) {
    mesh.boundary_edges(i, 0) = first_boundary + i;
    mesh.boundary_edges(i, 1) = first_boundary + (i + 1) % nb;
  }
  mesh.electrode_edges.resize(L);
  for (int ell = 0; ell < L; ++ell) {
    mesh.electrode_edges[ell].resize(e_edges);
    for (int t = 0; t < e_edges; ++t) mesh.electrode_edges[ell][t] = ell * (e_edges + g_edges) + t;
  }

  // --- areas and validation ---
  mesh.element_areas.resize(mesh.element_count());
  for (int t = 0; t < mesh.element_count(); ++t) {
    const auto el = mesh.elements.row(t);
    const double area = triangle_area(mesh.nodes.row(el[0]), mesh.nodes.row(el[1]),
                                      mesh.nodes.row(el[2]));
    if (area <= 0.0) throw GeometryError("build_disk_mesh: degenerate or inverted element");
    mesh.element_areas[t] = area;
  }
  const double rel_err =
      std::abs(mesh.element_count() - target_elements) / static_cast<double>(target_elements);
  if (rel_err > 0.15)
    throw GeometryError("build_disk_mesh: element count misses target by more than 15%");
  return mesh;
}

Eigen::Matrix<double, 2, 3> p1_gradients(const Mesh& mesh, int e) {
  const auto el = mesh.elements.row(e);
  const Eigen::Vector2d a = mesh.nodes.row(el[0]);
  const Eigen::Vector2d b = mesh.nodes.row(el[1]);
  const Eigen::Vector2d c = mesh.nodes.row(el[2]);
  const double inv2A = 1.0 / (2.0 * mesh.element_areas[e]);
  Eigen::Matrix<double, 2, 3> g;
  g.col(0) = Eigen::Vector2d(b.y() - c.y(), c.x() - b.x()) * inv2A;
  g.col(1) = Eigen::Vector2d(c.y() - a.y(), a.x() - c.x()) * inv2A;
  g.col(2) = Eigen::Vector2d(a.y() - b.y(), b.x() - a.x()) * inv2A;
  return g;
}

Eigen::Vector2d element_centroid(const Mesh& mesh, int e) {
  const auto el = mesh.elements.row(e);
  return (mesh.nodes.row(el[0]) + mesh.nodes.row(el[1]) + mesh.nodes.row(el[2])).transpose() /
         3.0;
}

Eigen::MatrixX2d element_centroids(const Mesh& mesh) {
  Eigen::MatrixX2d c(mesh.element_count(), 2);
  for (int e = 0; e < mesh.element_count(); ++e) c.row(e) = element_centroid(mesh, e).transpose();
  return c;
}

double median_edge_length(const Mesh& mesh) {
  std::vector<double> lens;
  lens.reserve(3 * mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    for (int a = 0; a < 3; ++a) {
      const Eigen::Vector2d p = mesh.nodes.row(el[a]);
      const Eigen::Vector2d q = mesh.nodes.row(el[(a + 1) % 3]);
      lens.push_back((p - q).norm());
    }
  }
  std::nth_element(lens.begin(), lens.begin() + lens.size() / 2, lens.end());
  return lens[lens.size() / 2];
}

Eigen::Vector3d barycentric(const Mesh& mesh, int e, const Eigen::Vector2d& p) {
  const auto el = mesh.elements.row(e);
  const Eigen::Vector2d a = mesh.nodes.row(el[0]);
  const Eigen::Vector2d b = mesh.nodes.row(el[1]);
  const Eigen::Vector2d c = mesh.nodes.row(el[2]);
  const double inv_area = 1.0 / mesh.element_areas[e];
  Eigen::Vector3d lam;
  lam[0] = triangle_area(p, b, c) * inv_area;
  lam[1] = triangle_area(a, p, c) * inv_area;
  lam[2] = triangle_area(a, b, p) * inv_area;
  return lam;
}

MeshLocator::MeshLocator(const Mesh& mesh) : mesh_(mesh) {
  nbins_ = std::max(4, static_cast<int>(std::sqrt(mesh.element_count() / 2.0)));
  lo_ = Eigen::Vector2d(mesh.nodes.col(0).minCoeff(), mesh.nodes.col(1).minCoeff());
  const Eigen::Vector2d hi(mesh.nodes.col(0).maxCoeff(), mesh.nodes.col(1).maxCoeff());
  cell_ = std::max(hi.x() - lo_.x(), hi.y() - lo_.y()) / nbins_ * (1.0 + 1e-12);
  bins_.assign(static_cast<std::size_t>(nbins_) * nbins_, {});
  centroids_ = element_centroids(mesh);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (int a = 0; a < 3; ++a) {
      xmin = std::min(xmin, mesh.nodes(el[a], 0));
      xmax = std::max(xmax, mesh.nodes(el[a], 0));
      ymin = std::min(ymin, mesh.nodes(el[a], 1));
      ymax = std::max(ymax, mesh.nodes(el[a], 1));
    }
    const int bx0 = std::clamp(static_cast<int>((xmin - lo_.x()) / cell_), 0, nbins_ - 1);
    const int bx1 = std::clamp(static_cast<int>((xmax - lo_.x()) / cell_), 0, nbins_ - 1);
    const int by0 = std::clamp(static_cast<int>((ymin - lo_.y()) / cell_), 0, nbins_ - 1);
    const int by1 = std::clamp(static_cast<int>((ymax - lo_.y()) / cell_), 0, nbins_ - 1);
    for (int by = by0; by <= by1; ++by)
      for (int bx = bx0; bx <= bx1; ++bx) bins_[by * nbins_ + bx].push_back(e);
  }
}

int MeshLocator::locate(const Eigen::Vector2d& p) const {
  const int bx = static_cast<int>((p.x() - lo_.x()) / cell_);
  const int by = static_cast<int>((p.y() - lo_.y()) / cell_);
  if (bx < 0 || by < 0 || bx >= nbins_ || by >= nbins_) return -1;
  for (int e : bins_[by * nbins_ + bx]) {
    const Eigen::Vector3d lam = barycentric(mesh_, e, p);
    if (lam.minCoeff() >= -1e-12) return e;
  }
  return -1;
}

int MeshLocator::nearest(const Eigen::Vector2d& p) const {
  int best = -1;
  double best_d = 1e300;
  const int bx = std::clamp(static_cast<int>((p.x() - lo_.x()) / cell_), 0, nbins_ - 1);
  const int by = std::clamp(static_cast<int>((p.y() - lo_.y()) / cell_), 0, nbins_ - 1);
  for (int radius = 0; radius < nbins_; ++radius) {
    for (int y = by - radius; y <= by + radius; ++y) {
      for (int x = bx - radius; x <= bx + radius; ++x) {
        if (x < 0 || y < 0 || x >= nbins_ || y >= nbins_) continue;
        if (std::max(std::abs(x - bx), std::abs(y - by)) != radius) continue;
        for (int e : bins_[y * nbins_ + x]) {
          const double d = (centroids_.row(e).transpose() - p).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = e;
          }
        }
      }
    }
    if (best >= 0 && radius >= 1) break;
  }
  return best;
}

PixelGrid mesh_to_grid(const Mesh& mesh, const Eigen::VectorXd& field, int resolution,
                       double fill) {
  const bool element_field = field.size() == mesh.element_count();
  const bool node_field = field.size() == mesh.node_count();
  if (!element_field && !node_field)
    throw DimensionError("mesh_to_grid: field length matches neither elements nor nodes");
  if (resolution < 1) throw ValidationError("mesh_to_grid: resolution must be >= 1");

  PixelGrid grid;
  grid.resolution = resolution;
  grid.fill = fill;
  grid.radius = mesh.radius;
  grid.values.setConstant(static_cast<Eigen::Index>(resolution) * resolution, fill);
  grid.inside_mask.assign(static_cast<std::size_t>(resolution) * resolution, 0);

  const MeshLocator locator(mesh);
  for (int iy = 0; iy < resolution; ++iy) {
    for (int ix = 0; ix < resolution; ++ix) {
      const Eigen::Vector2d p = grid.pixel_center(ix, iy);
      if (p.norm() > mesh.radius) continue;
      const std::size_t idx = static_cast<std::size_t>(iy) * resolution + ix;
      grid.inside_mask[idx] = 1;
      int e = locator.locate(p);
      if (e < 0) e = locator.nearest(p);  // center inside the circle, outside the polygon
      if (element_field) {
        grid.values[static_cast<Eigen::Index>(idx)] = field[e];
      } else {
        Eigen::Vector3d lam = barycentric(mesh, e, p).cwiseMax(0.0);
        lam /= lam.sum();
        const auto el = mesh.elements.row(e);
        grid.values[static_cast<Eigen::Index>(idx)] =
            lam[0] * field[el[0]] + lam[1] * field[el[1]] + lam[2] * field[el[2]];
      }
    }
  }
  return grid;
}

namespace {

double bilinear_at(const PixelGrid& grid, const Eigen::Vector2d& p) {
  const int n = grid.resolution;
  const double w = grid.pixel_width();
  // Coordinates in pixel-center units.
  double fx = (p.x() + grid.radius) / w - 0.5;
  double fy = (p.y() + grid.radius) / w - 0.5;
  fx = std::clamp(fx, 0.0, static_cast<double>(n - 1));
  fy = std::clamp(fy, 0.0, static_cast<double>(n - 1));
  const int x0 = std::min(static_cast<int>(fx), n - 2 >= 0 ? n - 2 : 0);
  const int y0 = std::min(static_cast<int>(fy), n - 2 >= 0 ? n - 2 : 0);
  const int x1 = std::min(x0 + 1, n - 1);
  const int y1 = std::min(y0 + 1, n - 1);
  const double tx = fx - x0;
  const double ty = fy - y0;
  auto at = [&](int x, int y) { return grid.values[static_cast<Eigen::Index>(y) * n + x]; };
  return (1 - tx) * (1 - ty) * at(x0, y0) + tx * (1 - ty) * at(x1, y0) +
         (1 - tx) * ty * at(x0, y1) + tx * ty * at(x1, y1);
}

}  // namespace

Eigen::VectorXd grid_to_mesh(const PixelGrid& grid, const Mesh& mesh) {
  if (grid.resolution < 2) throw ValidationError("grid_to_mesh: resolution must be >= 2");
  if (grid.values.size() != static_cast<Eigen::Index>(grid.resolution) * grid.resolution)
    throw DimensionError("grid_to_mesh: grid value count does not match resolution");
  Eigen::VectorXd field(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e)
    field[e] = bilinear_at(grid, element_centroid(mesh, e));
  return field;
}

Eigen::VectorXd grid_to_mesh_nearest(const PixelGrid& grid, const Mesh& mesh) {
  if (grid.resolution < 1) throw ValidationError("grid_to_mesh_nearest: empty grid");
  const int n = grid.resolution;
  const double w = grid.pixel_width();
  Eigen::VectorXd field(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Eigen::Vector2d p = element_centroid(mesh, e);
    const int ix = std::clamp(static_cast<int>((p.x() + grid.radius) / w), 0, n - 1);
    const int iy = std::clamp(static_cast<int>((p.y() + grid.radius) / w), 0, n - 1);
    field[e] = grid.values[static_cast<Eigen::Index>(iy) * n + ix];
  }
  return field;
}

}  // namespace eit
