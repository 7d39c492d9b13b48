#include "eit/io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "eit/errors.hpp"

namespace eit {

namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

}  // namespace

void write_f64(const std::filesystem::path& path, const Eigen::VectorXd& values) {
  auto out = open_out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw IoError("short write: " + path.string());
}

void write_f64_rowmajor(const std::filesystem::path& path, const Eigen::MatrixXd& values) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = values;
  auto out = open_out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!out) throw IoError("short write: " + path.string());
}

Eigen::VectorXd read_f64(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open: " + path.string());
  const std::streamsize bytes = in.tellg();
  if (bytes % sizeof(double) != 0) throw IoError("not a float64 array: " + path.string());
  in.seekg(0);
  Eigen::VectorXd values(bytes / static_cast<std::streamsize>(sizeof(double)));
  in.read(reinterpret_cast<char*>(values.data()), bytes);
  if (!in) throw IoError("short read: " + path.string());
  return values;
}

void write_json(const std::filesystem::path& path, const std::string& json_text) {
  auto out = open_out(path, std::ios::out);
  out << json_text;
  if (!json_text.empty() && json_text.back() != '\n') out << '\n';
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_pgm(const std::filesystem::path& path, const PixelGrid& grid, int bits, double lo,
               double hi) {
  if (bits != 8 && bits != 16) throw ValidationError("write_pgm: bits must be 8 or 16");
  if (lo == hi) {
    lo = grid.values.minCoeff();
    hi = grid.values.maxCoeff();
    if (lo == hi) hi = lo + 1.0;
  }
  const int n = grid.resolution;
  const int maxval = bits == 8 ? 255 : 65535;
  auto out = open_out(path, std::ios::binary);
  out << "P5\n" << n << " " << n << "\n" << maxval << "\n";
  // PGM rows run top to bottom.
  for (int iy = n - 1; iy >= 0; --iy) {
    for (int ix = 0; ix < n; ++ix) {
      const double v = grid.values[static_cast<Eigen::Index>(iy) * n + ix];
      const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
      const unsigned q = static_cast<unsigned>(std::lround(t * maxval));
      if (bits == 8) {
        out.put(static_cast<char>(q));
      } else {
        out.put(static_cast<char>(q >> 8));
        out.put(static_cast<char>(q & 0xff));
      }
    }
  }
}

PixelGrid read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError("expected binary PGM (P5): " + path.string());
  auto next_token = [&in, &path]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw IoError("truncated PGM header: " + path.string());
  };
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (w != h) throw IoError("read_pgm: only square grids are supported");
  in.get();  // single whitespace after maxval
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw IoError("short PGM read: " + path.string());

  PixelGrid grid;
  grid.resolution = w;
  grid.values.resize(static_cast<Eigen::Index>(w) * h);
  grid.inside_mask.assign(static_cast<std::size_t>(w) * h, 1);
  for (int row = 0; row < h; ++row) {
    const int iy = h - 1 - row;
    for (int ix = 0; ix < w; ++ix) {
      const std::size_t k = (static_cast<std::size_t>(row) * w + ix) * bytes;
      const unsigned v = bytes == 1 ? raw[k] : (static_cast<unsigned>(raw[k]) << 8) | raw[k + 1];
      grid.values[static_cast<Eigen::Index>(iy) * w + ix] = static_cast<double>(v);
    }
  }
  return grid;
}

void write_grid(const std::filesystem::path& stem, const PixelGrid& grid, int pgm_bits) {
  std::filesystem::path f64 = stem;
  f64 += ".f64";
  write_f64(f64, grid.values);
  nlohmann::json side;
  side["resolution"] = grid.resolution;
  side["fill"] = grid.fill;
  side["radius"] = grid.radius;
  std::filesystem::path sidecar = f64;
  sidecar += ".json";
  write_json(sidecar, side.dump(2));
  std::filesystem::path pgm = stem;
  pgm += ".pgm";
  write_pgm(pgm, grid, pgm_bits);
}

void write_mesh_json(const std::filesystem::path& path, const Mesh& mesh) {
  nlohmann::json j;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (int i = 0; i < mesh.node_count(); ++i)
    nodes.push_back({mesh.nodes(i, 0), mesh.nodes(i, 1)});
  auto& elements = j["elements"] = nlohmann::json::array();
  for (int e = 0; e < mesh.element_count(); ++e)
    elements.push_back({mesh.elements(e, 0), mesh.elements(e, 1), mesh.elements(e, 2)});
  auto& bedges = j["boundary_edges"] = nlohmann::json::array();
  for (int i = 0; i < mesh.boundary_edges.rows(); ++i)
    bedges.push_back({mesh.boundary_edges(i, 0), mesh.boundary_edges(i, 1)});
  j["electrode_edges"] = mesh.electrode_edges;
  j["radius"] = mesh.radius;
  j["coverage"] = mesh.coverage;
  write_json(path, j.dump());
}

Mesh read_mesh_json(const std::filesystem::path& path) {
  const nlohmann::json j = nlohmann::json::parse(read_text(path));
  Mesh mesh;
  const auto& nodes = j.at("nodes");
  mesh.nodes.resize(static_cast<Eigen::Index>(nodes.size()), 2);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    mesh.nodes(static_cast<Eigen::Index>(i), 0) = nodes[i][0].get<double>();
    mesh.nodes(static_cast<Eigen::Index>(i), 1) = nodes[i][1].get<double>();
  }
  const auto& elements = j.at("elements");
  mesh.elements.resize(static_cast<Eigen::Index>(elements.size()), 3);
  for (std::size_t e = 0; e < elements.size(); ++e)
    for (int a = 0; a < 3; ++a)
      mesh.elements(static_cast<Eigen::Index>(e), a) = elements[e][a].get<int>();
  const auto& bedges = j.at("boundary_edges");
  mesh.boundary_edges.resize(static_cast<Eigen::Index>(bedges.size()), 2);
  for (std::size_t i = 0; i < bedges.size(); ++i)
    for (int a = 0; a < 2; ++a)
      mesh.boundary_edges(static_cast<Eigen::Index>(i), a) = bedges[i][a].get<int>();
  mesh.electrode_edges = j.at("electrode_edges").get<std::vector<std::vector<int>>>();
  mesh.radius = j.at("radius").get<double>();
  mesh.coverage = j.at("coverage").get<double>();
  mesh.element_areas.resize(mesh.element_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.elements.row(e);
    mesh.element_areas[e] = triangle_area(mesh.nodes.row(el[0]), mesh.nodes.row(el[1]),
                                          mesh.nodes.row(el[2]));
    if (mesh.element_areas[e] <= 0.0)
      throw GeometryError("read_mesh_json: inverted element in " + path.string());
  }
  return mesh;
}

Eigen::MatrixXd read_voltage_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV: " + path.string());
  // Header declares electrode order; only the column count is used here.
  std::size_t ncols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  std::vector<double> values;
  std::size_t nrows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++col;
    }
    if (col != ncols) throw IoError("ragged CSV row in " + path.string());
    ++nrows;
  }
  Eigen::MatrixXd rows(nrows, ncols);
  for (std::size_t r = 0; r < nrows; ++r)
    for (std::size_t c = 0; c < ncols; ++c)
      rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * ncols + c];
  return rows;
}

void write_voltage_csv(const std::filesystem::path& path, const Eigen::MatrixXd& rows) {
  auto out = open_out(path, std::ios::out);
  for (int c = 0; c < rows.cols(); ++c) out << (c ? ",e" : "e") << c;
  out << "\n";
  out.precision(17);
  for (int r = 0; r < rows.rows(); ++r) {
    for (int c = 0; c < rows.cols(); ++c) out << (c ? "," : "") << rows(r, c);
    out << "\n";
  }
}

}  // namespace eit
