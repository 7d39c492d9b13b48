#include <doctest.h>

#include <filesystem>

#include "eit/io.hpp"
#include "eit/mesh.hpp"
#include "eit/rng.hpp"

using namespace eit;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  const fs::path dir = fs::temp_directory_path() / "eit_io_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("f64 round trip is bit exact") {
  Rng rng(4);
  Eigen::VectorXd values(257);
  for (int i = 0; i < values.size(); ++i) values[i] = rng.normal() * 1e-3;
  const fs::path path = tmp_dir() / "values.f64";
  write_f64(path, values);
  const Eigen::VectorXd back = read_f64(path);
  REQUIRE(back.size() == values.size());
  CHECK((back - values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mesh JSON round trip preserves geometry and topology") {
  const Mesh mesh = build_disk_mesh(1.0, 8, 0.45, 300);
  const fs::path path = tmp_dir() / "mesh.json";
  write_mesh_json(path, mesh);
  const Mesh back = read_mesh_json(path);
  CHECK(back.node_count() == mesh.node_count());
  CHECK(back.element_count() == mesh.element_count());
  CHECK((back.nodes - mesh.nodes).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.elements - mesh.elements).cwiseAbs().maxCoeff() == 0);
  CHECK(back.electrode_edges == mesh.electrode_edges);
  CHECK(back.radius == mesh.radius);
  CHECK(back.coverage == mesh.coverage);
}

TEST_CASE("pgm round trip (16-bit) preserves quantized levels") {
  PixelGrid grid;
  grid.resolution = 16;
  grid.values.resize(256);
  Rng rng(8);
  for (int i = 0; i < 256; ++i) grid.values[i] = rng.uniform(0.0, 1.0);
  grid.inside_mask.assign(256, 1);
  const fs::path path = tmp_dir() / "grid.pgm";
  write_pgm(path, grid, 16, 0.0, 1.0);
  const PixelGrid back = read_pgm(path);
  REQUIRE(back.resolution == 16);
  for (int i = 0; i < 256; ++i)
    CHECK(back.values[i] / 65535.0 == doctest::Approx(grid.values[i]).epsilon(1e-4));
}

TEST_CASE("voltage CSV round trip") {
  Eigen::MatrixXd rows(3, 5);
  Rng rng(15);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 5; ++c) rows(r, c) = rng.normal();
  const fs::path path = tmp_dir() / "frame.csv";
  write_voltage_csv(path, rows);
  const Eigen::MatrixXd back = read_voltage_csv(path);
  REQUIRE(back.rows() == 3);
  REQUIRE(back.cols() == 5);
  CHECK((back - rows).cwiseAbs().maxCoeff() < 1e-15);
}
