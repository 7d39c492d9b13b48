#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "eit/io.hpp"
#include "eit/simulate.hpp"

using namespace eit;
namespace fs = std::filesystem;

TEST_CASE("ellipse phantoms respect the protocol ranges and determinism") {
  for (std::uint64_t seed : {1ull, 2ull, 77ull, 1234ull}) {
    const Phantom p = sample_ellipse_phantom(seed);
    CHECK(p.background == 1.31);
    CHECK(p.inclusions.size() >= 1);
    CHECK(p.inclusions.size() <= 3);
    for (const auto& inc : p.inclusions) {
      const bool low = inc.value >= 0.01 && inc.value <= 0.3;
      const bool high = inc.value >= 2.0 && inc.value <= 3.0;
      CHECK((low || high));
      CHECK(inc.center.norm() + inc.bounding_radius() <= 0.98 + 1e-12);
    }
    // pairwise non-overlap with margin
    for (std::size_t i = 0; i < p.inclusions.size(); ++i)
      for (std::size_t j = i + 1; j < p.inclusions.size(); ++j)
        CHECK((p.inclusions[i].center - p.inclusions[j].center).norm() >=
              p.inclusions[i].bounding_radius() + p.inclusions[j].bounding_radius() + 0.02 -
                  1e-12);

    const Phantom q = sample_ellipse_phantom(seed);
    REQUIRE(q.inclusions.size() == p.inclusions.size());
    for (std::size_t i = 0; i < p.inclusions.size(); ++i) {
      CHECK(q.inclusions[i].value == p.inclusions[i].value);
      CHECK((q.inclusions[i].center - p.inclusions[i].center).norm() == 0.0);
    }
  }
}

TEST_CASE("ood phantoms: shape guarantees") {
  const Mesh mesh = build_disk_mesh(1.0, 16, 0.45, 2000);

  const Phantom l = ood_phantom(OodKind::l_shape, 5);
  REQUIRE(l.inclusions.size() == 1);
  CHECK(l.inclusions[0].polygon.size() == 6);

  // triangle area matches the analytic area within 2 element areas
  const Phantom t = ood_phantom(OodKind::triangle, 9);
  REQUIRE(t.inclusions.size() == 1);
  const Eigen::VectorXd field = t.render(mesh);
  double rendered = 0.0;
  for (int e = 0; e < mesh.element_count(); ++e)
    if (field[e] != t.background) rendered += mesh.element_areas[e];
  const double analytic = t.inclusions[0].area();
  const double max_el = mesh.element_areas.maxCoeff();
  CHECK(std::abs(rendered - analytic) <= 2.0 * max_el + 0.05 * analytic);

  const Phantom m = ood_phantom(OodKind::mixed, 3);
  CHECK(m.inclusions.size() >= 2);
  CHECK(m.inclusions.size() <= 3);
  for (std::size_t i = 0; i < m.inclusions.size(); ++i)
    for (std::size_t j = i + 1; j < m.inclusions.size(); ++j)
      CHECK(m.inclusions[i].kind != m.inclusions[j].kind);
}

TEST_CASE("l_shape renders connected and hole-free") {
  const Mesh mesh = build_disk_mesh(1.0, 16, 0.45, 3000);
  const Phantom l = ood_phantom(OodKind::l_shape, 21);
  const Eigen::VectorXd field = l.render(mesh);

  // BFS over element adjacency restricted to inclusion elements
  std::vector<std::vector<int>> nbrs(mesh.element_count());
  std::map<std::pair<int, int>, int> owner;
  for (int e = 0; e < mesh.element_count(); ++e) {
    for (int a = 0; a < 3; ++a) {
      auto key = std::minmax(mesh.elements(e, a), mesh.elements(e, (a + 1) % 3));
      auto it = owner.find(key);
      if (it == owner.end()) {
        owner[key] = e;
      } else {
        nbrs[e].push_back(it->second);
        nbrs[it->second].push_back(e);
      }
    }
  }
  std::vector<int> inside;
  for (int e = 0; e < mesh.element_count(); ++e)
    if (field[e] != l.background) inside.push_back(e);
  REQUIRE(!inside.empty());
  std::vector<char> seen(mesh.element_count(), 0);
  std::vector<int> stack = {inside[0]};
  seen[inside[0]] = 1;
  int reached = 0;
  while (!stack.empty()) {
    const int e = stack.back();
    stack.pop_back();
    ++reached;
    for (int nb : nbrs[e])
      if (!seen[nb] && field[nb] != l.background) {
        seen[nb] = 1;
        stack.push_back(nb);
      }
  }
  CHECK(reached == static_cast<int>(inside.size()));
}

TEST_CASE("tiny dataset: counts, byte-identical regeneration, baseline consistency") {
  const fs::path dir_a = fs::temp_directory_path() / "eit_ds_a";
  const fs::path dir_b = fs::temp_directory_path() / "eit_ds_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  DatasetConfig cfg;
  cfg.train = 4;
  cfg.val = 2;
  cfg.test = 2;
  cfg.coarse_elements = 300;
  cfg.dense_elements = 500;
  cfg.master_seed = 99;

  cfg.out_dir = dir_a;
  const DatasetManifest a = generate_dataset(cfg);
  CHECK(a.entries.size() == 8);
  CHECK(a.split("train").size() == 4);
  CHECK(a.split("val").size() == 2);
  CHECK(a.split("test").size() == 2);

  // manifest counts match files on disk
  for (const auto& entry : a.entries) {
    CHECK(fs::exists(dir_a / entry.phantom_path));
    CHECK(fs::exists(dir_a / entry.frame_path));
  }

  cfg.out_dir = dir_b;
  generate_dataset(cfg);
  for (const auto& entry : a.entries) {
    const auto read_bytes = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
    };
    CHECK(read_bytes(dir_a / entry.frame_path) == read_bytes(dir_b / entry.frame_path));
    CHECK(read_bytes(dir_a / entry.phantom_path) == read_bytes(dir_b / entry.phantom_path));
  }

  // round trip of the manifest
  const DatasetManifest back = read_manifest(dir_a / "manifest.json");
  CHECK(back.entries.size() == a.entries.size());
  CHECK(back.config.master_seed == cfg.master_seed);

  // noiseless background equals the written clean baseline within solver tol
  const ProtocolObjects proto = protocol_from_config(back.config);
  const Phantom empty{.inclusions = {}, .background = cfg.background};
  const MeasurementFrame check =
      simulate_measurements(empty, proto.dense, proto.electrodes, proto.patterns, 0.0, 0);
  const MeasurementFrame baseline = read_frame(dir_a / back.baseline_clean);
  CHECK((check.voltages - baseline.voltages).cwiseAbs().maxCoeff() <
        1e-12 * baseline.voltages.cwiseAbs().maxCoeff());

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("simulated frames carry the configured delta and record SNR") {
  DatasetConfig cfg;
  cfg.train = 0;
  cfg.val = 0;
  cfg.test = 1;
  cfg.coarse_elements = 300;
  cfg.dense_elements = 400;
  cfg.out_dir = fs::temp_directory_path() / "eit_ds_c";
  fs::remove_all(cfg.out_dir);
  const DatasetManifest m = generate_dataset(cfg);
  CHECK(m.entries.size() == 1);
  const MeasurementFrame frame = read_frame(cfg.out_dir / m.entries[0].frame_path);
  CHECK(frame.delta == 0.005);
  CHECK(m.entries[0].snr_db > 0.0);
  fs::remove_all(cfg.out_dir);
}
