#include "eit/simulate.hpp"

#include <cmath>
#include <json.hpp>

#include "eit/errors.hpp"
#include "eit/io.hpp"
#include "eit/rng.hpp"

namespace eit {

std::string to_string(InclusionKind kind) {
  switch (kind) {
    case InclusionKind::ellipse: return "ellipse";
    case InclusionKind::rectangle: return "rectangle";
    case InclusionKind::triangle: return "triangle";
    case InclusionKind::l_shape: return "l_shape";
  }
  return "?";
}

std::string to_string(OodKind kind) {
  switch (kind) {
    case OodKind::rectangle: return "rectangle";
    case OodKind::triangle: return "triangle";
    case OodKind::l_shape: return "l_shape";
    case OodKind::mixed: return "mixed";
  }
  return "?";
}

bool Inclusion::contains(const Eigen::Vector2d& p) const {
  if (kind == InclusionKind::ellipse) {
    const Eigen::Vector2d d = p - center;
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = c * d.x() + s * d.y();
    const double v = -s * d.x() + c * d.y();
    return (u * u) / (semi_a * semi_a) + (v * v) / (semi_b * semi_b) <= 1.0;
  }
  // Even-odd ray crossing.
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Eigen::Vector2d& a = polygon[i];
    const Eigen::Vector2d& b = polygon[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
      inside = !inside;
  }
  return inside;
}

double Inclusion::bounding_radius() const {
  if (kind == InclusionKind::ellipse) return std::max(semi_a, semi_b);
  double r = 0.0;
  for (const auto& v : polygon) r = std::max(r, (v - center).norm());
  return r;
}

double Inclusion::area() const {
  if (kind == InclusionKind::ellipse) return M_PI * semi_a * semi_b;
  double twice = 0.0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++)
    twice += polygon[j].x() * polygon[i].y() - polygon[i].x() * polygon[j].y();
  return std::abs(twice) / 2.0;
}

Eigen::VectorXd Phantom::render(const Mesh& mesh) const {
  Eigen::VectorXd values = Eigen::VectorXd::Constant(mesh.element_count(), background);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const Eigen::Vector2d c = element_centroid(mesh, e);
    for (const auto& inc : inclusions) {
      if (inc.contains(c)) {
        values[e] = inc.value;
        break;
      }
    }
  }
  return values;
}

namespace {

double sample_value(Rng& rng, const PhantomConfig& cfg) {
  return rng.uniform() < 0.5 ? rng.uniform(cfg.low_min, cfg.low_max)
                             : rng.uniform(cfg.high_min, cfg.high_max);
}

Eigen::Vector2d sample_center(Rng& rng, const PhantomConfig& cfg) {
  const double r = cfg.center_max * std::sqrt(rng.uniform());
  const double th = rng.uniform(0.0, 2.0 * M_PI);
  return {r * std::cos(th), r * std::sin(th)};
}

bool placement_ok(const Inclusion& cand, const std::vector<Inclusion>& placed,
                  const PhantomConfig& cfg) {
  if (cand.center.norm() + cand.bounding_radius() > 1.0 - cfg.margin) return false;
  for (const auto& other : placed)
    if ((cand.center - other.center).norm() <
        cand.bounding_radius() + other.bounding_radius() + cfg.margin)
      return false;
  return true;
}

Inclusion sample_ellipse(Rng& rng, const PhantomConfig& cfg) {
  Inclusion inc;
  inc.kind = InclusionKind::ellipse;
  inc.value = sample_value(rng, cfg);
  inc.center = sample_center(rng, cfg);
  inc.semi_a = rng.uniform(cfg.axis_min, cfg.axis_max);
  inc.semi_b = rng.uniform(cfg.axis_min, cfg.axis_max);
  inc.angle = rng.uniform(0.0, M_PI);
  return inc;
}

Inclusion sample_polygon(Rng& rng, InclusionKind kind, const PhantomConfig& cfg) {
  Inclusion inc;
  inc.kind = kind;
  inc.value = sample_value(rng, cfg);
  inc.center = sample_center(rng, cfg);
  const double rot = rng.uniform(0.0, M_PI);
  const double c = std::cos(rot), s = std::sin(rot);
  auto place = [&](double x, double y) {
    return inc.center + Eigen::Vector2d(c * x - s * y, s * x + c * y);
  };
  if (kind == InclusionKind::rectangle) {
    const double w = rng.uniform(0.3, 0.6);
    const double h = rng.uniform(0.3, 0.6);
    inc.polygon = {place(-w / 2, -h / 2), place(w / 2, -h / 2), place(w / 2, h / 2),
                   place(-w / 2, h / 2)};
  } else if (kind == InclusionKind::triangle) {
    const double r = rng.uniform(0.2, 0.38);
    inc.polygon.clear();
    for (int k = 0; k < 3; ++k) {
      const double th = rot + 2.0 * M_PI * k / 3.0 + rng.uniform(-0.25, 0.25);
      const double rr = r * rng.uniform(0.8, 1.2);
      inc.polygon.push_back(inc.center + rr * Eigen::Vector2d(std::cos(th), std::sin(th)));
    }
  } else {  // l_shape: rectangle with one quadrant removed, 6 vertices
    const double w = rng.uniform(0.4, 0.65);
    const double h = rng.uniform(0.4, 0.65);
    const double w1 = w * rng.uniform(0.35, 0.6);
    const double h1 = h * rng.uniform(0.35, 0.6);
    inc.polygon = {place(-w / 2, -h / 2),      place(w / 2, -h / 2),
                   place(w / 2, -h / 2 + h1),  place(-w / 2 + w1, -h / 2 + h1),
                   place(-w / 2 + w1, h / 2),  place(-w / 2, h / 2)};
  }
  return inc;
}

void fill_phantom(Phantom& phantom, Rng& rng, const std::vector<InclusionKind>& kinds,
                  const PhantomConfig& cfg, std::uint64_t seed) {
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    bool placed = false;
    for (int retry = 0; !placed; ++retry) {
      for (int attempt = 0; attempt < cfg.max_tries; ++attempt) {
        Inclusion cand = kinds[i] == InclusionKind::ellipse
                             ? sample_ellipse(rng, cfg)
                             : sample_polygon(rng, kinds[i], cfg);
        if (placement_ok(cand, phantom.inclusions, cfg)) {
          phantom.inclusions.push_back(std::move(cand));
          placed = true;
          break;
        }
      }
      if (!placed) {
        // Fresh sub-seed, flagged.
        phantom.resampled = true;
        rng = Rng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(retry)));
      }
    }
  }
}

}  // namespace

Phantom sample_ellipse_phantom(std::uint64_t seed, const PhantomConfig& cfg) {
  Rng rng(seed);
  Phantom phantom;
  phantom.background = cfg.background;
  phantom.seed = seed;
  const int n = 1 + static_cast<int>(rng.uniform_index(3));
  fill_phantom(phantom, rng, std::vector<InclusionKind>(n, InclusionKind::ellipse), cfg, seed);
  return phantom;
}

Phantom ood_phantom(OodKind kind, std::uint64_t seed, const PhantomConfig& cfg) {
  Rng rng(seed);
  Phantom phantom;
  phantom.background = cfg.background;
  phantom.seed = seed;
  std::vector<InclusionKind> kinds;
  switch (kind) {
    case OodKind::rectangle: kinds = {InclusionKind::rectangle}; break;
    case OodKind::triangle: kinds = {InclusionKind::triangle}; break;
    case OodKind::l_shape: kinds = {InclusionKind::l_shape}; break;
    case OodKind::mixed: {
      std::vector<InclusionKind> pool = {InclusionKind::rectangle, InclusionKind::triangle,
                                         InclusionKind::l_shape};
      const int n = 2 + static_cast<int>(rng.uniform_index(2));
      for (int i = 0; i < n; ++i) {
        const auto pick = rng.uniform_index(pool.size());
        kinds.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<long>(pick));
      }
      break;
    }
  }
  fill_phantom(phantom, rng, kinds, cfg, seed);
  return phantom;
}

MeasurementFrame simulate_measurements(const Phantom& phantom, const Mesh& dense_mesh,
                                       const ElectrodeModel& electrodes,
                                       const CurrentPatterns& patterns, double delta,
                                       std::uint64_t seed) {
  Conductivity sigma = Conductivity::homogeneous(dense_mesh, phantom.background);
  sigma.values = phantom.render(dense_mesh);
  const CemSystem system = assemble_cem_system(dense_mesh, sigma, electrodes);
  const ForwardSolution sol = solve_forward(system, patterns);
  MeasurementFrame clean = make_frame(sol, patterns, "dense");
  return add_noise(clean, delta, seed);
}

std::vector<DatasetEntry> DatasetManifest::split(const std::string& name) const {
  std::vector<DatasetEntry> out;
  for (const auto& entry : entries)
    if (name == "all" || entry.split == name) out.push_back(entry);
  return out;
}

ProtocolObjects protocol_from_config(const DatasetConfig& cfg) {
  ProtocolObjects p{
      build_disk_mesh(1.0, cfg.n_electrodes, cfg.coverage, cfg.coarse_elements),
      build_disk_mesh(1.0, cfg.n_electrodes, cfg.coverage, cfg.dense_elements),
      ElectrodeModel::uniform(cfg.n_electrodes, cfg.contact_impedance),
      CurrentPatterns{},
  };
  if (cfg.pattern_kind == "adjacent")
    p.patterns = adjacent_patterns(cfg.n_electrodes, cfg.amplitude);
  else if (cfg.pattern_kind == "trig")
    p.patterns = trig_patterns(cfg.n_electrodes, cfg.amplitude);
  else
    throw ValidationError("unknown pattern kind: " + cfg.pattern_kind);
  return p;
}

namespace {

nlohmann::json frame_sidecar(const MeasurementFrame& frame) {
  nlohmann::json j;
  j["K"] = frame.n_patterns;
  j["L"] = frame.n_electrodes;
  j["delta"] = frame.delta;
  j["pattern_kind"] = frame.pattern_kind;
  j["amplitude"] = frame.amplitude;
  j["seed"] = frame.seed;
  j["mesh_tag"] = frame.mesh_tag;
  return j;
}

double frame_snr_db(const MeasurementFrame& frame) {
  if (frame.delta <= 0.0) return std::numeric_limits<double>::infinity();
  const double signal = frame.voltages.squaredNorm() / frame.voltages.size();
  const double noise = std::pow(frame.delta * frame.voltages.cwiseAbs().mean(), 2);
  return 10.0 * std::log10(signal / noise);
}

}  // namespace

void write_frame(const std::filesystem::path& f64_path, const MeasurementFrame& frame) {
  write_f64(f64_path, frame.voltages);
  std::filesystem::path sidecar = f64_path;
  sidecar += ".json";
  write_json(sidecar, frame_sidecar(frame).dump(2));
}

MeasurementFrame read_frame(const std::filesystem::path& f64_path) {
  MeasurementFrame frame;
  frame.voltages = read_f64(f64_path);
  std::filesystem::path sidecar = f64_path;
  sidecar += ".json";
  const nlohmann::json j = nlohmann::json::parse(read_text(sidecar));
  frame.n_patterns = j.at("K").get<int>();
  frame.n_electrodes = j.at("L").get<int>();
  frame.delta = j.at("delta").get<double>();
  frame.pattern_kind = j.at("pattern_kind").get<std::string>();
  frame.amplitude = j.at("amplitude").get<double>();
  frame.seed = j.at("seed").get<std::uint64_t>();
  frame.mesh_tag = j.at("mesh_tag").get<std::string>();
  if (frame.voltages.size() != static_cast<Eigen::Index>(frame.n_patterns) * frame.n_electrodes)
    throw IoError("frame length does not match its sidecar: " + f64_path.string());
  return frame;
}

DatasetManifest generate_dataset(const DatasetConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir / "phantoms");
  fs::create_directories(cfg.out_dir / "frames");

  DatasetManifest manifest;
  manifest.config = cfg;

  ProtocolObjects proto = protocol_from_config(cfg);
  ForwardOperator forward(proto.dense, proto.electrodes, proto.patterns);

  // Background baseline frames (the "empty tank" measurement).
  {
    Conductivity sigma0 = Conductivity::homogeneous(proto.dense, cfg.background);
    forward.set_sigma(sigma0);
    MeasurementFrame clean = make_frame(forward.solution(), proto.patterns, "dense");
    manifest.baseline_seed = mix_seed(cfg.master_seed, 0xBA5E);
    MeasurementFrame noisy = add_noise(clean, cfg.delta, manifest.baseline_seed);
    write_frame(cfg.out_dir / "baseline_clean.f64", clean);
    write_frame(cfg.out_dir / "baseline_noisy.f64", noisy);
    manifest.baseline_clean = "baseline_clean.f64";
    manifest.baseline_noisy = "baseline_noisy.f64";
  }

  auto add_sample = [&](int id, const std::string& split, const std::string& kind,
                        const Phantom& phantom) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04d", id);
    const std::string phantom_rel = std::string("phantoms/") + name + ".f64";
    const std::string frame_rel = std::string("frames/") + name + ".f64";

    const Eigen::VectorXd gt = phantom.render(proto.coarse);
    write_f64(cfg.out_dir / phantom_rel, gt);
    nlohmann::json side;
    side["kind"] = "element_field";
    side["count"] = gt.size();
    side["mesh_tag"] = "coarse";
    side["background"] = phantom.background;
    side["inclusions"] = phantom.inclusions.size();
    side["resampled"] = phantom.resampled;
    write_json(cfg.out_dir / (phantom_rel + ".json"), side.dump(2));

    Conductivity sigma = Conductivity::homogeneous(proto.dense, phantom.background);
    sigma.values = phantom.render(proto.dense);
    forward.set_sigma(sigma);
    MeasurementFrame clean = make_frame(forward.solution(), proto.patterns, "dense");
    const std::uint64_t noise_seed = mix_seed(cfg.master_seed, 0xF0000 + id);
    MeasurementFrame noisy = add_noise(clean, cfg.delta, noise_seed);
    write_frame(cfg.out_dir / frame_rel, noisy);

    DatasetEntry entry;
    entry.id = id;
    entry.split = split;
    entry.kind = kind;
    entry.phantom_path = phantom_rel;
    entry.frame_path = frame_rel;
    entry.seed = phantom.seed;
    entry.snr_db = frame_snr_db(noisy);
    manifest.entries.push_back(entry);
  };

  if (cfg.preset == "ellipses") {
    int id = 0;
    auto emit = [&](const std::string& split, int count) {
      for (int i = 0; i < count; ++i, ++id) {
        const std::uint64_t seed = mix_seed(cfg.master_seed, id);
        add_sample(id, split, "ellipse", sample_ellipse_phantom(seed, cfg.phantom));
      }
    };
    emit("train", cfg.train);
    emit("val", cfg.val);
    emit("test", cfg.test);
  } else if (cfg.preset == "ood") {
    int id = 0;
    const OodKind kinds[] = {OodKind::rectangle, OodKind::triangle, OodKind::l_shape,
                             OodKind::mixed};
    for (int rep = 0; rep < cfg.ood_per_kind; ++rep) {
      for (OodKind kind : kinds) {
        const std::uint64_t seed = mix_seed(cfg.master_seed, id);
        add_sample(id, "ood", to_string(kind), ood_phantom(kind, seed, cfg.phantom));
        ++id;
      }
    }
  } else {
    throw ValidationError("unknown dataset preset: " + cfg.preset);
  }

  write_manifest(cfg.out_dir / "manifest.json", manifest);
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  const DatasetConfig& cfg = manifest.config;
  nlohmann::json j;
  j["preset"] = cfg.preset;
  j["counts"] = {{"train", cfg.train}, {"val", cfg.val}, {"test", cfg.test}};
  j["ood_per_kind"] = cfg.ood_per_kind;
  j["master_seed"] = cfg.master_seed;
  j["delta"] = cfg.delta;
  j["background"] = cfg.background;
  j["mesh"] = {{"n_electrodes", cfg.n_electrodes},
               {"coverage", cfg.coverage},
               {"coarse_elements", cfg.coarse_elements},
               {"dense_elements", cfg.dense_elements},
               {"radius", 1.0}};
  j["pattern"] = {{"kind", cfg.pattern_kind}, {"amplitude", cfg.amplitude}};
  j["contact_impedance"] = cfg.contact_impedance;
  j["phantom"] = {{"center_max", cfg.phantom.center_max},
                  {"axis_min", cfg.phantom.axis_min},
                  {"axis_max", cfg.phantom.axis_max},
                  {"low", {cfg.phantom.low_min, cfg.phantom.low_max}},
                  {"high", {cfg.phantom.high_min, cfg.phantom.high_max}},
                  {"margin", cfg.phantom.margin}};
  j["baseline"] = {{"clean", manifest.baseline_clean},
                   {"noisy", manifest.baseline_noisy},
                   {"seed", manifest.baseline_seed}};
  auto& files = j["files"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    files.push_back({{"id", e.id},
                     {"split", e.split},
                     {"kind", e.kind},
                     {"phantom", e.phantom_path},
                     {"frame", e.frame_path},
                     {"seed", e.seed},
                     {"snr_db", e.snr_db}});
  }
  write_json(path, j.dump(2));
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const nlohmann::json j = nlohmann::json::parse(read_text(path));
  DatasetManifest manifest;
  DatasetConfig& cfg = manifest.config;
  cfg.out_dir = path.parent_path();
  cfg.preset = j.at("preset").get<std::string>();
  cfg.train = j.at("counts").at("train").get<int>();
  cfg.val = j.at("counts").at("val").get<int>();
  cfg.test = j.at("counts").at("test").get<int>();
  cfg.ood_per_kind = j.value("ood_per_kind", 1);
  cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
  cfg.delta = j.at("delta").get<double>();
  cfg.background = j.at("background").get<double>();
  cfg.n_electrodes = j.at("mesh").at("n_electrodes").get<int>();
  cfg.coverage = j.at("mesh").at("coverage").get<double>();
  cfg.coarse_elements = j.at("mesh").at("coarse_elements").get<int>();
  cfg.dense_elements = j.at("mesh").at("dense_elements").get<int>();
  cfg.pattern_kind = j.at("pattern").at("kind").get<std::string>();
  cfg.amplitude = j.at("pattern").at("amplitude").get<double>();
  cfg.contact_impedance = j.at("contact_impedance").get<double>();
  manifest.baseline_clean = j.at("baseline").at("clean").get<std::string>();
  manifest.baseline_noisy = j.at("baseline").at("noisy").get<std::string>();
  manifest.baseline_seed = j.at("baseline").at("seed").get<std::uint64_t>();
  for (const auto& f : j.at("files")) {
    DatasetEntry e;
    e.id = f.at("id").get<int>();
    e.split = f.at("split").get<std::string>();
    e.kind = f.at("kind").get<std::string>();
    e.phantom_path = f.at("phantom").get<std::string>();
    e.frame_path = f.at("frame").get<std::string>();
    e.seed = f.at("seed").get<std::uint64_t>();
    e.snr_db = f.at("snr_db").get<double>();
    manifest.entries.push_back(e);
  }
  return manifest;
}

}  // namespace eit
