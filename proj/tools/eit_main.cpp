// Command-line driver: simulate / reconstruct / evaluate / report.
//
// Exit codes: 0 success, 1 partial or missing inputs, 2 configuration error.

#include <CLI11.hpp>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <map>
#include <thread>

#include "eit/defaults.hpp"
#include "eit/dsm.hpp"
#include "eit/errors.hpp"
#include "eit/evaluate.hpp"
#include "eit/io.hpp"
#include "eit/jacobian.hpp"
#include "eit/recon_gn.hpp"
#include "eit/recon_levelset.hpp"
#include "eit/recon_linear.hpp"
#include "eit/recon_sparsity.hpp"
#include "eit/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMethods[] = {"lin-rec", "gn-tv", "l1-sparsity", "level-set", "dsm-index"};

int thread_budget(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("EIT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

/// Runs jobs [0, n) on up to t threads; each job must touch only its own state.
void parallel_for(int n, int t, const std::function<void(int)>& job) {
  if (t <= 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  for (int w = 0; w < std::min(t, n); ++w) {
    workers.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) job(i);
    });
  }
  for (auto& th : workers) th.join();
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  return json::parse(eit::read_text(path));
}

// Flat "section.key" lookup with flags taking precedence over the file.
template <typename T>
T cfg_get(const json& cfg, const std::string& key, T fallback) {
  if (cfg.contains(key)) return cfg.at(key).get<T>();
  return fallback;
}

struct RunLog {
  json echo;
  void write(const fs::path& dir, const std::string& name) {
    eit::write_json(dir / name, echo.dump(2));
  }
};

int cmd_simulate(const std::string& preset, const std::string& out, const std::string& config,
                 std::uint64_t master_seed, std::vector<int> counts, int ood_per_kind,
                 double delta) {
  const json cfg = load_config_file(config);
  eit::DatasetConfig dc;
  dc.out_dir = out;
  dc.preset = preset;
  dc.master_seed = cfg_get(cfg, "master_seed", master_seed);
  dc.delta = cfg_get(cfg, "delta", delta);
  dc.ood_per_kind = cfg_get(cfg, "ood_per_kind", ood_per_kind);
  if (!counts.empty()) {
    if (counts.size() != 3) {
      std::cerr << "--counts expects train,val,test\n";
      return 2;
    }
    dc.train = counts[0];
    dc.val = counts[1];
    dc.test = counts[2];
  }
  dc.train = cfg_get(cfg, "train", dc.train);
  dc.val = cfg_get(cfg, "val", dc.val);
  dc.test = cfg_get(cfg, "test", dc.test);
  dc.coarse_elements = cfg_get(cfg, "coarse_elements", dc.coarse_elements);
  dc.dense_elements = cfg_get(cfg, "dense_elements", dc.dense_elements);
  dc.background = cfg_get(cfg, "background", dc.background);
  dc.contact_impedance = cfg_get(cfg, "contact_impedance", dc.contact_impedance);
  dc.amplitude = cfg_get(cfg, "amplitude", dc.amplitude);
  dc.pattern_kind = cfg_get(cfg, "pattern_kind", dc.pattern_kind);
  dc.n_electrodes = cfg_get(cfg, "n_electrodes", dc.n_electrodes);

  std::error_code ec;
  fs::create_directories(dc.out_dir, ec);
  {  // writability probe
    std::ofstream probe(dc.out_dir / ".probe");
    if (!probe) {
      std::cerr << "output directory is not writable: " << dc.out_dir << "\n";
      return 2;
    }
  }
  fs::remove(dc.out_dir / ".probe", ec);

  const eit::DatasetManifest manifest = eit::generate_dataset(dc);
  RunLog log;
  log.echo["command"] = "simulate";
  log.echo["preset"] = dc.preset;
  log.echo["master_seed"] = dc.master_seed;
  log.echo["counts"] = {dc.train, dc.val, dc.test};
  log.echo["delta"] = dc.delta;
  log.echo["entries"] = manifest.entries.size();
  log.write(dc.out_dir, "run_log.json");
  std::cout << "wrote " << manifest.entries.size() << " pairs to " << dc.out_dir << "\n";
  return 0;
}

int cmd_reconstruct(const std::string& method, const std::string& dataset,
                    const std::string& frames, const std::string& out, bool force, int threads,
                    const std::string& config) {
  bool known = false;
  for (const char* m : kMethods) known |= method == m;
  if (!known) {
    std::cerr << "unknown method '" << method << "'; available:";
    for (const char* m : kMethods) std::cerr << " " << m;
    std::cerr << "\n";
    return 2;
  }
  const fs::path manifest_path = fs::path(dataset) / "manifest.json";
  if (!fs::exists(manifest_path)) {
    std::cerr << "missing dataset manifest: " << manifest_path << "\n";
    return 1;
  }
  const json cfg = load_config_file(config);
  const eit::DatasetManifest manifest = eit::read_manifest(manifest_path);
  const auto entries = manifest.split(frames);
  if (entries.empty()) {
    std::cerr << "no frames in split '" << frames << "'\n";
    return 1;
  }
  const fs::path out_dir(out);
  fs::create_directories(out_dir / "recon");
  fs::create_directories(out_dir / "trace");

  const eit::ProtocolObjects proto = eit::protocol_from_config(manifest.config);
  const double background = manifest.config.background;

  // Shared engines for the one-shot methods.
  std::unique_ptr<eit::LinearizedReconstructor> linrec;
  if (method == "lin-rec" || method == "level-set") {
    const eit::SmoothnessPrior prior =
        eit::build_smoothness_prior(proto.coarse, eit::kPriorA, eit::kPriorB);
    linrec = std::make_unique<eit::LinearizedReconstructor>(
        proto.coarse, proto.electrodes, proto.patterns, background,
        cfg_get(cfg, "lin_rec_alpha", eit::kDefaultLinRecAlpha), prior);
  }
  eit::MeasurementFrame baseline_noisy;
  if (method == "level-set")
    baseline_noisy = eit::read_frame(fs::path(dataset) / manifest.baseline_noisy);

  eit::GnConfig gn;
  gn.alpha = cfg_get(cfg, "gn_alpha", gn.alpha);
  gn.gamma = cfg_get(cfg, "gn_gamma", gn.gamma);
  gn.max_iters = cfg_get(cfg, "gn_max_iters", gn.max_iters);
  gn.stop_tol = cfg_get(cfg, "gn_stop_tol", gn.stop_tol);

  eit::SparsityConfig sp;
  sp.alpha = cfg_get(cfg, "sparsity_alpha", sp.alpha);
  sp.s_init = cfg_get(cfg, "sparsity_s_init", sp.s_init);
  sp.s_max = cfg_get(cfg, "sparsity_s_max", sp.s_max);
  sp.s_stop = cfg_get(cfg, "sparsity_s_stop", sp.s_stop);
  sp.max_iters = cfg_get(cfg, "sparsity_max_iters", sp.max_iters);
  sp.rule = cfg_get(cfg, "sparsity_rule", std::string("secant_step")) == "hessian_ratio"
                ? eit::BbRule::hessian_ratio
                : eit::BbRule::secant_step;

  eit::LevelSetConfig ls;
  ls.iterations = cfg_get(cfg, "levelset_iterations", ls.iterations);
  ls.alpha = cfg_get(cfg, "levelset_alpha", ls.alpha);

  std::atomic<int> failures{0};
  json timing = json::object();
  std::mutex timing_mutex;

  parallel_for(static_cast<int>(entries.size()), thread_budget(threads), [&](int i) {
    const eit::DatasetEntry& entry = entries[static_cast<std::size_t>(i)];
    char name[32];
    std::snprintf(name, sizeof(name), "%04d", entry.id);
    const fs::path rec_path = out_dir / "recon" / (std::string(name) + ".f64");
    if (fs::exists(rec_path) && !force) return;
    try {
      const eit::MeasurementFrame frame = eit::read_frame(fs::path(dataset) / entry.frame_path);
      eit::ReconResult result;
      Eigen::VectorXi labels;
      if (method == "lin-rec") {
        const auto t0 = std::chrono::steady_clock::now();
        Eigen::VectorXd delta = linrec->reconstruct(frame);
        result.sigma = eit::Conductivity::homogeneous(proto.coarse, background);
        result.sigma.values += delta;
        result.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      } else if (method == "gn-tv") {
        result = eit::gn_tv_reconstruct(frame, gn, proto.coarse, proto.electrodes,
                                        proto.patterns, background);
      } else if (method == "l1-sparsity") {
        result = eit::sparsity_reconstruct(frame, sp, proto.coarse, proto.electrodes,
                                           proto.patterns, background);
      } else if (method == "level-set") {
        eit::LevelSetResult lsr =
            eit::levelset_reconstruct(frame, baseline_noisy, ls, proto.coarse, proto.electrodes,
                                      proto.patterns, background, linrec.get());
        result = std::move(lsr.recon);
        labels = std::move(lsr.labels);
      } else {  // dsm-index
        const auto t0 = std::chrono::steady_clock::now();
        eit::Conductivity bg = eit::Conductivity::homogeneous(proto.coarse, background);
        const eit::CemSystem sys =
            eit::assemble_cem_system(proto.coarse, bg, proto.electrodes);
        const eit::ForwardSolution sol = eit::solve_forward(sys, proto.patterns);
        Eigen::MatrixXd diff(frame.n_patterns, frame.n_electrodes);
        for (int k = 0; k < frame.n_patterns; ++k)
          diff.row(k) = frame.pattern(k).transpose() - sol.electrode_voltages.row(k);
        eit::Conductivity unit = eit::Conductivity::homogeneous(proto.coarse, 1.0);
        const eit::LiftedField lift =
            eit::lift_cauchy_difference(proto.coarse, proto.electrodes, unit, diff);
        const Eigen::VectorXd index = eit::dsm_index(lift, proto.coarse);
        result.sigma.basis = eit::SigmaBasis::node_linear;
        result.sigma.values = index;
        result.sigma.lower = 0.0;
        result.sigma.upper = 1.0;
        result.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }

      eit::write_f64(rec_path, result.sigma.values);
      json side;
      side["basis"] = result.sigma.basis == eit::SigmaBasis::element_constant ? "P0" : "P1";
      side["method"] = method;
      side["frame"] = entry.id;
      side["warning"] = result.warning;
      side["note"] = result.note;
      eit::write_json(out_dir / "recon" / (std::string(name) + ".f64.json"), side.dump(2));
      if (!result.history.empty())
        eit::write_trace_csv((out_dir / "trace" / (std::string(name) + ".csv")).string(),
                             result.history);
      if (labels.size() > 0) {
        eit::PixelGrid seg = eit::mesh_to_grid(proto.coarse, labels.cast<double>(),
                                               128, eit::kClassBackground);
        eit::write_pgm(out_dir / "recon" / (std::string(name) + "_segmentation.pgm"), seg, 8,
                       0.0, 2.0);
        json legend;
        legend["0"] = "resistive";
        legend["1"] = "background";
        legend["2"] = "conductive";
        legend["pgm_levels"] = {0, 127, 255};
        eit::write_json(out_dir / "recon" / (std::string(name) + "_segmentation.json"),
                        legend.dump(2));
      }
      {
        std::lock_guard<std::mutex> lock(timing_mutex);
        timing[name] = result.wall_seconds;
      }
    } catch (const std::exception& err) {
      std::cerr << "frame " << entry.id << " failed: " << err.what() << "\n";
      ++failures;
    }
  });

  eit::write_json(out_dir / "timing.json", timing.dump(2));
  json log;
  log["command"] = "reconstruct";
  log["method"] = method;
  log["frames"] = frames;
  log["count"] = entries.size();
  log["failures"] = failures.load();
  eit::write_json(out_dir / "run_log.json", log.dump(2));
  if (failures > 0) return 1;
  std::cout << "reconstructed " << entries.size() << " frames with " << method << "\n";
  return 0;
}

int cmd_evaluate(const std::string& dataset, const std::string& recon_dir,
                 const std::string& frames, const std::string& out, const std::string& method,
                 bool real_data) {
  const fs::path manifest_path = fs::path(dataset) / "manifest.json";
  if (!fs::exists(manifest_path)) {
    std::cerr << "missing dataset manifest: " << manifest_path << "\n";
    return 1;
  }
  const eit::DatasetManifest manifest = eit::read_manifest(manifest_path);
  const auto entries = manifest.split(frames);
  if (entries.empty()) {
    std::cerr << "no frames in split '" << frames << "'\n";
    return 1;
  }
  const eit::ProtocolObjects proto = eit::protocol_from_config(manifest.config);
  const double background = manifest.config.background;

  std::vector<eit::FrameScore> scores;
  std::vector<std::string> missing;
  for (const auto& entry : entries) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04d", entry.id);
    const fs::path rec_path = fs::path(recon_dir) / "recon" / (std::string(name) + ".f64");
    if (!fs::exists(rec_path)) {
      missing.push_back(rec_path.string());
      continue;
    }
    const eit::MeasurementFrame frame = eit::read_frame(fs::path(dataset) / entry.frame_path);
    eit::Conductivity rec;
    rec.values = eit::read_f64(rec_path);
    rec.basis = rec.values.size() == proto.coarse.element_count()
                    ? eit::SigmaBasis::element_constant
                    : eit::SigmaBasis::node_linear;

    eit::FrameScore fscore;
    fscore.id = entry.id;
    if (real_data) {
      // No ground-truth conductivity: Dice against the annotated mask + data fit.
      const fs::path mask_path = fs::path(dataset) / "masks" / (std::string(name) + ".pgm");
      if (!fs::exists(mask_path)) {
        missing.push_back(mask_path.string());
        continue;
      }
      const eit::PixelGrid mask = eit::read_pgm(mask_path);
      Eigen::VectorXd mask_el = eit::grid_to_mesh_nearest(mask, proto.coarse);
      Eigen::VectorXi gt_labels(mask_el.size());
      for (Eigen::Index i = 0; i < mask_el.size(); ++i)
        gt_labels[i] = mask_el[i] < 0.5 ? 0 : (mask_el[i] < 1.5 ? 1 : 2);
      const Eigen::VectorXd rec_el = eit::to_element_basis(rec, proto.coarse);
      eit::DiceOptions dopts;
      dopts.background_value = background;
      fscore.scores.dice = eit::dice_score(gt_labels, rec_el, proto.coarse, dopts).mean;
      eit::Conductivity clipped = rec;
      clipped.values = clipped.values.cwiseMax(clipped.lower).cwiseMin(clipped.upper);
      fscore.scores.measurement_error = eit::measurement_error(
          clipped, frame, proto.coarse, proto.electrodes, proto.patterns);
    } else {
      const Eigen::VectorXd gt = eit::read_f64(fs::path(dataset) / entry.phantom_path);
      fscore.scores = eit::score_frame(gt, rec, frame, proto.coarse, proto.electrodes,
                                       proto.patterns, background);
    }
    scores.push_back(fscore);
  }

  for (const auto& m : missing) std::cerr << "missing: " << m << "\n";
  if (scores.empty()) {
    std::cerr << "nothing to evaluate\n";
    return 1;
  }
  fs::create_directories(out);
  eit::write_scores_csv(fs::path(out) / "scores.csv", scores);
  const eit::MethodSummary summary = eit::summarize_scores(method, scores);
  eit::write_summary_json(fs::path(out) / "summary.json", summary);
  std::cout << eit::render_report({summary}, real_data);
  return missing.empty() ? 0 : 1;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out, bool real_data) {
  std::vector<eit::MethodSummary> summaries;
  std::vector<std::string> missing;
  for (const auto& input : inputs) {
    if (!fs::exists(input)) {
      missing.push_back(input);
      continue;
    }
    summaries.push_back(eit::read_summary_json(input));
  }
  for (const auto& m : missing) std::cerr << "missing: " << m << "\n";
  if (summaries.empty()) {
    std::cerr << "no summaries to report\n";
    return 1;
  }
  const std::string table = eit::render_report(summaries, real_data);
  if (!out.empty()) {
    eit::write_json(out, table);  // plain text write
  }
  std::cout << table;
  return missing.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complete-electrode-model EIT: simulation, reconstruction, evaluation"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a phantom/measurement dataset");
  std::string sim_preset = "ellipses", sim_out = "dataset", sim_config;
  std::uint64_t sim_seed = 20240817;
  std::vector<int> sim_counts;
  int sim_ood_per_kind = 1;
  double sim_delta = eit::kDefaultNoiseDelta;
  sim->add_option("--preset", sim_preset, "ellipses | ood");
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--config", sim_config, "JSON config file");
  sim->add_option("--master-seed", sim_seed, "master RNG seed");
  sim->add_option("--counts", sim_counts, "train,val,test counts")->delimiter(',');
  sim->add_option("--ood-per-kind", sim_ood_per_kind, "frames per OOD shape kind");
  sim->add_option("--delta", sim_delta, "relative noise level");

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "run a reconstruction method over a dataset");
  std::string rec_method, rec_dataset, rec_frames = "test", rec_out = "recon_out", rec_config;
  bool rec_force = false;
  int rec_threads = 0;
  rec->add_option("--method", rec_method, "lin-rec | gn-tv | l1-sparsity | level-set | dsm-index")
      ->required();
  rec->add_option("--dataset", rec_dataset, "dataset directory")->required();
  rec->add_option("--frames", rec_frames, "split: train|val|test|ood|all");
  rec->add_option("--out", rec_out, "output directory");
  rec->add_option("--config", rec_config, "JSON config file");
  rec->add_flag("--force", rec_force, "overwrite existing outputs");
  rec->add_option("--threads", rec_threads, "thread budget (default: EIT_THREADS or 1)");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score reconstructions against ground truth");
  std::string ev_dataset, ev_recon, ev_frames = "test", ev_out = "eval_out", ev_method = "method";
  bool ev_real = false;
  ev->add_option("--dataset", ev_dataset, "dataset directory")->required();
  ev->add_option("--recon", ev_recon, "reconstruction output directory")->required();
  ev->add_option("--frames", ev_frames, "split to score");
  ev->add_option("--out", ev_out, "output directory");
  ev->add_option("--method", ev_method, "method label for the summary");
  ev->add_flag("--real-data", ev_real, "mask-based mode: Dice + measurement error only");

  // report
  auto* rep = app.add_subcommand("report", "merge summary JSONs into one table");
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  bool rep_real = false;
  rep->add_option("--inputs", rep_inputs, "summary.json files")->delimiter(',')->required();
  rep->add_option("--out", rep_out, "write the table here (markdown)");
  rep->add_flag("--real-data", rep_real, "use the real-data column set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(sim_preset, sim_out, sim_config, sim_seed, sim_counts,
                          sim_ood_per_kind, sim_delta);
    if (rec->parsed())
      return cmd_reconstruct(rec_method, rec_dataset, rec_frames, rec_out, rec_force,
                             rec_threads, rec_config);
    if (ev->parsed())
      return cmd_evaluate(ev_dataset, ev_recon, ev_frames, ev_out, ev_method, ev_real);
    if (rep->parsed()) return cmd_report(rep_inputs, rep_out, rep_real);
  } catch (const eit::ValidationError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const eit::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
