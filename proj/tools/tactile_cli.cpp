// Command-line front end: explore, train, evaluate, ablate, pose, mesh-info, plot.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "tactile/ablation.hpp"
#include "tactile/artifacts.hpp"

namespace fs = std::filesystem;
using namespace tactile;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  int workers = 1;
};

ExperimentConfig load(const Globals& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) c.seeds = {*g.seed};
  c.validate();
  return c;
}

std::string out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / name).string();
}

void write_manifest(const Globals& g, const ExperimentConfig& c, const std::string& cmd, std::vector<std::string> outputs) {
  Manifest m;
  m.command = cmd;
  m.config_digest = config_digest(c);
  m.config_text = dump_config(c);
  m.seeds = c.seeds;
  m.workers = g.workers;
  m.outputs = std::move(outputs);
  save_manifest(out_path(g, "manifest.json"), m);
}

PolicySource policy_from(const std::string& spec) {
  if (spec == "grid") return PolicySource::grid();
  if (spec == "random") return PolicySource::random();
  auto ck = std::make_shared<const Checkpoint>(load_checkpoint(spec));
  return PolicySource::network(ck, ck->variant);
}

Vec3 parse_vec3(const std::string& s) {
  std::stringstream ss(s);
  std::string a, b, c;
  std::getline(ss, a, ',');
  std::getline(ss, b, ',');
  std::getline(ss, c, ',');
  try {
    return Vec3(std::stod(a), std::stod(b), std::stod(c));
  } catch (const std::exception&) {
    throw InvalidArgument("expected x,y,z but got '" + s + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tactile exploration and pose estimation simulator"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Flat key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Single seed (overrides experiment.seeds)");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);

  // explore
  auto* explore = app.add_subcommand("explore", "Run one rollout and stream a JSONL step log");
  std::string ex_object = "cuboid", ex_policy = "grid";
  int ex_cap = -1;
  bool ex_stdout = false;
  explore->add_option("--object", ex_object, "Object name");
  explore->add_option("--policy", ex_policy, "grid, random or a checkpoint path");
  explore->add_option("--cap", ex_cap, "Step cap (default: eval.cap)");
  explore->add_flag("--stdout", ex_stdout, "Also echo the log to stdout");

  // train
  auto* trainc = app.add_subcommand("train", "Train a policy for each seed");
  std::string tr_variant;
  std::optional<std::int64_t> tr_budget;
  bool tr_log = false;
  trainc->add_option("--variant", tr_variant, "Reward variant (default: experiment.variant)");
  trainc->add_option("--budget", tr_budget, "Environment steps (default: train.budget)");
  trainc->add_flag("--log-steps", tr_log, "Write per-step reward breakdowns as JSONL");

  // evaluate
  auto* evalc = app.add_subcommand("evaluate", "Evaluate a checkpoint or baseline");
  std::string ev_policy = "grid";
  std::vector<std::string> ev_objects;
  std::optional<int> ev_trials, ev_cap;
  evalc->add_option("--policy", ev_policy, "grid, random or a checkpoint path");
  evalc->add_option("--object", ev_objects, "Objects (default: experiment.objects)");
  evalc->add_option("--trials", ev_trials, "Rollouts per object");
  evalc->add_option("--cap", ev_cap, "Step cap");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Variants x objects table");

  // pose
  auto* pose = app.add_subcommand("pose", "Estimate an object's pose from a saved contact cloud");
  std::string po_cloud, po_object = "sphere", po_start = "-0.15,0,0", po_center = "0,0,0";
  bool po_depth = false;
  pose->add_option("--cloud", po_cloud, "Cloud PLY (x y z nx ny nz [step])")->required()->check(CLI::ExistingFile);
  pose->add_option("--object", po_object, "Model name or mesh path");
  pose->add_option("--view-start", po_start, "Viewpoint cap center x,y,z");
  pose->add_option("--view-center", po_center, "Look-at point x,y,z");
  pose->add_flag("--dump-depth", po_depth, "Write each view as a 16-bit PGM (mm)");

  // mesh-info
  auto* info = app.add_subcommand("mesh-info", "Print mesh statistics");
  std::string mi_target;
  info->add_option("target", mi_target, "Mesh path or built-in object name")->required();

  // plot
  auto* plot = app.add_subcommand("plot", "Render curve CSVs as SVG charts");
  std::vector<std::string> pl_series;
  plot->add_option("series", pl_series, "label=curves.csv entries (repeat a label to average seeds)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*explore) {
      const auto cfg = load(g);
      const auto object = cfg.load_object(ex_object);
      auto ec = cfg.eval_config(cfg.seeds.front(), ex_object);
      if (ex_cap >= 0) ec.cap = ex_cap;
      ec.reward = cfg.reward;
      ec.reward->variant = RewardVariant::parse(cfg.variant);
      const auto policy = policy_from(ex_policy);
      const auto log_path = out_path(g, "explore.jsonl");
      std::ofstream log(log_path);
      JsonlWriter w(log), echo(std::cout);
      const TactileEnv env(ec.env);
      const auto r = run_rollout(env, object, trial_seed(ec.seed, 0), policy, ec, [&](const RolloutStep& s) {
        const auto j = rollout_step_json(s);
        w.write(j);
        if (ex_stdout) echo.write(j);
      });
      const auto cloud_path = out_path(g, "contacts.ply");
      save_cloud(r.final.contacts, cloud_path);
      std::printf("steps %d  reason %s  contacts %zu  IoU %.4f  AUC %.4f\n", r.steps, std::string(to_string(r.final.reason)).c_str(),
                  r.final.contacts.size(), r.iou, r.auc);
      write_manifest(g, cfg, "explore", {log_path, cloud_path});
    } else if (*trainc) {
      auto cfg = load(g);
      if (!tr_variant.empty()) cfg.variant = tr_variant;
      if (tr_budget) cfg.budget = *tr_budget;
      cfg.validate();
      std::vector<std::shared_ptr<const ObjectModel>> objects;
      for (const auto& n : cfg.train_objects) objects.push_back(cfg.load_object(n));
      std::vector<std::string> outputs, curve_files;
      for (auto seed : cfg.seeds) {
        auto tc = cfg.train_config(seed, cfg.variant);
        tc.workers = g.workers;
        const std::string stem = cfg.variant + "_seed" + std::to_string(seed);
        std::ofstream steps;
        std::optional<JsonlWriter> sw;
        if (tr_log) {
          steps.open(out_path(g, "steps_" + stem + ".jsonl"));
          sw.emplace(steps);
          outputs.push_back(out_path(g, "steps_" + stem + ".jsonl"));
        }
        auto res = train(
            tc, objects, [&](const StepRecord& r) { if (sw) sw->write(step_record_json(r)); },
            [&](const CurveRow& c) {
              std::printf("[%s] update %d  steps %lld  reward %.4f  IoU %s  AUC %s\n", stem.c_str(), c.update,
                          static_cast<long long>(c.env_steps), c.mean_reward, format_real(c.mean_iou).c_str(),
                          format_real(c.mean_auc).c_str());
              std::fflush(stdout);
            });
        const auto ck = out_path(g, "checkpoint_" + stem + ".bin");
        const auto cv = out_path(g, "curves_" + stem + ".csv");
        save_checkpoint(ck, res.checkpoint);
        std::ofstream f(cv);
        write_curves(f, res.curves);
        outputs.push_back(ck);
        outputs.push_back(cv);
        curve_files.push_back(cv);
      }
      for (const auto& p : emit_plots({{cfg.variant, curve_files}}, g.out_dir)) outputs.push_back(p);
      write_manifest(g, cfg, "train", outputs);
    } else if (*evalc) {
      auto cfg = load(g);
      if (ev_trials) cfg.trials = *ev_trials;
      if (ev_cap) cfg.cap = *ev_cap;
      if (!ev_objects.empty()) cfg.objects = ev_objects;
      cfg.validate();
      const auto policy = policy_from(ev_policy);
      std::vector<ResultRow> rows(cfg.objects.size() * cfg.seeds.size());
      parallel_for(rows.size(), g.workers, [&](std::size_t i) {
        const auto& name = cfg.objects[i % cfg.objects.size()];
        rows[i] = evaluate(policy, cfg.load_object(name), cfg.eval_config(cfg.seeds[i / cfg.objects.size()], name));
      });
      const auto path = out_path(g, "evaluation.csv");
      std::ofstream f(path);
      write_results_csv(f, rows);
      write_results_csv(std::cout, rows);
      write_manifest(g, cfg, "evaluate", {path});
    } else if (*ablate) {
      const auto cfg = load(g);
      const auto res = run_ablation(cfg, g.workers, [](const std::string& m) { std::fprintf(stderr, "%s\n", m.c_str()); });
      const auto csv = out_path(g, "ablation.csv");
      const auto txt = out_path(g, "ablation.txt");
      std::ofstream(csv) << [&] {
        std::ostringstream o;
        write_results_csv(o, res.rows);
        return o.str();
      }();
      const auto table = render_table(res);
      std::ofstream(txt) << table;
      std::cout << table;
      write_manifest(g, cfg, "ablate", {csv, txt});
    } else if (*pose) {
      const auto cfg = load(g);
      const auto cloud = load_cloud(po_cloud);
      const auto model = fs::exists(po_object) ? load_mesh(po_object) : cfg.load_object(po_object)->mesh;
      auto pc = cfg.pipeline;
      pc.seed = cfg.seeds.front();
      const auto r = estimate_pose(cloud, model, parse_vec3(po_start), parse_vec3(po_center), pc, RigidTransform::identity());
      std::vector<std::string> outputs;
      const auto recon = out_path(g, "reconstruction.obj");
      save_mesh(r.reconstruction, recon);
      outputs.push_back(recon);
      if (po_depth)
        for (std::size_t i = 0; i < r.depth.size(); ++i) {
          const auto p = out_path(g, "depth_" + std::to_string(i) + ".pgm");
          save_pgm16(p, r.depth[i]);
          outputs.push_back(p);
        }
      Json j;
      const auto& t = r.estimate.transform;
      j["rotation"] = {{t.rotation()(0, 0), t.rotation()(0, 1), t.rotation()(0, 2)},
                       {t.rotation()(1, 0), t.rotation()(1, 1), t.rotation()(1, 2)},
                       {t.rotation()(2, 0), t.rotation()(2, 1), t.rotation()(2, 2)}};
      j["translation"] = to_json(t.translation());
      j["add_s"] = r.estimate.add_s;
      j["auc"] = r.estimate.auc;
      j["hypothesis"] = r.estimate.hypothesis;
      j["score"] = r.estimate.score;
      const auto pj = out_path(g, "pose.json");
      std::ofstream(pj) << j.dump(2) << '\n';
      outputs.push_back(pj);
      std::printf("ADD-S %.6f m  AUC %.4f  (ground truth: cloud frame = model frame)\n", r.estimate.add_s, r.estimate.auc);
      write_manifest(g, cfg, "pose", outputs);
    } else if (*info) {
      const auto cfg = load(g);
      const TriMesh m = fs::exists(mi_target) ? load_mesh(mi_target) : cfg.load_object(mi_target)->mesh;
      const auto [lo, hi] = m.bounds();
      std::printf("vertices %zu\nfaces %zu\nsurface_area %.6g m^2\nbounds_min %.6g %.6g %.6g\nbounds_max %.6g %.6g %.6g\n",
                  m.vertices().size(), m.faces().size(), m.surface_area(), lo.x(), lo.y(), lo.z(), hi.x(), hi.y(), hi.z());
      std::printf("non_manifold_edges %zu\n", non_manifold_edge_count(m));
    } else if (*plot) {
      std::map<std::string, std::vector<std::string>> groups;
      for (const auto& s : pl_series) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw InvalidArgument("plot: expected label=path, got '" + s + "'");
        groups[s.substr(0, eq)].push_back(s.substr(eq + 1));
      }
      fs::create_directories(g.out_dir);
      for (const auto& p : emit_plots(groups, g.out_dir)) std::printf("%s\n", p.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
