#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tactile/evaluation.hpp"
#include "tactile/mesh_io.hpp"
#include "tactile/objects.hpp"

namespace tactile {

inline const std::vector<std::string>& known_variants() {
  static const std::vector<std::string> v = {"TMBP", "TMB", "TB", "TM", "TMP", "TBP"};
  return v;
}
inline const std::vector<std::string>& known_masks() {
  static const std::vector<std::string> v = {"BFTRM", "FTRM", "BFTR"};
  return v;
}
inline const std::vector<std::string>& known_baselines() {
  static const std::vector<std::string> v = {"grid", "random"};
  return v;
}

/// Every tunable of a run. Loaded from flat `section.key = value` text.
struct ExperimentConfig {
  std::vector<std::string> objects{"cuboid", "cylinder", "sphere", "edge", "corner"};
  std::vector<std::string> train_objects{"cuboid", "cylinder", "sphere", "edge", "corner"};
  std::vector<std::string> variants{"grid", "TMBP"};
  std::string variant = "TMBP";  // reward variant used by `train`
  std::string mask = "BFTRM";
  std::vector<std::uint64_t> seeds{0};
  std::string object_dir;  // optional directory of <name>.obj / <name>.ply overriding built-ins
  std::map<std::string, int> cap_override;
  std::map<std::string, std::string> checkpoints;  // variant -> checkpoint path for ablations

  EnvConfig env;
  FeatureConfig features;
  RewardConfig reward;
  PpoConfig ppo;
  PipelineConfig pipeline;
  GridSearchConfig grid;
  std::vector<int> hidden{64, 64};
  std::int64_t budget = 200000;
  int envs = 8;
  int rollout_steps = 256;
  bool monitor_auc = true;
  bool normalize_inputs = true;
  int trials = 4;
  int cap = 150;
  double iou_cell = 0.01;

  int cap_for(const std::string& object) const {
    auto it = cap_override.find(object);
    return it == cap_override.end() ? cap : it->second;
  }

  void validate() const {
    auto in = [](const std::vector<std::string>& set, const std::string& s) {
      return std::find(set.begin(), set.end(), s) != set.end();
    };
    if (!in(known_variants(), variant)) throw InvalidArgument("config: unknown reward variant '" + variant + "'");
    if (!in(known_masks(), mask)) throw InvalidArgument("config: unknown state mask '" + mask + "'");
    for (const auto& v : variants)
      if (!in(known_variants(), v) && !in(known_baselines(), v)) throw InvalidArgument("config: unknown variant '" + v + "'");
    if (objects.empty() || train_objects.empty()) throw InvalidArgument("config: object lists must not be empty");
    if (seeds.empty()) throw InvalidArgument("config: at least one seed is required");
    if (trials < 1 || cap < 0) throw InvalidArgument("config: trials must be >= 1 and cap >= 0");
    for (const auto& [k, v] : cap_override)
      if (v < 0) throw InvalidArgument("config: cap for '" + k + "' must be >= 0");
    for (const auto& o : objects) (void)resolve_object_path(o);
    for (const auto& o : train_objects) (void)resolve_object_path(o);
    reward.validate();
  }

  /// Mesh file for `name` under object_dir, or "" for a built-in. Throws if
  /// neither exists.
  std::string resolve_object_path(const std::string& name) const {
    if (!object_dir.empty()) {
      for (const char* ext : {".obj", ".ply"}) {
        const auto p = std::filesystem::path(object_dir) / (name + ext);
        if (std::filesystem::exists(p)) return p.string();
      }
    }
    const auto& a = primitive_names();
    const auto& b = test_object_names();
    if (std::find(a.begin(), a.end(), name) == a.end() && std::find(b.begin(), b.end(), name) == b.end())
      throw InvalidArgument("config: object '" + name + "' has no mesh file and is not built in");
    return {};
  }

  std::shared_ptr<const ObjectModel> load_object(const std::string& name) const {
    const auto path = resolve_object_path(name);
    if (path.empty()) return builtin_object(name);
    return std::make_shared<const ObjectModel>(ObjectModel{name, load_mesh(path)});
  }

  TrainConfig train_config(std::uint64_t seed, const std::string& which_variant) const {
    TrainConfig t;
    t.reward = reward;
    t.reward.variant = RewardVariant::parse(which_variant);
    t.mask = StateMask::parse(mask);
    t.features = features;
    t.env = env;
    t.pipeline = pipeline;
    t.ppo = ppo;
    t.hidden = hidden;
    t.budget = budget;
    t.envs = envs;
    t.rollout_steps = rollout_steps;
    t.seed = seed;
    t.monitor_auc = monitor_auc;
    t.normalize_inputs = normalize_inputs;
    t.iou_cell = iou_cell;
    return t;
  }

  EvalConfig eval_config(std::uint64_t seed, const std::string& object) const {
    EvalConfig e;
    e.env = env;
    e.features = features;
    e.mask = StateMask::parse(mask);
    e.pipeline = pipeline;
    e.grid = grid;
    e.grid.step = env.hand.step_translation;
    e.grid.rotation_step = env.hand.step_rotation;
    e.hidden = hidden;
    e.trials = trials;
    e.cap = cap_for(object);
    e.iou_cell = iou_cell;
    e.seed = seed;
    return e;
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in{std::string(s)};
  while (std::getline(in, cur, ',')) {
    auto t = trim(cur);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

template <class T>
T parse_number(const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw InvalidArgument("not a number: '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("not a boolean: '" + v + "'");
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream o;
  for (std::size_t i = 0; i < v.size(); ++i) o << (i ? "," : "") << v[i];
  return o.str();
}

struct Key {
  std::string doc;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

inline std::map<std::string, Key> registry() {
  std::map<std::string, Key> r;
  auto real = [&](const std::string& k, std::string doc, auto acc) {
    r[k] = {std::move(doc), [acc](ExperimentConfig& c, const std::string& v) { acc(c) = parse_number<double>(v); },
            [acc](const ExperimentConfig& c) { return fmt(acc(const_cast<ExperimentConfig&>(c))); }};
  };
  auto integer = [&](const std::string& k, std::string doc, auto acc) {
    r[k] = {std::move(doc),
            [acc](ExperimentConfig& c, const std::string& v) {
              acc(c) = static_cast<std::remove_reference_t<decltype(acc(c))>>(parse_number<long long>(v));
            },
            [acc](const ExperimentConfig& c) { return std::to_string(acc(const_cast<ExperimentConfig&>(c))); }};
  };
  auto boolean = [&](const std::string& k, std::string doc, auto acc) {
    r[k] = {std::move(doc), [acc](ExperimentConfig& c, const std::string& v) { acc(c) = parse_bool(v); },
            [acc](const ExperimentConfig& c) { return std::string(acc(const_cast<ExperimentConfig&>(c)) ? "true" : "false"); }};
  };
  auto text = [&](const std::string& k, std::string doc, auto acc) {
    r[k] = {std::move(doc), [acc](ExperimentConfig& c, const std::string& v) { acc(c) = v; },
            [acc](const ExperimentConfig& c) { return acc(const_cast<ExperimentConfig&>(c)); }};
  };
  auto list = [&](const std::string& k, std::string doc, auto acc) {
    r[k] = {std::move(doc), [acc](ExperimentConfig& c, const std::string& v) { acc(c) = split_list(v); },
            [acc](const ExperimentConfig& c) { return join(acc(const_cast<ExperimentConfig&>(c))); }};
  };
  using C = ExperimentConfig;

  list("experiment.objects", "objects evaluated by evaluate/ablate", [](C& c) -> auto& { return c.objects; });
  list("experiment.variants", "ablation rows: reward variants and/or grid, random", [](C& c) -> auto& { return c.variants; });
  text("experiment.variant", "reward variant used by train", [](C& c) -> auto& { return c.variant; });
  text("experiment.mask", "state mask (BFTRM, FTRM, BFTR)", [](C& c) -> auto& { return c.mask; });
  text("experiment.object_dir", "directory with <name>.obj or <name>.ply meshes", [](C& c) -> auto& { return c.object_dir; });
  r["experiment.seeds"] = {"comma-separated seeds",
                           [](C& c, const std::string& v) {
                             c.seeds.clear();
                             for (const auto& s : split_list(v)) c.seeds.push_back(parse_number<std::uint64_t>(s));
                           },
                           [](const C& c) { return join(c.seeds); }};

  integer("eval.trials", "rollouts per (policy, object)", [](C& c) -> auto& { return c.trials; });
  integer("eval.cap", "step cap per evaluation rollout", [](C& c) -> auto& { return c.cap; });
  real("eval.iou_cell", "voxel size for coverage IoU (m)", [](C& c) -> auto& { return c.iou_cell; });

  list("train.objects", "objects cycled through during training", [](C& c) -> auto& { return c.train_objects; });
  integer("train.budget", "environment steps", [](C& c) -> auto& { return c.budget; });
  integer("train.envs", "parallel environments", [](C& c) -> auto& { return c.envs; });
  integer("train.rollout_steps", "steps per environment per update", [](C& c) -> auto& { return c.rollout_steps; });
  boolean("train.monitor_auc", "track pose AUC for every variant", [](C& c) -> auto& { return c.monitor_auc; });
  boolean("train.normalize_inputs", "running observation normalization", [](C& c) -> auto& { return c.normalize_inputs; });
  r["train.hidden"] = {"hidden layer widths",
                       [](C& c, const std::string& v) {
                         c.hidden.clear();
                         for (const auto& s : split_list(v)) c.hidden.push_back(parse_number<int>(s));
                         if (c.hidden.empty()) throw InvalidArgument("train.hidden must list at least one width");
                       },
                       [](const C& c) { return join(c.hidden); }};

  real("reward.alpha", "touch weight", [](C& c) -> auto& { return c.reward.alpha; });
  real("reward.beta", "curiosity weight", [](C& c) -> auto& { return c.reward.beta; });
  real("reward.gamma", "pose feedback weight", [](C& c) -> auto& { return c.reward.gamma; });
  real("reward.memory_penalty", "reward for a repeated (pose, action)", [](C& c) -> auto& { return c.reward.memory_penalty; });
  integer("reward.period", "pose feedback period C (steps)", [](C& c) -> auto& { return c.reward.period; });
  integer("reward.history", "history length k", [](C& c) -> auto& { return c.reward.history; });
  real("reward.visit_cell", "visit/pose position cell (m)", [](C& c) -> auto& { return c.reward.visit_cell; });
  real("reward.orientation_bin", "pose orientation bin (rad)", [](C& c) -> auto& { return c.reward.orientation_bin; });

  real("ppo.discount", "", [](C& c) -> auto& { return c.ppo.discount; });
  real("ppo.gae_lambda", "", [](C& c) -> auto& { return c.ppo.gae_lambda; });
  real("ppo.clip", "", [](C& c) -> auto& { return c.ppo.clip; });
  real("ppo.value_coef", "", [](C& c) -> auto& { return c.ppo.value_coef; });
  real("ppo.entropy_coef", "", [](C& c) -> auto& { return c.ppo.entropy_coef; });
  real("ppo.learning_rate", "", [](C& c) -> auto& { return c.ppo.learning_rate; });
  real("ppo.adam_eps", "", [](C& c) -> auto& { return c.ppo.adam_eps; });
  real("ppo.max_grad_norm", "0 disables", [](C& c) -> auto& { return c.ppo.max_grad_norm; });
  integer("ppo.epochs", "", [](C& c) -> auto& { return c.ppo.epochs; });
  integer("ppo.minibatch", "", [](C& c) -> auto& { return c.ppo.minibatch; });

  integer("env.horizon", "steps before a Horizon reset", [](C& c) -> auto& { return c.env.horizon; });
  integer("env.lost_contact_limit", "touchless steps tolerated", [](C& c) -> auto& { return c.env.lost_contact_limit; });
  integer("env.max_approach_steps", "", [](C& c) -> auto& { return c.env.max_approach_steps; });
  real("env.object_jitter", "", [](C& c) -> auto& { return c.env.object_jitter; });
  real("env.start_distance", "", [](C& c) -> auto& { return c.env.start_distance; });
  real("env.start_reach_offset", "", [](C& c) -> auto& { return c.env.start_reach_offset; });
  real("env.start_lateral_jitter", "", [](C& c) -> auto& { return c.env.start_lateral_jitter; });
  real("env.start_rotation_jitter", "", [](C& c) -> auto& { return c.env.start_rotation_jitter; });

  real("hand.l1", "", [](C& c) -> auto& { return c.env.hand.l1; });
  real("hand.l2", "", [](C& c) -> auto& { return c.env.hand.l2; });
  real("hand.coupling", "", [](C& c) -> auto& { return c.env.hand.coupling; });
  real("hand.q_max", "", [](C& c) -> auto& { return c.env.hand.q_max; });
  real("hand.patch_radius", "", [](C& c) -> auto& { return c.env.hand.patch_radius; });
  real("hand.step_translation", "", [](C& c) -> auto& { return c.env.hand.step_translation; });
  real("hand.step_rotation", "", [](C& c) -> auto& { return c.env.hand.step_rotation; });
  real("hand.bend_increment", "", [](C& c) -> auto& { return c.env.hand.bend_increment; });

  real("features.memory_radius", "", [](C& c) -> auto& { return c.features.memory_radius; });
  real("features.memory_cell", "", [](C& c) -> auto& { return c.features.memory_cell; });
  real("features.boundary_cap", "", [](C& c) -> auto& { return c.features.boundary_cap; });

  integer("pose.viewpoints", "", [](C& c) -> auto& { return c.pipeline.viewpoints; });
  integer("pose.resample_points", "", [](C& c) -> auto& { return c.pipeline.resample_points; });
  real("pose.cap_half_angle", "viewpoint cap (rad)", [](C& c) -> auto& { return c.pipeline.cap_half_angle; });
  real("pose.auc_threshold", "ADD-S d_max (m)", [](C& c) -> auto& { return c.pipeline.auc_threshold; });
  integer("pose.icp_iterations", "", [](C& c) -> auto& { return c.pipeline.registration.max_iterations; });
  real("pose.icp_trim", "", [](C& c) -> auto& { return c.pipeline.registration.trim_fraction; });
  real("pose.icp_voxel", "", [](C& c) -> auto& { return c.pipeline.registration.voxel; });
  integer("pose.icp_max_points", "", [](C& c) -> auto& { return c.pipeline.registration.max_points; });
  integer("pose.extra_hypotheses", "", [](C& c) -> auto& { return c.pipeline.registration.extra_hypotheses; });

  real("grid.align_threshold", "alignment trigger (rad)", [](C& c) -> auto& { return c.grid.align_threshold; });
  integer("grid.max_align_steps", "", [](C& c) -> auto& { return c.grid.max_align_steps; });
  return r;
}

}  // namespace config_detail

/// Applies one `key = value` assignment. Dynamic keys: `eval.cap.<object>`
/// and `ablation.checkpoint.<variant>`.
inline void apply_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace config_detail;
  static const auto reg = registry();
  if (auto it = reg.find(key); it != reg.end()) {
    it->second.set(c, value);
  } else if (key.rfind("eval.cap.", 0) == 0 && key.size() > 9) {
    c.cap_override[key.substr(9)] = parse_number<int>(value);
  } else if (key.rfind("ablation.checkpoint.", 0) == 0 && key.size() > 20) {
    c.checkpoints[key.substr(20)] = value;
  } else {
    throw InvalidArgument("unknown config key '" + key + "'");
  }
}

/// Flat text: `key = value` lines, `#` comments, optional `[section]`
/// headers prefixing following keys. Unknown keys are errors.
inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "config", ExperimentConfig base = {}) {
  using config_detail::trim;
  std::string line, section;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) throw ParseError(source, n, "malformed section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source, n, "expected 'key = value'");
    auto key = trim(std::string_view(t).substr(0, eq));
    const auto value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ParseError(source, n, "empty key");
    if (!section.empty()) key = section + "." + key;
    try {
      apply_config_value(base, key, value);
    } catch (const InvalidArgument& e) {
      throw ParseError(source, n, e.what());
    }
  }
  return base;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read config " + path);
  return parse_config(f, path);
}

/// Canonical `key = value` dump in sorted key order (round-trips through
/// parse_config).
inline std::string dump_config(const ExperimentConfig& c) {
  using namespace config_detail;
  static const auto reg = registry();
  std::map<std::string, std::string> all;
  for (const auto& [k, e] : reg) all[k] = e.get(c);
  for (const auto& [k, v] : c.cap_override) all["eval.cap." + k] = std::to_string(v);
  for (const auto& [k, v] : c.checkpoints) all["ablation.checkpoint." + k] = v;
  std::ostringstream o;
  for (const auto& [k, v] : all) o << k << " = " << v << '\n';
  return o.str();
}

inline std::uint64_t config_digest(const ExperimentConfig& c) { return fnv1a(dump_config(c)); }

/// Key list with documentation, for --help style output.
inline std::vector<std::pair<std::string, std::string>> config_schema() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, e] : config_detail::registry()) out.emplace_back(k, e.doc);
  out.emplace_back("eval.cap.<object>", "per-object step cap override");
  out.emplace_back("ablation.checkpoint.<variant>", "use this checkpoint instead of training the variant");
  return out;
}

}  // namespace tactile
