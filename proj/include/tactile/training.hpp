#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tactile/environment.hpp"
#include "tactile/features.hpp"
#include "tactile/policy.hpp"
#include "tactile/reward.hpp"

namespace tactile {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << v;
  return o.str();
}

/// Contacts gathered by exploration steps (the approach contacts carry t = 0).
inline std::vector<Vec3> exploration_points(const ContactCloud& c) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.timestamps()[i] >= 1) out.push_back(c.points()[i]);
  return out;
}

/// Final coverage IoU of an episode's exploration contacts.
inline double episode_iou(const EpisodeState& s, double cell) {
  return coverage_iou(exploration_points(s.contacts), dense_surface_sample(*s.object, cell), cell);
}

/// Pose AUC on the whole cloud; 0 when the pipeline cannot produce a pose.
inline double episode_auc(const EpisodeState& s, const Vec3& view_center, const PipelineConfig& cfg) {
  try {
    return estimate_pose(s.contacts, s.model->mesh, s.start_wrist.translation(), view_center, cfg, s.gt_pose).estimate.auc;
  } catch (const ReconstructionFailed&) {
    return 0.0;
  } catch (const RegistrationFailed&) {
    return 0.0;
  }
}

struct TrainConfig {
  RewardConfig reward;
  StateMask mask;
  FeatureConfig features;
  EnvConfig env;
  PipelineConfig pipeline;
  PpoConfig ppo;
  std::vector<int> hidden{64, 64};
  std::int64_t budget = 200000;  // environment steps
  int envs = 8;
  int rollout_steps = 256;  // per environment per update
  int workers = 1;
  std::uint64_t seed = 0;
  bool monitor_auc = true;  // evaluate the pose AUC every C steps even when P is off
  double iou_cell = 0.01;
  bool normalize_inputs = true;  // running mean/std of observations, refreshed after each update

  void validate() const {
    reward.validate();
    if (budget < 0) throw InvalidArgument("train: budget must be >= 0");
    if (envs < 1 || rollout_steps < 1 || workers < 1) throw InvalidArgument("train: envs, rollout_steps and workers must be >= 1");
    if (!(iou_cell > 0.0)) throw InvalidArgument("train: iou cell must be positive");
  }
};

/// Digest of everything that fixes the policy's input/output contract.
inline std::uint64_t policy_digest(const StateMask& mask, const FeatureConfig& f, const HandConfig& h, const std::vector<int>& hidden) {
  std::ostringstream o;
  o << std::setprecision(17) << "mask=" << mask.name() << "\nmemory_radius=" << f.memory_radius << "\nmemory_cell=" << f.memory_cell
    << "\nboundary_cap=" << f.boundary_cap << "\nstep_translation=" << h.step_translation
    << "\nstep_rotation=" << h.step_rotation << "\nhidden=";
  for (int x : hidden) o << x << ',';
  o << '\n';
  return fnv1a(o.str());
}

inline std::uint64_t policy_digest(const TrainConfig& c) { return policy_digest(c.mask, c.features, c.env.hand, c.hidden); }

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'T', 'A', 'C', 'T', 'C', 'K', 'P', 'T'};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_digest = 0;
  std::string variant;
  std::string mask;
  std::int64_t env_steps = 0;
  PolicyNet net;
};

namespace ckpt_detail {
template <class T>
void put(std::ostream& o, const T& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& i) {
  T v{};
  i.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!i) throw ParseError("checkpoint", 0, "truncated checkpoint");
  return v;
}
inline void put_str(std::ostream& o, const std::string& s) {
  put<std::uint32_t>(o, static_cast<std::uint32_t>(s.size()));
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string get_str(std::istream& i) {
  const auto n = get<std::uint32_t>(i);
  if (n > (1u << 20)) throw ParseError("checkpoint", 0, "string field too long");
  std::string s(n, '\0');
  i.read(s.data(), n);
  if (!i) throw ParseError("checkpoint", 0, "truncated checkpoint");
  return s;
}
}  // namespace ckpt_detail

/// Little-endian binary blob: magic, version, digest, metadata, layer sizes,
/// raw parameters, then the input normalization (mean, std).
inline void write_checkpoint(std::ostream& o, const Checkpoint& c) {
  using namespace ckpt_detail;
  o.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(o, c.version);
  put<std::uint64_t>(o, c.config_digest);
  put_str(o, c.variant);
  put_str(o, c.mask);
  put<std::int64_t>(o, c.env_steps);
  put<std::uint32_t>(o, static_cast<std::uint32_t>(c.net.inputs()));
  put<std::uint32_t>(o, static_cast<std::uint32_t>(c.net.actions()));
  put<std::uint32_t>(o, static_cast<std::uint32_t>(c.net.hidden().size()));
  for (int h : c.net.hidden()) put<std::uint32_t>(o, static_cast<std::uint32_t>(h));
  put<std::uint64_t>(o, c.net.size());
  o.write(reinterpret_cast<const char*>(c.net.params().data()), static_cast<std::streamsize>(c.net.size() * sizeof(double)));
  o.write(reinterpret_cast<const char*>(c.net.input_mean().data()), static_cast<std::streamsize>(c.net.inputs() * sizeof(double)));
  o.write(reinterpret_cast<const char*>(c.net.input_std().data()), static_cast<std::streamsize>(c.net.inputs() * sizeof(double)));
}

inline Checkpoint read_checkpoint(std::istream& i) {
  using namespace ckpt_detail;
  char magic[8];
  i.read(magic, sizeof magic);
  if (!i || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw ParseError("checkpoint", 0, "bad magic");
  Checkpoint c;
  c.version = get<std::uint32_t>(i);
  if (c.version != kCheckpointVersion)
    throw VersionError("checkpoint version " + std::to_string(c.version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  c.config_digest = get<std::uint64_t>(i);
  c.variant = get_str(i);
  c.mask = get_str(i);
  c.env_steps = get<std::int64_t>(i);
  const auto in = get<std::uint32_t>(i);
  const auto out = get<std::uint32_t>(i);
  const auto nh = get<std::uint32_t>(i);
  if (nh == 0 || nh > 16) throw ParseError("checkpoint", 0, "bad layer count");
  std::vector<int> hidden;
  for (std::uint32_t k = 0; k < nh; ++k) hidden.push_back(static_cast<int>(get<std::uint32_t>(i)));
  c.net = PolicyNet(static_cast<int>(in), hidden, static_cast<int>(out));
  const auto np = get<std::uint64_t>(i);
  if (np != c.net.size()) throw ParseError("checkpoint", 0, "parameter count does not match layer sizes");
  i.read(reinterpret_cast<char*>(c.net.params().data()), static_cast<std::streamsize>(np * sizeof(double)));
  VecX mean(in), sd(in);
  i.read(reinterpret_cast<char*>(mean.data()), static_cast<std::streamsize>(in * sizeof(double)));
  i.read(reinterpret_cast<char*>(sd.data()), static_cast<std::streamsize>(in * sizeof(double)));
  if (!i) throw ParseError("checkpoint", 0, "truncated parameters");
  c.net.set_input_normalization(mean, sd);
  return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot write " + path);
  write_checkpoint(f, c);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot read " + path);
  return read_checkpoint(f);
}

// ---------------------------------------------------------------------------
// Curves

/// Per-update training curve. Metrics with no sample in an update are NaN.
struct CurveRow {
  int update = 0;
  std::int64_t env_steps = 0;
  double mean_reward = 0.0;
  double mean_iou = std::numeric_limits<double>::quiet_NaN();
  double mean_auc = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr std::string_view kCurveHeader = "update,env_steps,mean_reward,mean_IoU,mean_AUC";

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_curves(std::ostream& o, const std::vector<CurveRow>& rows) {
  o << kCurveHeader << '\n';
  for (const auto& r : rows)
    o << r.update << ',' << r.env_steps << ',' << format_real(r.mean_reward) << ',' << format_real(r.mean_iou) << ','
      << format_real(r.mean_auc) << '\n';
}

/// Per-step reward terms, for logs.
struct StepRecord {
  int env = 0;
  std::int64_t episode = 0;
  int t = 0;
  ActionId action{};
  RewardBreakdown reward;
  bool terminated = false;
  TerminationReason reason = TerminationReason::None;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<CurveRow> curves;
  std::int64_t episodes = 0;
};

namespace train_detail {

struct Slot {
  EpisodeState state;
  std::unique_ptr<RewardTracker> tracker;
  Rng rng;
  std::int64_t episode = 0;
};

struct SegmentStats {
  double reward_sum = 0.0;
  std::vector<double> iou;
  std::vector<double> auc;
  std::vector<StepRecord> log;
  std::int64_t episodes = 0;
};

}  // namespace train_detail

/// PPO training over parallel environment slots; one RewardTracker (visit
/// table and history) per episode. Every update appends a CurveRow.
inline TrainResult train(const TrainConfig& cfg, const std::vector<std::shared_ptr<const ObjectModel>>& objects,
                         const std::function<void(const StepRecord&)>& on_step = {},
                         const std::function<void(const CurveRow&)>& on_update = {}) {
  using namespace train_detail;
  cfg.validate();
  if (objects.empty()) throw InvalidArgument("train: no objects");
  const TactileEnv env(cfg.env);
  TrainResult res;
  res.checkpoint.variant = cfg.reward.variant.name();
  res.checkpoint.mask = cfg.mask.name();
  res.checkpoint.config_digest = policy_digest(cfg);
  PolicyNet& net = res.checkpoint.net;
  net = PolicyNet(kStateDim, cfg.hidden, kActions);
  net.initialize(derive_seed(cfg.seed, 0x1001));
  if (cfg.budget == 0) return res;

  const Vec3 center = cfg.env.object_center;
  auto start_episode = [&](Slot& sl, int e) {
    const std::uint64_t s = derive_seed(cfg.seed, (static_cast<std::uint64_t>(e) << 32) | static_cast<std::uint64_t>(sl.episode));
    const auto& obj = objects[static_cast<std::size_t>((sl.episode + e) % static_cast<std::int64_t>(objects.size()))];
    sl.state = env.reset(obj, s);
    sl.tracker = std::make_unique<RewardTracker>(cfg.reward);
  };
  auto observe = [&](const EpisodeState& s) { return assemble_state(s, env.workspace(), cfg.features, cfg.mask).flatten(); };

  std::vector<Slot> slots(static_cast<std::size_t>(cfg.envs));
  for (int e = 0; e < cfg.envs; ++e) {
    slots[e].rng = Rng(derive_seed(cfg.seed, 0x2000 + static_cast<std::uint64_t>(e)));
    start_episode(slots[e], e);
  }

  Adam opt(net.size());
  RunningMoments moments(kStateDim);
  const bool want_auc = cfg.reward.variant.pose || cfg.monitor_auc;
  int update = 0;
  while (res.checkpoint.env_steps < cfg.budget) {
    std::vector<RolloutBatch> seg(slots.size());
    std::vector<SegmentStats> stats(slots.size());
    auto run_env = [&](int e) {
      Slot& sl = slots[e];
      RolloutBatch& b = seg[e];
      SegmentStats& st = stats[e];
      for (int k = 0; k < cfg.rollout_steps; ++k) {
        const auto obs = observe(sl.state);
        const auto out = policy_forward(net, obs, sl.rng, PolicyMode::Train);
        const RigidTransform before = sl.state.hand.wrist;
        const StepOutcome so = env.step(sl.state, out.action);
        const EpisodeState& s = sl.state;
        double rp = 0.0;
        if (want_auc && s.t % cfg.reward.period == 0) {
          rp = pose_feedback(s.contacts, s.model->mesh, s.gt_pose, s.t, cfg.reward.period, s.start_wrist.translation(), center,
                             cfg.pipeline);
          st.auc.push_back(rp);
        }
        const auto br = sl.tracker->step(before, s.start_wrist, out.action, touch_state(s.touch), so.touches, rp);
        b.states.push_back(obs);
        b.actions.push_back(static_cast<int>(out.action));
        b.log_probs.push_back(out.log_prob);
        b.rewards.push_back(br.total);
        b.values.push_back(out.value);
        b.dones.push_back(so.terminated ? 1 : 0);
        st.reward_sum += br.total;
        if (on_step) st.log.push_back({e, sl.episode, s.t, out.action, br, so.terminated, so.reason});
        const bool last = k + 1 == cfg.rollout_steps;
        if (so.terminated) {
          double boot = 0.0;
          if (so.reason == TerminationReason::Horizon) {
            Rng scratch(0);
            boot = policy_forward(net, observe(s), scratch, PolicyMode::Evaluate).value;
          }
          b.next_values.push_back(boot);
          b.cut.push_back(1);
          st.iou.push_back(episode_iou(s, cfg.iou_cell));
          ++st.episodes;
          ++sl.episode;
          start_episode(sl, e);
        } else {
          b.next_values.push_back(0.0);  // filled from the next step's value below
          b.cut.push_back(last ? 1 : 0);
          if (last) {
            Rng scratch(0);
            b.next_values.back() = policy_forward(net, observe(s), scratch, PolicyMode::Evaluate).value;
          }
        }
        if (k > 0 && !b.dones[k - 1]) b.next_values[k - 1] = out.value;
      }
    };
    const int nw = std::min(cfg.workers, cfg.envs);
    if (nw <= 1) {
      for (int e = 0; e < cfg.envs; ++e) run_env(e);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errs(static_cast<std::size_t>(nw));
      for (int w = 0; w < nw; ++w)
        pool.emplace_back([&, w] {
          try {
            for (int e = w; e < cfg.envs; e += nw) run_env(e);
          } catch (...) {
            errs[w] = std::current_exception();
          }
        });
      for (auto& t : pool) t.join();
      for (auto& ep : errs)
        if (ep) std::rethrow_exception(ep);
    }

    RolloutBatch batch;
    CurveRow row;
    row.update = update;
    double rsum = 0.0, isum = 0.0, asum = 0.0;
    std::size_t in = 0, an = 0;
    for (std::size_t e = 0; e < slots.size(); ++e) {
      batch.append(seg[e]);
      rsum += stats[e].reward_sum;
      for (double v : stats[e].iou) isum += v, ++in;
      for (double v : stats[e].auc) asum += v, ++an;
      res.episodes += stats[e].episodes;
      if (on_step)
        for (const auto& rec : stats[e].log) on_step(rec);
    }
    res.checkpoint.env_steps += static_cast<std::int64_t>(batch.size());
    row.env_steps = res.checkpoint.env_steps;
    row.mean_reward = rsum / static_cast<double>(batch.size());
    if (in) row.mean_iou = isum / static_cast<double>(in);
    if (an) row.mean_auc = asum / static_cast<double>(an);
    ppo_update(net, opt, batch, cfg.ppo, derive_seed(cfg.seed, 0x3000'0000ull + static_cast<std::uint64_t>(update)));
    if (cfg.normalize_inputs) {
      moments.add(batch.states);
      net.set_input_normalization(moments.mean(), moments.stddev());
    }
    res.curves.push_back(row);
    if (on_update) on_update(row);
    ++update;
  }
  return res;
}

}  // namespace tactile
