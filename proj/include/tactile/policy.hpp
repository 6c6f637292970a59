#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tactile/features.hpp"
#include "tactile/hand.hpp"

namespace tactile {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

/// Feed-forward tanh trunk with a 12-way action head and a scalar value head.
/// All parameters live in one flat vector; layer views are offsets into it.
class PolicyNet {
 public:
  PolicyNet() : PolicyNet(kStateDim, {64, 64}, kActions) {}
  PolicyNet(int inputs, std::vector<int> hidden, int actions = kActions) : in_(inputs), hidden_(std::move(hidden)), out_(actions) {
    if (in_ < 1 || out_ < 1 || hidden_.empty()) throw InvalidArgument("PolicyNet: bad layer sizes");
    for (int h : hidden_)
      if (h < 1) throw InvalidArgument("PolicyNet: hidden width must be positive");
    std::size_t off = 0;
    int prev = in_;
    auto add = [&](int rows, int cols) {
      layers_.push_back({off, static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), off + static_cast<std::size_t>(rows) * cols});
      off += static_cast<std::size_t>(rows) * cols + rows;
    };
    for (int h : hidden_) {
      add(h, prev);
      prev = h;
    }
    add(out_, prev);  // policy head
    add(1, prev);     // value head
    params_.assign(off, 0.0);
    in_mean_ = VecX::Zero(in_);
    in_std_ = VecX::Ones(in_);
  }

  /// LeCun-normal trunk, small policy head, zero biases.
  void initialize(std::uint64_t seed, double policy_head_scale = 0.01, double value_head_scale = 1.0) {
    Rng rng(seed);
    std::fill(params_.begin(), params_.end(), 0.0);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      double scale = 1.0 / std::sqrt(static_cast<double>(layers_[l].cols));
      if (l == layers_.size() - 2) scale *= policy_head_scale;
      if (l == layers_.size() - 1) scale *= value_head_scale;
      auto w = weight(l);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * standard_normal(rng);
    }
  }

  /// Fixed affine input normalization applied before the first layer,
  /// followed by clipping to +-kInputClip.
  static constexpr double kInputClip = 5.0;
  void set_input_normalization(const VecX& mean, const VecX& std) {
    if (mean.size() != in_ || std.size() != in_ || (std.array() <= 0.0).any())
      throw InvalidArgument("PolicyNet: bad input normalization");
    in_mean_ = mean;
    in_std_ = std;
  }
  const VecX& input_mean() const noexcept { return in_mean_; }
  const VecX& input_std() const noexcept { return in_std_; }

  int inputs() const noexcept { return in_; }
  int actions() const noexcept { return out_; }
  const std::vector<int>& hidden() const noexcept { return hidden_; }
  std::vector<double>& params() noexcept { return params_; }
  const std::vector<double>& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }

  struct Layer {
    std::size_t w, rows, cols, b;
  };
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  Eigen::Map<MatX> weight(std::size_t l, std::vector<double>& buf) const {
    return {buf.data() + layers_[l].w, static_cast<Eigen::Index>(layers_[l].rows), static_cast<Eigen::Index>(layers_[l].cols)};
  }
  Eigen::Map<const MatX> weight(std::size_t l, const std::vector<double>& buf) const {
    return {buf.data() + layers_[l].w, static_cast<Eigen::Index>(layers_[l].rows), static_cast<Eigen::Index>(layers_[l].cols)};
  }
  Eigen::Map<VecX> bias(std::size_t l, std::vector<double>& buf) const {
    return {buf.data() + layers_[l].b, static_cast<Eigen::Index>(layers_[l].rows)};
  }
  Eigen::Map<const VecX> bias(std::size_t l, const std::vector<double>& buf) const {
    return {buf.data() + layers_[l].b, static_cast<Eigen::Index>(layers_[l].rows)};
  }
  Eigen::Map<MatX> weight(std::size_t l) { return weight(l, params_); }
  Eigen::Map<VecX> bias(std::size_t l) { return bias(l, params_); }
  Eigen::Map<const MatX> weight(std::size_t l) const { return weight(l, params_); }
  Eigen::Map<const VecX> bias(std::size_t l) const { return bias(l, params_); }

  /// Activations for a batch stored column-wise.
  struct Forward {
    std::vector<MatX> act;  // act[0] = input, act[i] = tanh output of hidden layer i
    MatX logits;
    VecX value;
  };

  Forward forward(const MatX& x) const {
    if (x.rows() != in_) throw InvalidArgument("PolicyNet: input width mismatch");
    Forward f;
    f.act.reserve(hidden_.size() + 1);
    MatX xn = x;
    xn.colwise() -= in_mean_;
    xn = (xn.array().colwise() / in_std_.array()).cwiseMax(-kInputClip).cwiseMin(kInputClip).matrix();
    f.act.push_back(std::move(xn));
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
      MatX z = weight(l) * f.act.back();
      z.colwise() += bias(l);
      f.act.push_back(z.array().tanh().matrix());
    }
    const std::size_t hp = hidden_.size();
    f.logits = weight(hp) * f.act.back();
    f.logits.colwise() += bias(hp);
    MatX v = weight(hp + 1) * f.act.back();
    v.colwise() += bias(hp + 1);
    f.value = v.row(0).transpose();
    return f;
  }

 private:
  int in_;
  std::vector<int> hidden_;
  int out_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
  VecX in_mean_, in_std_;
};

/// Running per-feature mean and variance (parallel Welford merge).
class RunningMoments {
 public:
  explicit RunningMoments(int n = kStateDim) : mean_(VecX::Zero(n)), m2_(VecX::Zero(n)) {}

  void add(const std::vector<std::array<double, kStateDim>>& xs) {
    if (xs.empty()) return;
    const auto nb = static_cast<double>(xs.size());
    VecX bm = VecX::Zero(mean_.size()), bm2 = VecX::Zero(mean_.size());
    for (const auto& x : xs)
      for (Eigen::Index i = 0; i < mean_.size(); ++i) bm[i] += x[i];
    bm /= nb;
    for (const auto& x : xs)
      for (Eigen::Index i = 0; i < mean_.size(); ++i) bm2[i] += (x[i] - bm[i]) * (x[i] - bm[i]);
    const double n = count_ + nb;
    const VecX delta = bm - mean_;
    mean_ += delta * (nb / n);
    m2_ += bm2 + delta.cwiseProduct(delta) * (count_ * nb / n);
    count_ = n;
  }
  double count() const noexcept { return count_; }
  const VecX& mean() const noexcept { return mean_; }
  /// Standard deviation floored at `floor` so constant features pass through.
  VecX stddev(double floor = 1e-2) const {
    if (count_ < 2) return VecX::Ones(mean_.size());
    return (m2_ / count_).cwiseSqrt().cwiseMax(floor);
  }

 private:
  VecX mean_, m2_;
  double count_ = 0.0;
};

/// Numerically stable softmax of one logit vector.
inline VecX softmax(const VecX& logits) {
  const double m = logits.maxCoeff();
  VecX e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

inline VecX log_softmax(const VecX& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

/// Lowest index among the maxima.
inline int argmax_lowest(const VecX& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

enum class PolicyMode { Train, Evaluate };

struct PolicyOutput {
  ActionId action = ActionId::TranslateXPos;
  double log_prob = 0.0;
  double value = 0.0;
  VecX probs;
};

inline MatX state_column(const std::array<double, kStateDim>& s) {
  MatX x(kStateDim, 1);
  for (int i = 0; i < kStateDim; ++i) x(i, 0) = s[i];
  return x;
}

/// Samples from the softmax in training; argmax (lowest index on ties) in
/// evaluation.
inline PolicyOutput policy_forward(const PolicyNet& net, const std::array<double, kStateDim>& state, Rng& rng,
                                   PolicyMode mode = PolicyMode::Train) {
  const auto f = net.forward(state_column(state));
  const VecX logits = f.logits.col(0);
  PolicyOutput out;
  out.probs = softmax(logits);
  out.value = f.value[0];
  int a = 0;
  if (mode == PolicyMode::Evaluate) {
    a = argmax_lowest(logits);
  } else {
    const double u = uniform01(rng);
    double c = 0.0;
    a = static_cast<int>(out.probs.size()) - 1;
    for (int i = 0; i < out.probs.size(); ++i) {
      c += out.probs[i];
      if (u < c) {
        a = i;
        break;
      }
    }
  }
  out.action = static_cast<ActionId>(a);
  out.log_prob = log_softmax(logits)[a];
  return out;
}

inline PolicyOutput policy_forward(const PolicyNet& net, const StateVector& state, std::uint64_t seed,
                                   PolicyMode mode = PolicyMode::Train) {
  Rng rng(seed);
  return policy_forward(net, state.flatten(), rng, mode);
}

/// One rollout worth of transitions, concatenated by environment. `cut[i]`
/// marks where the advantage recursion must stop (episode end or rollout
/// end); `next_value[i]` is the bootstrap value (already 0 on failure).
struct RolloutBatch {
  std::vector<std::array<double, kStateDim>> states;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> next_values;
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> cut;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const noexcept { return states.size(); }
  bool aligned() const noexcept {
    const std::size_t n = states.size();
    return actions.size() == n && log_probs.size() == n && rewards.size() == n && values.size() == n &&
           next_values.size() == n && dones.size() == n && cut.size() == n;
  }
  void append(const RolloutBatch& o) {
    auto cat = [](auto& a, const auto& b) { a.insert(a.end(), b.begin(), b.end()); };
    cat(states, o.states);
    cat(actions, o.actions);
    cat(log_probs, o.log_probs);
    cat(rewards, o.rewards);
    cat(values, o.values);
    cat(next_values, o.next_values);
    cat(dones, o.dones);
    cat(cut, o.cut);
    cat(advantages, o.advantages);
    cat(returns, o.returns);
  }
};

struct PpoConfig {
  double discount = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double learning_rate = 3e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-5;
  double max_grad_norm = 0.5;  // 0 disables clipping
  int epochs = 4;
  int minibatch = 256;
};

/// GAE(lambda) advantages and returns; does not normalize.
inline void compute_gae(RolloutBatch& b, double discount, double lambda) {
  if (!b.aligned()) throw InvalidArgument("compute_gae: misaligned batch");
  const std::size_t n = b.size();
  b.advantages.assign(n, 0.0);
  b.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double delta = b.rewards[k] + discount * b.next_values[k] - b.values[k];
    const double carry = b.cut[k] ? 0.0 : next_adv;
    b.advantages[k] = delta + discount * lambda * carry;
    b.returns[k] = b.advantages[k] + b.values[k];
    next_adv = b.advantages[k];
  }
}

/// Shift to mean 0 and scale to (population) std 1.
inline void normalize_advantages(std::vector<double>& a) {
  if (a.empty()) return;
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(a.size()));
  for (double& x : a) x = sd > 1e-12 ? (x - mean) / sd : x - mean;
}

struct LossStats {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

/// Clipped-surrogate loss plus weighted value loss minus the entropy bonus
/// on the samples `idx`, with its gradient written to `grad`.
inline LossStats ppo_loss(const PolicyNet& net, const RolloutBatch& b, std::span<const std::size_t> idx, const PpoConfig& hp,
                          std::vector<double>* grad) {
  const auto n = static_cast<Eigen::Index>(idx.size());
  if (n == 0) throw InvalidArgument("ppo_loss: empty minibatch");
  MatX x(net.inputs(), n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (int i = 0; i < net.inputs(); ++i) x(i, j) = b.states[idx[j]][i];
  const auto f = net.forward(x);
  const int na = net.actions();
  MatX dlogits(na, n);
  VecX dvalue(n);
  LossStats st;
  const double inv = 1.0 / static_cast<double>(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t k = idx[j];
    const VecX lp = log_softmax(f.logits.col(j));
    const VecX p = lp.array().exp().matrix();
    const int a = b.actions[k];
    const double adv = b.advantages[k];
    const double ratio = std::exp(lp[a] - b.log_probs[k]);
    const double clipped = std::clamp(ratio, 1.0 - hp.clip, 1.0 + hp.clip);
    const double s1 = ratio * adv, s2 = clipped * adv;
    st.policy -= std::min(s1, s2) * inv;
    if (ratio != clipped) st.clip_fraction += inv;
    st.approx_kl += (b.log_probs[k] - lp[a]) * inv;
    // d(-min(s1,s2))/dlogp: gradient flows only through the unclipped branch.
    const double dlogp = s1 <= s2 ? -adv * ratio * inv : 0.0;
    double h = 0.0;
    for (int i = 0; i < na; ++i) h -= p[i] * lp[i];
    st.entropy += h * inv;
    for (int i = 0; i < na; ++i) {
      const double onehot = i == a ? 1.0 : 0.0;
      const double dh = -p[i] * (lp[i] + h);  // dH/dlogit_i
      dlogits(i, j) = dlogp * (onehot - p[i]) - hp.entropy_coef * dh * inv;
    }
    const double err = f.value[j] - b.returns[k];
    st.value += err * err * inv;
    dvalue[j] = hp.value_coef * 2.0 * err * inv;
  }
  st.total = st.policy + hp.value_coef * st.value - hp.entropy_coef * st.entropy;
  if (!grad) return st;

  grad->assign(net.size(), 0.0);
  const std::size_t hp_idx = net.hidden().size();
  const MatX& top = f.act.back();
  net.weight(hp_idx, *grad) = dlogits * top.transpose();
  net.bias(hp_idx, *grad) = dlogits.rowwise().sum();
  net.weight(hp_idx + 1, *grad) = dvalue.transpose() * top.transpose();
  net.bias(hp_idx + 1, *grad)[0] = dvalue.sum();
  MatX dh = net.weight(hp_idx).transpose() * dlogits + net.weight(hp_idx + 1).transpose() * dvalue.transpose();
  for (std::size_t l = hp_idx; l-- > 0;) {
    const MatX dz = (dh.array() * (1.0 - f.act[l + 1].array().square())).matrix();
    net.weight(l, *grad) = dz * f.act[l].transpose();
    net.bias(l, *grad) = dz.rowwise().sum();
    if (l > 0) dh = net.weight(l).transpose() * dz;
  }
  return st;
}

class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad, const PpoConfig& hp) {
    if (m_.size() != params.size()) {
      m_.assign(params.size(), 0.0);
      v_.assign(params.size(), 0.0);
      t_ = 0;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(hp.adam_beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(hp.adam_beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = hp.adam_beta1 * m_[i] + (1.0 - hp.adam_beta1) * grad[i];
      v_[i] = hp.adam_beta2 * v_[i] + (1.0 - hp.adam_beta2) * grad[i] * grad[i];
      params[i] -= hp.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + hp.adam_eps);
    }
  }
  std::int64_t steps() const noexcept { return t_; }

 private:
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

struct UpdateStats {
  LossStats last;
  LossStats mean;
  int minibatches = 0;
};

/// GAE, per-batch advantage normalization, then `epochs` passes of shuffled
/// minibatch Adam steps on the clipped objective.
inline UpdateStats ppo_update(PolicyNet& net, Adam& opt, RolloutBatch& batch, const PpoConfig& hp, std::uint64_t seed) {
  if (batch.size() == 0) throw InvalidArgument("ppo_update: empty batch");
  if (hp.epochs < 1 || hp.minibatch < 1) throw InvalidArgument("ppo_update: epochs and minibatch must be positive");
  compute_gae(batch, hp.discount, hp.gae_lambda);
  normalize_advantages(batch.advantages);
  Rng rng(seed);
  std::vector<std::size_t> order(batch.size());
  std::vector<double> grad;
  UpdateStats us;
  for (int e = 0; e < hp.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(hp.minibatch)) {
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(hp.minibatch), order.size() - s);
      const auto st = ppo_loss(net, batch, std::span<const std::size_t>(order.data() + s, len), hp, &grad);
      if (hp.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (double g : grad) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > hp.max_grad_norm)
          for (double& g : grad) g *= hp.max_grad_norm / norm;
      }
      opt.step(net.params(), grad, hp);
      us.last = st;
      us.mean.total += st.total;
      us.mean.policy += st.policy;
      us.mean.value += st.value;
      us.mean.entropy += st.entropy;
      us.mean.clip_fraction += st.clip_fraction;
      us.mean.approx_kl += st.approx_kl;
      ++us.minibatches;
    }
  }
  const double k = 1.0 / us.minibatches;
  us.mean.total *= k;
  us.mean.policy *= k;
  us.mean.value *= k;
  us.mean.entropy *= k;
  us.mean.clip_fraction *= k;
  us.mean.approx_kl *= k;
  return us;
}

// ---------------------------------------------------------------------------
// Baselines

struct GridSearchConfig {
  double step = 0.005;                  // translation step, used as the stop margin
  double rotation_step = 0.1;
  double align_threshold = kPi / 6;     // 30 degrees
  double orientation_limit = 1.0;
  int max_align_steps = 3;              // consecutive rotations before resuming the sweep
};

enum class SweepDirection { Up, Down };

struct GridSearchState {
  SweepDirection direction = SweepDirection::Up;
  int column = 0;
  bool lateral_right = true;
  int align_steps = 0;
};

/// Extra observation for the alignment rule: latest mean contact normal and
/// the wrist orientation relative to the start frame.
struct GridContext {
  std::optional<Vec3> mean_normal;
  Mat3 wrist_rotation = Mat3::Identity();
  Mat3 start_rotation = Mat3::Identity();
};

namespace grid_detail {

inline double palm_deviation(const Mat3& r, const Vec3& n) {
  const Vec3 palm = r.col(2);
  return std::acos(std::clamp(palm.dot(-n.normalized()), -1.0, 1.0));
}

inline bool allowed(const StateVector& obs, ActionId a, double step) {
  return !is_translation(a) || obs.boundary[static_cast<int>(a)] >= step;
}

}  // namespace grid_detail

/// Boustrophedon sweep in the wrist's lateral plane with a rotation-based
/// alignment rule. Never emits a translation with less than one step of room.
inline ActionId grid_policy_step(GridSearchState& gs, const StateVector& obs, const GridContext& ctx = {},
                                 const GridSearchConfig& cfg = {}) {
  using grid_detail::allowed;
  if (ctx.mean_normal && ctx.mean_normal->norm() > 1e-9 && gs.align_steps < cfg.max_align_steps) {
    const double dev = grid_detail::palm_deviation(ctx.wrist_rotation, *ctx.mean_normal);
    if (dev > cfg.align_threshold) {
      std::optional<ActionId> best;
      double best_dev = dev;
      for (int i = 6; i < kActions; ++i) {
        const auto a = static_cast<ActionId>(i);
        if (action_axis(a).z() != 0.0) continue;  // spinning about the palm axis cannot help
        const Mat3 r = ctx.wrist_rotation * Eigen::AngleAxisd(cfg.rotation_step, action_axis(a)).toRotationMatrix();
        const Vec3 e = euler_xyz(ctx.start_rotation.transpose() * r);
        if ((e.cwiseAbs().array() > cfg.orientation_limit).any()) continue;
        const double d = grid_detail::palm_deviation(r, *ctx.mean_normal);
        if (d < best_dev - 1e-12) {
          best_dev = d;
          best = a;
        }
      }
      if (best) {
        ++gs.align_steps;
        return *best;
      }
    }
  }
  gs.align_steps = 0;

  const ActionId vertical = gs.direction == SweepDirection::Up ? kUp : kDown;
  if (allowed(obs, vertical, cfg.step)) return vertical;

  // Column finished: shift sideways once and reverse.
  gs.direction = gs.direction == SweepDirection::Up ? SweepDirection::Down : SweepDirection::Up;
  ++gs.column;
  ActionId side = gs.lateral_right ? kRight : kLeft;
  if (!allowed(obs, side, cfg.step)) {
    gs.lateral_right = !gs.lateral_right;
    side = gs.lateral_right ? kRight : kLeft;
  }
  if (allowed(obs, side, cfg.step)) return side;
  const ActionId reversed = gs.direction == SweepDirection::Up ? kUp : kDown;
  if (allowed(obs, reversed, cfg.step)) return reversed;
  // Boxed in laterally: take the translation with the most room.
  int best = 0;
  for (int i = 1; i < 6; ++i)
    if (obs.boundary[i] > obs.boundary[best]) best = i;
  return static_cast<ActionId>(best);
}

inline ActionId random_policy_step(Rng& rng) { return static_cast<ActionId>(uniform_index(rng, kActions)); }

}  // namespace tactile
