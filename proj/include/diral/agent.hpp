#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <numeric>
#include <vector>

#include "diral/channel.hpp"
#include "diral/config.hpp"
#include "diral/neuralnet.hpp"
#include "diral/observer.hpp"
#include "diral/rewarder.hpp"
#include "diral/rng.hpp"
#include "diral/scenario.hpp"

namespace diral {

using Scalar = float;  // training precision; gradient checks instantiate double

// One stored transition: the L-step observation windows around one action.
template <typename S>
struct Experience {
  Mat<S> state_hist;  // L x input_size, oldest first
  int action = 0;
  S reward = 0;
  Mat<S> next_hist;  // L x input_size
  bool terminal = false;
};

// Short FIFO ring shared by all agents; oldest evicted at capacity.
template <typename S>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity = 1024) : capacity_(capacity) {}

  void push(Experience<S> e) {
    buf_.push_back(std::move(e));
    if (buf_.size() > capacity_) buf_.pop_front();
  }

  size_t size() const { return buf_.size(); }
  size_t capacity() const { return capacity_; }
  const Experience<S>& at(size_t i) const { return buf_[i]; }

  // Uniform without replacement when the buffer holds at least batch items,
  // with replacement otherwise.
  std::vector<size_t> sample_indices(size_t batch, Rng& rng) const {
    std::vector<size_t> idx(batch);
    const size_t n = buf_.size();
    if (n >= batch) {
      std::vector<size_t> pool(n);
      std::iota(pool.begin(), pool.end(), size_t{0});
      for (size_t i = 0; i < batch; ++i) {
        size_t j = i + static_cast<size_t>(rng.uniform_int(0, static_cast<int>(n - i - 1)));
        std::swap(pool[i], pool[j]);
        idx[i] = pool[i];
      }
    } else {
      for (size_t i = 0; i < batch; ++i)
        idx[i] = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(n - 1)));
    }
    return idx;
  }

 private:
  size_t capacity_;
  std::deque<Experience<S>> buf_;
};

struct TrainConfig {
  double gamma = 0.7;
  int batch_size = 512;
  double epsilon_start = 1.0;
  double epsilon_decay = 0.999;  // per episode
  double epsilon_min = 0.02;
  int target_sync_period = 100;  // training steps
  int updates_per_episode = 1;
  long total_timesteps = 250000;
  int episode_len = 25;
  size_t replay_capacity = 1024;
  bool capacity_per_agent = false;  // scale replay capacity by N
  int history_len = 6;
  int hidden = 256;
  double learning_rate = 1e-4;
  NetArch arch = NetArch::lstm;
  bool cooperative = true;  // add the mean-reward term
  // Re-draw vehicle positions at episode boundaries so training sees
  // independent configurations instead of one slowly drifting world.
  bool reset_world_per_episode = false;
  // Select behavior actions from the target network instead of the
  // evaluation network. The joint behavior policy then only changes at
  // target syncs, which damps the lockstep argmax-hopping that shared
  // parameters otherwise produce.
  bool act_from_target = false;

  void validate() const {
    if (gamma < 0 || gamma > 1) throw ConfigError("train: gamma must be in [0,1]");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (episode_len < 1) throw ConfigError("train: episode_len must be >= 1");
    if (history_len < 1) throw ConfigError("train: history_len must be >= 1");
    if (epsilon_min < 0 || epsilon_min > 1 || epsilon_start < 0 || epsilon_start > 1)
      throw ConfigError("train: epsilon bounds must be in [0,1]");
  }
};

namespace detail {

template <typename S>
Mat<S> history_matrix(const ObservationHistory& hist) {
  Mat<S> m(hist.length(), hist.obs_size());
  auto flat = hist.flat();
  for (int t = 0; t < hist.length(); ++t)
    for (int c = 0; c < hist.obs_size(); ++c)
      m(t, c) = static_cast<S>(flat[static_cast<size_t>(t) * hist.obs_size() + c]);
  return m;
}

template <typename S>
std::vector<Mat<S>> matrix_to_sequence(const Mat<S>& window) {
  std::vector<Mat<S>> seq(window.rows());
  for (Eigen::Index t = 0; t < window.rows(); ++t) seq[t] = window.row(t);
  return seq;
}

}  // namespace detail

// Lowest index wins ties.
template <typename S>
int argmax_lowest(const Mat<S>& q, Eigen::Index row) {
  int best = 0;
  for (int a = 1; a < q.cols(); ++a)
    if (q(row, a) > q(row, best)) best = a;
  return best;
}

// Epsilon-greedy selection from the evaluation network for one agent.
template <typename S>
int act(const ObservationHistory& history, const QNetwork<S>& net, double epsilon, Rng& rng) {
  if (rng.uniform01() < epsilon) return rng.uniform_int(0, net.cfg.n_actions - 1);
  Mat<S> window = detail::history_matrix<S>(history);
  Mat<S> q = net.forward(detail::matrix_to_sequence(window));
  return argmax_lowest(q, 0);
}

// Double-DQN targets: the evaluation network picks the next action, the
// target network values it. Terminal samples cut the bootstrap.
template <typename S>
std::vector<S> td_targets(const std::vector<const Experience<S>*>& batch,
                          const QNetwork<S>& eval_net, const QNetwork<S>& target_net,
                          double gamma) {
  if (batch.empty()) throw std::invalid_argument("td_targets: empty batch");
  const int L = eval_net.cfg.history_len;
  const int in = eval_net.cfg.input_size;
  std::vector<Mat<S>> seq(L);
  for (int t = 0; t < L; ++t) seq[t].resize(batch.size(), in);
  for (size_t r = 0; r < batch.size(); ++r)
    for (int t = 0; t < L; ++t)
      for (int c = 0; c < in; ++c) seq[t](static_cast<Eigen::Index>(r), c) = batch[r]->next_hist(t, c);
  Mat<S> q_eval = eval_net.forward(seq);
  Mat<S> q_target = target_net.forward(seq);
  std::vector<S> y(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->terminal) {
      y[i] = batch[i]->reward;
      continue;
    }
    int a_star = argmax_lowest(q_eval, static_cast<Eigen::Index>(i));
    y[i] = batch[i]->reward +
           static_cast<S>(gamma) * q_target(static_cast<Eigen::Index>(i), a_star);
  }
  return y;
}

template <typename S>
void sync_target(const QNetwork<S>& eval_net, QNetwork<S>& target_net) {
  target_net = eval_net;
}

// One Adam update of the evaluation network on a uniformly sampled batch,
// minimizing the mean squared TD error. Returns the batch loss, or a
// negative value when the buffer is empty (no-op).
template <typename S>
double train_step(const ReplayBuffer<S>& buffer, QNetwork<S>& eval_net,
                  const QNetwork<S>& target_net, AdamOptimizer<S>& optimizer,
                  const TrainConfig& cfg, Rng& rng) {
  if (buffer.size() == 0) return -1.0;
  const size_t batch = static_cast<size_t>(cfg.batch_size);
  auto idx = buffer.sample_indices(batch, rng);
  std::vector<const Experience<S>*> samples(batch);
  for (size_t i = 0; i < batch; ++i) samples[i] = &buffer.at(idx[i]);

  std::vector<S> y = td_targets(samples, eval_net, target_net, cfg.gamma);

  const int L = eval_net.cfg.history_len;
  const int in = eval_net.cfg.input_size;
  std::vector<Mat<S>> seq(L);
  for (int t = 0; t < L; ++t) seq[t].resize(batch, in);
  for (size_t r = 0; r < batch; ++r)
    for (int t = 0; t < L; ++t)
      for (int c = 0; c < in; ++c) seq[t](static_cast<Eigen::Index>(r), c) = samples[r]->state_hist(t, c);

  typename QNetwork<S>::Cache cache;
  Mat<S> q = eval_net.forward(seq, &cache);
  Mat<S> dq = Mat<S>::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (size_t i = 0; i < batch; ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    S diff = q(r, samples[i]->action) - y[i];
    loss += static_cast<double>(diff) * static_cast<double>(diff);
    dq(r, samples[i]->action) = S(2) * diff / static_cast<S>(batch);
  }
  loss /= static_cast<double>(batch);

  typename QNetwork<S>::Grads grads;
  eval_net.backward(dq, cache, grads);
  optimizer.step(eval_net.params(), eval_net.grads_as_list(grads));
  return loss;
}

struct EpisodeStats {
  long episode = 0;
  double epsilon = 0.0;
  double mean_base_reward_sum = 0.0;  // per-step sum of base rewards, averaged over the episode
  double loss = 0.0;                  // mean loss of this episode's updates, -1 before training
};

struct TrainOutput {
  QNetwork<Scalar> eval_net;
  QNetwork<Scalar> target_net;
  std::vector<EpisodeStats> curve;
  CheckpointMeta meta;
  long episodes_run = 0;
};

// Returning false stops training after the current episode.
using EpisodeCallback = std::function<bool(const EpisodeStats&)>;

// Full DIRAL training loop: shared recurrent double-DQN over all vehicles,
// epsilon-greedy exploration, shared short FIFO replay, one (configurable)
// update per 25-step episode, periodic hard target sync. Observations are
// oracle positions (the light-weight training channel has no protocol path).
inline TrainOutput run_training(const ScenarioConfig& scenario, const VpdParams& vpd_params,
                                const RewardParams& reward_params, const TrainConfig& train_cfg,
                                std::uint64_t seed, const EpisodeCallback& on_episode = {},
                                const QNetwork<Scalar>* warm_start = nullptr) {
  scenario.validate();
  vpd_params.validate();
  reward_params.validate();
  train_cfg.validate();

  const int n = scenario.n_vehicles;
  const int k = scenario.n_resources;
  const int input_size = vpd_params.bins + k;
  const int L = train_cfg.history_len;

  Rng world_rng = Rng::fork(seed, 0);
  Rng explore_rng = Rng::fork(seed, 1);
  Rng sample_rng = Rng::fork(seed, 2);
  Rng init_rng = Rng::fork(seed, 3);

  TrainOutput out;
  QNetConfig net_cfg{input_size, k, train_cfg.hidden, L, train_cfg.arch};
  out.eval_net.init(net_cfg, init_rng);
  if (warm_start != nullptr) {
    if (warm_start->cfg.input_size != input_size || warm_start->cfg.n_actions != k)
      throw ConfigError("train: warm-start checkpoint shape does not match scenario");
    out.eval_net = *warm_start;
  }
  out.target_net = out.eval_net;
  out.meta = CheckpointMeta{net_cfg, vpd_params.bins, vpd_params.radius};

  AdamOptimizer<Scalar> adam;
  adam.learning_rate = train_cfg.learning_rate;
  ReplayBuffer<Scalar> buffer(train_cfg.capacity_per_agent
                                  ? train_cfg.replay_capacity * static_cast<size_t>(n)
                                  : train_cfg.replay_capacity);

  WorldState world = init_world(scenario, world_rng);
  std::vector<ObservationHistory> hist(n, ObservationHistory(L, vpd_params.bins, k));
  std::vector<int> prev_action(n, -1);

  // Pending transition pieces from the previous step.
  std::vector<Mat<Scalar>> pending_state(n);
  std::vector<int> pending_action(n, -1);
  std::vector<Scalar> pending_reward(n, 0);
  bool have_pending = false;
  bool pending_terminal = false;

  long train_steps_done = 0;
  long episode = 0;
  double epsilon = train_cfg.epsilon_start;
  double ep_base_sum = 0.0;
  double ep_loss_sum = 0.0;
  int ep_loss_count = 0;

  auto others_of = [&](int i) {
    std::vector<double> others;
    others.reserve(n - 1);
    for (int j = 0; j < n; ++j)
      if (j != i) others.push_back(world.positions[j]);
    return others;
  };

  auto push_observations = [&]() {
    for (int i = 0; i < n; ++i)
      hist[i].push(build_state(world.positions[i], others_of(i), prev_action[i], k, vpd_params,
                               scenario.highway_length));
  };

  auto flush_pending = [&](bool terminal) {
    if (!have_pending) return;
    for (int i = 0; i < n; ++i)
      buffer.push(Experience<Scalar>{pending_state[i], pending_action[i], pending_reward[i],
                                     detail::history_matrix<Scalar>(hist[i]), terminal});
    have_pending = false;
  };

  for (long t = 0; t < train_cfg.total_timesteps; ++t) {
    const int step_in_episode = static_cast<int>(t % train_cfg.episode_len);

    push_observations();
    flush_pending(pending_terminal);
    pending_terminal = false;

    // Batched epsilon-greedy action selection over all agents.
    std::vector<Mat<Scalar>> seq(L);
    for (int s = 0; s < L; ++s) seq[s].resize(n, input_size);
    for (int i = 0; i < n; ++i) {
      Mat<Scalar> w = detail::history_matrix<Scalar>(hist[i]);
      pending_state[i] = w;
      for (int s = 0; s < L; ++s) seq[s].row(i) = w.row(s);
    }
    Mat<Scalar> q = train_cfg.act_from_target ? out.target_net.forward(seq)
                                              : out.eval_net.forward(seq);
    ResourceAssignment actions(n);
    for (int i = 0; i < n; ++i) {
      if (explore_rng.uniform01() < epsilon) {
        actions[i] = explore_rng.uniform_int(0, k - 1);
      } else {
        actions[i] = argmax_lowest(q, i);
      }
    }

    std::vector<double> base = reward_vector(actions, world, reward_params,
                                             scenario.highway_length);
    std::vector<double> rewards = train_cfg.cooperative ? cooperative_rewards(base) : base;
    for (double b : base) ep_base_sum += b;

    for (int i = 0; i < n; ++i) {
      pending_action[i] = actions[i];
      pending_reward[i] = static_cast<Scalar>(rewards[i]);
      prev_action[i] = actions[i];
    }
    have_pending = true;
    pending_terminal = step_in_episode == train_cfg.episode_len - 1;

    world = step_mobility(world, scenario, world_rng);

    if (pending_terminal) {
      // Complete the terminal transitions before histories reset.
      push_observations();
      flush_pending(true);

      EpisodeStats stats;
      stats.episode = episode;
      stats.epsilon = epsilon;
      stats.mean_base_reward_sum = ep_base_sum / train_cfg.episode_len;

      if (buffer.size() >= std::min<size_t>(train_cfg.batch_size, buffer.capacity())) {
        for (int u = 0; u < train_cfg.updates_per_episode; ++u) {
          double loss = train_step(buffer, out.eval_net, out.target_net, adam, train_cfg,
                                   sample_rng);
          ep_loss_sum += loss;
          ++ep_loss_count;
          ++train_steps_done;
          if (train_steps_done % train_cfg.target_sync_period == 0)
            sync_target(out.eval_net, out.target_net);
        }
      }
      stats.loss = ep_loss_count > 0 ? ep_loss_sum / ep_loss_count : -1.0;
      out.curve.push_back(stats);

      epsilon = std::max(epsilon * train_cfg.epsilon_decay, train_cfg.epsilon_min);
      ++episode;
      ep_base_sum = 0.0;
      ep_loss_sum = 0.0;
      ep_loss_count = 0;

      for (auto& h : hist) h.reset();
      std::fill(prev_action.begin(), prev_action.end(), -1);
      if (train_cfg.reset_world_per_episode)
        world = init_world(scenario, world_rng);
      else
        episode_velocity_update(world, scenario, world_rng);

      if (on_episode && !on_episode(stats)) break;
    }
  }
  out.episodes_run = episode;
  return out;
}

inline void apply_config(TrainConfig& c, const KeyValueConfig& kv) {
  c.gamma = kv.get_double("train.gamma", c.gamma);
  c.batch_size = kv.get_int("train.batch_size", c.batch_size);
  c.epsilon_start = kv.get_double("train.epsilon_start", c.epsilon_start);
  c.epsilon_decay = kv.get_double("train.epsilon_decay", c.epsilon_decay);
  c.epsilon_min = kv.get_double("train.epsilon_min", c.epsilon_min);
  c.target_sync_period = kv.get_int("train.target_sync_period", c.target_sync_period);
  c.updates_per_episode = kv.get_int("train.updates_per_episode", c.updates_per_episode);
  c.total_timesteps = kv.get_long("train.total_timesteps", c.total_timesteps);
  c.episode_len = kv.get_int("train.episode_len", c.episode_len);
  c.replay_capacity = static_cast<size_t>(
      kv.get_long("train.replay_capacity", static_cast<long>(c.replay_capacity)));
  c.capacity_per_agent = kv.get_bool("train.capacity_per_agent", c.capacity_per_agent);
  c.history_len = kv.get_int("train.history_len", c.history_len);
  c.hidden = kv.get_int("train.hidden", c.hidden);
  c.learning_rate = kv.get_double("train.learning_rate", c.learning_rate);
  if (kv.has("train.arch")) {
    std::string a = kv.get_string("train.arch", "lstm");
    if (a == "lstm") c.arch = NetArch::lstm;
    else if (a == "fnn") c.arch = NetArch::fnn;
    else throw ConfigError("unknown train.arch: " + a);
  }
  c.cooperative = kv.get_bool("train.cooperative", c.cooperative);
  c.reset_world_per_episode =
      kv.get_bool("train.reset_world_per_episode", c.reset_world_per_episode);
  c.act_from_target = kv.get_bool("train.act_from_target", c.act_from_target);
  c.validate();
}

}  // namespace diral
