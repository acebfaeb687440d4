#include <cmath>
#include <vector>

#include "diral/agent.hpp"
#include "doctest.h"

using namespace diral;

namespace {

// A network whose output is a constant vector regardless of input: all
// weights zero, Q-values come straight from the head bias.
QNetwork<double> constant_net(int input_size, int history_len,
                              const std::vector<double>& q_values) {
  QNetConfig cfg;
  cfg.input_size = input_size;
  cfg.n_actions = static_cast<int>(q_values.size());
  cfg.hidden = 4;
  cfg.history_len = history_len;
  Rng rng(0);
  QNetwork<double> net;
  net.init(cfg, rng);
  for (Mat<double>* p : net.params()) p->setZero();
  for (int a = 0; a < cfg.n_actions; ++a) net.head.b(0, a) = q_values[static_cast<size_t>(a)];
  return net;
}

VpdObservation uniform_obs(int bins, int k, double value) {
  VpdObservation o;
  o.vpd.assign(static_cast<size_t>(bins), value);
  o.prev_action.assign(static_cast<size_t>(k), 0.0);
  return o;
}

Experience<double> make_exp(int L, int input_size, int action, double reward, bool terminal) {
  Experience<double> e;
  e.state_hist = Mat<double>::Constant(L, input_size, 0.1);
  e.next_hist = Mat<double>::Constant(L, input_size, 0.2);
  e.action = action;
  e.reward = reward;
  e.terminal = terminal;
  return e;
}

}  // namespace

TEST_CASE("argmax_lowest breaks ties toward the lowest index") {
  Mat<double> q(1, 4);
  q << 0.5, 2.0, 2.0, 1.0;
  CHECK(argmax_lowest(q, 0) == 1);
  q << 3.0, 3.0, 3.0, 3.0;
  CHECK(argmax_lowest(q, 0) == 0);
}

TEST_CASE("act with epsilon=1 is uniform over actions") {
  const int k = 3, bins = 4, L = 2;
  auto net = constant_net(bins + k, L, {0.0, 5.0, 0.0});
  ObservationHistory hist(L, bins, k);
  hist.push(uniform_obs(bins, k, 0.0));

  const int draws = 10000;
  std::vector<int> counts(k, 0);
  Rng rng(123);
  for (int i = 0; i < draws; ++i) ++counts[static_cast<size_t>(act(hist, net, 1.0, rng))];
  const double p = 1.0 / k;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (int a = 0; a < k; ++a)
    CHECK(std::abs(counts[static_cast<size_t>(a)] - draws * p) < 3.0 * sigma);
}

TEST_CASE("act with epsilon=0 is the greedy action with the tie rule") {
  const int k = 3, bins = 4, L = 2;
  ObservationHistory hist(L, bins, k);
  hist.push(uniform_obs(bins, k, 0.3));
  Rng rng(7);
  auto net = constant_net(bins + k, L, {0.0, 5.0, 5.0});
  for (int i = 0; i < 20; ++i) CHECK(act(hist, net, 0.0, rng) == 1);
  auto flat = constant_net(bins + k, L, {2.0, 2.0, 2.0});
  CHECK(act(hist, flat, 0.0, rng) == 0);
}

TEST_CASE("td_targets") {
  const int L = 2, in = 3;

  SUBCASE("double-DQN hand example gives 1.35") {
    // eval net prefers action 1; target values it at 0.9; r=0.72, gamma=0.7:
    // y = 0.72 + 0.7 * 0.9 = 1.35.
    auto eval_net = constant_net(in, L, {0.1, 2.0});
    auto target_net = constant_net(in, L, {0.5, 0.9});
    auto e = make_exp(L, in, 0, 0.72, false);
    std::vector<const Experience<double>*> batch = {&e};
    auto y = td_targets(batch, eval_net, target_net, 0.7);
    CHECK(y[0] == doctest::Approx(1.35));
  }

  SUBCASE("gamma=0 reduces targets to the rewards") {
    auto eval_net = constant_net(in, L, {0.1, 2.0});
    auto target_net = constant_net(in, L, {-3.0, 4.0});
    auto e1 = make_exp(L, in, 0, -2.0, false);
    auto e2 = make_exp(L, in, 1, 0.5, false);
    std::vector<const Experience<double>*> batch = {&e1, &e2};
    auto y = td_targets(batch, eval_net, target_net, 0.0);
    CHECK(y[0] == doctest::Approx(-2.0));
    CHECK(y[1] == doctest::Approx(0.5));
  }

  SUBCASE("terminal samples cut the bootstrap") {
    auto eval_net = constant_net(in, L, {0.1, 2.0});
    auto target_net = constant_net(in, L, {9.0, 9.0});
    auto e = make_exp(L, in, 1, 1.0, true);
    std::vector<const Experience<double>*> batch = {&e};
    auto y = td_targets(batch, eval_net, target_net, 0.7);
    CHECK(y[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("replay buffer is a FIFO ring") {
  ReplayBuffer<double> buf(3);
  for (int i = 0; i < 5; ++i) buf.push(make_exp(1, 1, i, 0.0, false));
  CHECK(buf.size() == 3);
  CHECK(buf.at(0).action == 2);
  CHECK(buf.at(1).action == 3);
  CHECK(buf.at(2).action == 4);
}

TEST_CASE("replay sampling") {
  ReplayBuffer<double> buf(16);
  Rng rng(5);

  SUBCASE("without replacement when the buffer covers the batch") {
    for (int i = 0; i < 10; ++i) buf.push(make_exp(1, 1, i, 0.0, false));
    for (int trial = 0; trial < 50; ++trial) {
      auto idx = buf.sample_indices(10, rng);
      std::vector<bool> seen(10, false);
      for (size_t j : idx) {
        CHECK(j < 10);
        CHECK(!seen[j]);
        seen[j] = true;
      }
    }
  }

  SUBCASE("with replacement when the buffer is smaller than the batch") {
    for (int i = 0; i < 3; ++i) buf.push(make_exp(1, 1, i, 0.0, false));
    auto idx = buf.sample_indices(8, rng);
    CHECK(idx.size() == 8);
    for (size_t j : idx) CHECK(j < 3);
  }
}

TEST_CASE("sync_target copies the evaluation network exactly") {
  QNetConfig cfg;
  cfg.input_size = 4;
  cfg.n_actions = 2;
  cfg.hidden = 5;
  cfg.history_len = 2;
  Rng rng(3);
  QNetwork<double> eval_net, target_net;
  eval_net.init(cfg, rng);
  target_net.init(cfg, rng);
  sync_target(eval_net, target_net);
  auto a = std::as_const(eval_net).params();
  auto b = std::as_const(target_net).params();
  for (size_t i = 0; i < a.size(); ++i)
    CHECK((*a[i] - *b[i]).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("train_step loss equals the pre-update mean squared TD error") {
  QNetConfig cfg;
  cfg.input_size = 3;
  cfg.n_actions = 2;
  cfg.hidden = 4;
  cfg.history_len = 2;
  Rng rng(11);
  QNetwork<double> eval_net, target_net;
  eval_net.init(cfg, rng);
  target_net.init(cfg, rng);

  ReplayBuffer<double> buf(4);
  auto e = make_exp(cfg.history_len, cfg.input_size, 1, 0.4, false);
  buf.push(e);

  TrainConfig tc;
  tc.batch_size = 1;
  tc.gamma = 0.7;

  // Batch of one: the sampled element is known, so the loss is recomputable.
  std::vector<const Experience<double>*> batch = {&buf.at(0)};
  auto y = td_targets(batch, eval_net, target_net, tc.gamma);
  std::vector<Mat<double>> seq(cfg.history_len);
  for (int t = 0; t < cfg.history_len; ++t) seq[t] = e.state_hist.row(t);
  double q = eval_net.forward(seq)(0, e.action);
  const double expected = (q - y[0]) * (q - y[0]);

  AdamOptimizer<double> opt;
  Rng srng(2);
  double loss = train_step(buf, eval_net, target_net, opt, tc, srng);
  CHECK(loss == doctest::Approx(expected).epsilon(1e-9));

  ReplayBuffer<double> empty(4);
  CHECK(train_step(empty, eval_net, target_net, opt, tc, srng) < 0.0);
}

TEST_CASE("repeated updates on one terminal transition fit its target") {
  QNetConfig cfg;
  cfg.input_size = 3;
  cfg.n_actions = 2;
  cfg.hidden = 8;
  cfg.history_len = 2;
  Rng rng(21);
  QNetwork<double> eval_net, target_net;
  eval_net.init(cfg, rng);
  target_net.init(cfg, rng);

  ReplayBuffer<double> buf(4);
  auto e = make_exp(cfg.history_len, cfg.input_size, 0, 1.0, true);
  buf.push(e);

  TrainConfig tc;
  tc.batch_size = 2;
  AdamOptimizer<double> opt;
  opt.learning_rate = 1e-2;
  Rng srng(4);

  std::vector<Mat<double>> seq(cfg.history_len);
  for (int t = 0; t < cfg.history_len; ++t) seq[t] = e.state_hist.row(t);
  bool converged = false;
  for (int step = 0; step < 5000 && !converged; ++step) {
    train_step(buf, eval_net, target_net, opt, tc, srng);
    converged = std::abs(eval_net.forward(seq)(0, 0) - 1.0) < 1e-2;
  }
  CHECK(converged);
}

TEST_CASE("run_training on the toy scenario") {
  ScenarioConfig sc = build_scenario(1);
  sc.seed = 99;
  VpdParams vpd{8, sc.highway_length};
  RewardParams rp;
  rp.variant = RewardVariant::toy_neutral_farthest;
  TrainConfig tc;
  tc.total_timesteps = 1000;
  tc.episode_len = 25;
  tc.batch_size = 16;
  tc.hidden = 8;
  tc.history_len = 3;
  tc.replay_capacity = 64;

  auto out = run_training(sc, vpd, rp, tc, 99);

  SUBCASE("episode accounting and epsilon decay law with floor") {
    CHECK(out.episodes_run == 40);
    REQUIRE(out.curve.size() == 40);
    for (size_t i = 0; i < out.curve.size(); ++i) {
      CHECK(out.curve[i].episode == static_cast<long>(i));
      const double expect =
          std::max(tc.epsilon_start * std::pow(tc.epsilon_decay, static_cast<double>(i)),
                   tc.epsilon_min);
      CHECK(out.curve[i].epsilon == doctest::Approx(expect).epsilon(1e-12));
      CHECK(out.curve[i].mean_base_reward_sum <= sc.n_vehicles);
      CHECK(out.curve[i].mean_base_reward_sum >= -2.0 * sc.n_vehicles * sc.n_vehicles);
    }
  }

  SUBCASE("same seed reproduces the learning curve exactly") {
    auto again = run_training(sc, vpd, rp, tc, 99);
    REQUIRE(again.curve.size() == out.curve.size());
    for (size_t i = 0; i < out.curve.size(); ++i) {
      CHECK(again.curve[i].epsilon == out.curve[i].epsilon);
      CHECK(again.curve[i].mean_base_reward_sum == out.curve[i].mean_base_reward_sum);
      CHECK(again.curve[i].loss == out.curve[i].loss);
    }
    auto a = std::as_const(out.eval_net).params();
    auto b = std::as_const(again.eval_net).params();
    for (size_t i = 0; i < a.size(); ++i)
      CHECK((*a[i] - *b[i]).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("callback can stop training early") {
    auto stopped = run_training(sc, vpd, rp, tc, 99, [](const EpisodeStats& s) {
      return s.episode < 4;
    });
    CHECK(stopped.episodes_run == 5);
  }

  SUBCASE("warm start rejects mismatched shapes") {
    QNetConfig bad;
    bad.input_size = vpd.bins + sc.n_resources + 1;
    bad.n_actions = sc.n_resources;
    bad.hidden = tc.hidden;
    bad.history_len = tc.history_len;
    Rng r(1);
    QNetwork<Scalar> net;
    net.init(bad, r);
    CHECK_THROWS_AS(run_training(sc, vpd, rp, tc, 99, {}, &net), ConfigError);
  }
}
