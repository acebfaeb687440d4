#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "diral/agent.hpp"
#include "diral/baselines.hpp"
#include "diral/channel.hpp"
#include "diral/config.hpp"
#include "diral/neighborcast.hpp"
#include "diral/neuralnet.hpp"
#include "diral/observer.hpp"
#include "diral/rewarder.hpp"
#include "diral/rng.hpp"
#include "diral/scenario.hpp"

namespace diral {

enum class Policy { diral, sps, random };

inline Policy policy_from_string(const std::string& s) {
  if (s == "diral") return Policy::diral;
  if (s == "sps") return Policy::sps;
  if (s == "random") return Policy::random;
  throw ConfigError("unknown policy: " + s);
}

inline std::string to_string(Policy p) {
  switch (p) {
    case Policy::diral: return "diral";
    case Policy::sps: return "sps";
    case Policy::random: return "random";
  }
  return "?";
}

struct EvalOptions {
  double duration_s = 200.0;        // the reference setup uses 1000 s
  int window_transmissions = 100;   // PRR measurement window
  int distance_bins = 10;           // for the PRR-vs-distance histogram
  bool perfect_knowledge = false;   // diral: bypass the neighbor protocol
  long stale_threshold = 20;
  bool keep_samples = true;         // retain per-transmission PRRs in the report
  // Seed neighbor tables with one loss-free CAM round before the run.
  // Vehicles run the broadcast protocol before the learned allocator takes
  // over, so starting them fully blind would be an artificial cold start:
  // identical empty observations make every agent pick the same slot and,
  // with half-duplex radios, nobody ever decodes anything to recover.
  bool bootstrap_tables = true;
};

struct DistanceBin {
  double lo = 0, hi = 0;
  double mean_prr = 0;
  long samples = 0;
};

struct EvalReport {
  std::vector<double> window_means;
  double mean_prr = 0;
  double median_prr = 0, q1_prr = 0, q3_prr = 0;  // quartiles of window means
  std::vector<DistanceBin> by_distance;
  double collision_rate = 0;  // fraction of steps with any shared resource
  long isolated_transmissions = 0;
  long steps = 0;
  long transmissions = 0;
  std::vector<double> per_tx_prr;  // populated when keep_samples
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  double pos = q * (static_cast<double>(sorted.size()) - 1.0);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace detail

// Runs one seeded evaluation: greedy DIRAL from a checkpointed network, or
// the SPS / random baselines. PRR is recorded per transmission and
// aggregated into measurement windows; in SINR mode the DIRAL observations
// come from the CAM-piggybacked neighbor tables unless perfect_knowledge is
// set.
inline EvalReport run_eval(Policy policy, const ScenarioConfig& scenario,
                           const ChannelParams& channel_in, const VpdParams& vpd_params,
                           const SpsParams& sps_params, const QNetwork<Scalar>* net,
                           const EvalOptions& opts, std::uint64_t seed) {
  scenario.validate();
  if (policy == Policy::diral) {
    if (net == nullptr) throw ConfigError("eval: diral policy requires a checkpoint");
    if (net->cfg.n_actions != scenario.n_resources)
      throw ConfigError("eval: checkpoint action count does not match scenario resources");
    if (net->cfg.input_size != vpd_params.bins + scenario.n_resources)
      throw ConfigError("eval: checkpoint input size does not match bins + resources");
  }

  const int n = scenario.n_vehicles;
  const int k = scenario.n_resources;
  ChannelParams channel = channel_in;
  channel.comm_range = scenario.comm_range;

  Rng world_rng = Rng::fork(seed, 0);
  Rng channel_rng = Rng::fork(seed, 1);
  Rng policy_rng = Rng::fork(seed, 2);

  WorldState world = init_world(scenario, world_rng);
  const long total_steps = static_cast<long>(opts.duration_s / scenario.cam_period);

  std::vector<ObservationHistory> hist;
  std::vector<int> prev_action(n, -1);
  std::vector<NeighborTable> tables;
  if (policy == Policy::diral) {
    hist.assign(n, ObservationHistory(net->cfg.history_len, vpd_params.bins, k));
    if (!opts.perfect_knowledge) {
      for (int i = 0; i < n; ++i)
        tables.push_back(NeighborTable::make(i, world.positions[i], opts.stale_threshold));
      if (opts.bootstrap_tables) {
        std::vector<CamPayload> boot;
        boot.reserve(n);
        for (int i = 0; i < n; ++i) boot.push_back(prepare_cam(tables[i], world.positions[i]));
        for (int rx = 0; rx < n; ++rx)
          for (int tx = 0; tx < n; ++tx)
            if (tx != rx) merge_tables(tables[rx], boot[tx]);
      }
    }
  }
  std::vector<SpsState> sps_states;
  if (policy == Policy::sps) sps_states.assign(n, SpsState(k));

  EvalReport report;
  double window_sum = 0.0;
  int window_count = 0;
  long collision_steps = 0;
  std::vector<double> dist_sum(opts.distance_bins, 0.0);
  std::vector<long> dist_cnt(opts.distance_bins, 0);
  const double dist_bin_width = scenario.comm_range / opts.distance_bins;

  for (long t = 0; t < total_steps; ++t) {
    ResourceAssignment actions(n);
    if (policy == Policy::diral) {
      for (int i = 0; i < n; ++i) {
        std::vector<double> others;
        if (opts.perfect_knowledge) {
          for (int j = 0; j < n; ++j)
            if (j != i) others.push_back(world.positions[j]);
        } else {
          for (const auto& [id, pos] : visible_positions(tables[i])) others.push_back(pos);
        }
        hist[i].push(build_state(world.positions[i], others, prev_action[i], k, vpd_params,
                                 scenario.highway_length));
      }
      std::vector<Mat<Scalar>> seq(net->cfg.history_len);
      for (int s = 0; s < net->cfg.history_len; ++s) seq[s].resize(n, net->cfg.input_size);
      for (int i = 0; i < n; ++i) {
        Mat<Scalar> w = detail::history_matrix<Scalar>(hist[i]);
        for (int s = 0; s < net->cfg.history_len; ++s) seq[s].row(i) = w.row(s);
      }
      Mat<Scalar> q = net->forward(seq);
      for (int i = 0; i < n; ++i) {
        actions[i] = argmax_lowest(q, i);
        prev_action[i] = actions[i];
      }
    } else if (policy == Policy::sps) {
      for (int i = 0; i < n; ++i) actions[i] = maybe_reselect(sps_states[i], sps_params, policy_rng);
    } else {
      for (int i = 0; i < n; ++i) actions[i] = random_select(k, policy_rng);
    }

    // Snapshot tables before this slot's transmissions.
    std::vector<CamPayload> payloads;
    if (policy == Policy::diral && !opts.perfect_knowledge) {
      payloads.reserve(n);
      for (int i = 0; i < n; ++i) payloads.push_back(prepare_cam(tables[i], world.positions[i]));
    }

    TransmissionOutcome outcome =
        evaluate_slot(actions, world, channel, scenario.highway_length, channel_rng);

    for (int tx = 0; tx < n; ++tx) {
      PrrResult r = prr(tx, outcome, world, scenario.comm_range, scenario.highway_length);
      if (r.isolated) ++report.isolated_transmissions;
      if (opts.keep_samples) report.per_tx_prr.push_back(r.value);
      ++report.transmissions;
      window_sum += r.value;
      if (++window_count == opts.window_transmissions) {
        report.window_means.push_back(window_sum / window_count);
        window_sum = 0.0;
        window_count = 0;
      }
      for (int j = 0; j < n; ++j) {
        if (j == tx) continue;
        double d = wrap_distance(world.positions[tx], world.positions[j],
                                 scenario.highway_length);
        if (d > scenario.comm_range) continue;
        int bin = std::min(static_cast<int>(d / dist_bin_width), opts.distance_bins - 1);
        dist_sum[bin] += outcome.decoded(j, tx) ? 1.0 : 0.0;
        ++dist_cnt[bin];
      }
    }

    if (policy == Policy::diral && !opts.perfect_knowledge) {
      for (int rx = 0; rx < n; ++rx)
        for (int tx = 0; tx < n; ++tx)
          if (tx != rx && outcome.decoded(rx, tx)) merge_tables(tables[rx], payloads[tx]);
    }

    if (policy == Policy::sps) {
      for (int i = 0; i < n; ++i)
        sense(sps_states[i],
              observe_rssi(i, actions, world, channel, scenario.highway_length, k), sps_params);
    }

    std::vector<int> sorted_actions = actions;
    std::sort(sorted_actions.begin(), sorted_actions.end());
    if (std::adjacent_find(sorted_actions.begin(), sorted_actions.end()) !=
        sorted_actions.end())
      ++collision_steps;

    world = step_mobility(world, scenario, world_rng);
    if (scenario.mobility_kind == MobilityKind::wrap_around_random_velocity &&
        (t + 1) % 25 == 0)
      episode_velocity_update(world, scenario, world_rng);
    ++report.steps;
  }

  double total = 0.0;
  long cnt = 0;
  if (opts.keep_samples) {
    for (double v : report.per_tx_prr) total += v;
    cnt = static_cast<long>(report.per_tx_prr.size());
  } else {
    for (double w : report.window_means) total += w * opts.window_transmissions;
    cnt = static_cast<long>(report.window_means.size()) * opts.window_transmissions;
    total += window_sum;
    cnt += window_count;
  }
  report.mean_prr = cnt > 0 ? total / cnt : 0.0;
  std::vector<double> sorted = report.window_means;
  std::sort(sorted.begin(), sorted.end());
  report.median_prr = detail::quantile_sorted(sorted, 0.5);
  report.q1_prr = detail::quantile_sorted(sorted, 0.25);
  report.q3_prr = detail::quantile_sorted(sorted, 0.75);
  report.collision_rate =
      report.steps > 0 ? static_cast<double>(collision_steps) / report.steps : 0.0;
  report.by_distance.resize(opts.distance_bins);
  for (int b = 0; b < opts.distance_bins; ++b) {
    report.by_distance[b] = DistanceBin{b * dist_bin_width, (b + 1) * dist_bin_width,
                                        dist_cnt[b] > 0 ? dist_sum[b] / dist_cnt[b] : 0.0,
                                        dist_cnt[b]};
  }
  return report;
}

// --- CSV emission -----------------------------------------------------------

inline void write_prr_windows_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write: " + path);
  out << "window_index,mean_prr\n";
  for (size_t i = 0; i < report.window_means.size(); ++i)
    out << i << "," << detail::fmt(report.window_means[i]) << "\n";
}

inline void write_prr_by_distance_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write: " + path);
  out << "bin_low_m,bin_high_m,mean_prr,samples\n";
  for (const auto& b : report.by_distance)
    out << detail::fmt(b.lo) << "," << detail::fmt(b.hi) << "," << detail::fmt(b.mean_prr) << ","
        << b.samples << "\n";
}

inline void write_learning_curve_csv(const std::string& path,
                                     const std::vector<EpisodeStats>& curve) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write: " + path);
  out << "episode,epsilon,mean_base_reward_sum,loss\n";
  for (const auto& e : curve)
    out << e.episode << "," << detail::fmt(e.epsilon) << ","
        << detail::fmt(e.mean_base_reward_sum) << "," << detail::fmt(e.loss) << "\n";
}

inline void write_eval_summary_csv(const std::string& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write: " + path);
  out << "mean_prr,median_prr,q1_prr,q3_prr,collision_rate,windows,transmissions,"
         "isolated_transmissions\n";
  out << detail::fmt(r.mean_prr) << "," << detail::fmt(r.median_prr) << ","
      << detail::fmt(r.q1_prr) << "," << detail::fmt(r.q3_prr) << ","
      << detail::fmt(r.collision_rate) << "," << r.window_means.size() << ","
      << r.transmissions << "," << r.isolated_transmissions << "\n";
}

// Defaults matching the built-in scenarios: the toy ring observes with B=40
// and the farthest-pair-neutral reward; the large scenarios use B=100 and
// the standard reward. The observation radius tracks the highway length.
inline VpdParams default_vpd_for_scenario(int id, const ScenarioConfig& cfg) {
  VpdParams p;
  p.bins = id == 1 ? 40 : 100;
  p.radius = cfg.highway_length;
  return p;
}

inline RewardParams default_reward_for_scenario(int id, const ScenarioConfig& cfg) {
  RewardParams p;
  p.r_reuse = cfg.r_reuse;
  p.variant = id <= 2 ? RewardVariant::toy_neutral_farthest : RewardVariant::standard;
  return p;
}

// --- sweeps ------------------------------------------------------------------

enum class SweepAxis { bins, policy, scenario, arch };

inline SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "bins") return SweepAxis::bins;
  if (s == "policy") return SweepAxis::policy;
  if (s == "scenario") return SweepAxis::scenario;
  if (s == "arch") return SweepAxis::arch;
  throw ConfigError("unknown sweep axis: " + s);
}

struct SweepSetup {
  int scenario_id = 1;
  ScenarioConfig scenario;
  ChannelParams channel;
  VpdParams vpd;
  RewardParams reward;
  TrainConfig train;
  SpsParams sps;
  EvalOptions eval;
  std::uint64_t seed = 1;
  const QNetwork<Scalar>* net = nullptr;  // for policy/scenario sweeps with diral
};

// One independent seeded run per value. Training axes (bins, arch) emit a
// learning curve per value; evaluation axes (policy, scenario) emit an eval
// summary per value. `out_dir` must exist.
inline void sweep(SweepAxis axis, const std::vector<std::string>& values, SweepSetup setup,
                  const std::string& out_dir) {
  std::ofstream summary(out_dir + "/sweep_summary.csv");
  if (!summary) throw ConfigError("cannot write sweep summary in: " + out_dir);
  const bool training_axis = axis == SweepAxis::bins || axis == SweepAxis::arch;
  if (training_axis)
    summary << "value,episodes,final_mean_base_reward_sum\n";
  else
    summary << "value,mean_prr,median_prr,collision_rate\n";

  for (const std::string& v : values) {
    SweepSetup s = setup;
    if (axis == SweepAxis::bins) {
      s.vpd.bins = std::stoi(v);
    } else if (axis == SweepAxis::arch) {
      s.train.arch = v == "fnn" ? NetArch::fnn : NetArch::lstm;
      if (s.train.arch == NetArch::fnn) s.train.history_len = 1;
    } else if (axis == SweepAxis::scenario) {
      s.scenario_id = std::stoi(v);
      s.scenario = build_scenario(s.scenario_id);
      s.vpd = default_vpd_for_scenario(s.scenario_id, s.scenario);
      s.reward = default_reward_for_scenario(s.scenario_id, s.scenario);
    }
    if (training_axis) {
      TrainOutput out =
          run_training(s.scenario, s.vpd, s.reward, s.train, s.seed);
      write_learning_curve_csv(out_dir + "/learning_curve_" + v + ".csv", out.curve);
      double final_reward = 0.0;
      if (!out.curve.empty()) {
        // mean over the last up-to-100 episodes
        size_t from = out.curve.size() > 100 ? out.curve.size() - 100 : 0;
        for (size_t i = from; i < out.curve.size(); ++i)
          final_reward += out.curve[i].mean_base_reward_sum;
        final_reward /= static_cast<double>(out.curve.size() - from);
      }
      summary << v << "," << out.episodes_run << "," << detail::fmt(final_reward) << "\n";
    } else {
      Policy p = axis == SweepAxis::policy ? policy_from_string(v) : Policy::diral;
      EvalReport r = run_eval(p, s.scenario, s.channel, s.vpd, s.sps, s.net, s.eval, s.seed);
      write_prr_windows_csv(out_dir + "/prr_windows_" + v + ".csv", r);
      write_prr_by_distance_csv(out_dir + "/prr_by_distance_" + v + ".csv", r);
      summary << v << "," << detail::fmt(r.mean_prr) << "," << detail::fmt(r.median_prr) << ","
              << detail::fmt(r.collision_rate) << "\n";
    }
  }
}

// Runs the neighbor protocol for `steps` slots under a random-scheduling
// traffic pattern and writes every vehicle's table as CSV.
inline void dump_tables_csv(const std::string& path, const ScenarioConfig& scenario,
                            const ChannelParams& channel_in, long steps, std::uint64_t seed) {
  scenario.validate();
  ChannelParams channel = channel_in;
  channel.comm_range = scenario.comm_range;
  Rng world_rng = Rng::fork(seed, 0);
  Rng channel_rng = Rng::fork(seed, 1);
  Rng policy_rng = Rng::fork(seed, 2);
  WorldState world = init_world(scenario, world_rng);
  std::vector<NeighborTable> tables;
  for (int i = 0; i < scenario.n_vehicles; ++i)
    tables.push_back(NeighborTable::make(i, world.positions[i]));
  for (long t = 0; t < steps; ++t) {
    ResourceAssignment actions(scenario.n_vehicles);
    for (auto& a : actions) a = random_select(scenario.n_resources, policy_rng);
    std::vector<CamPayload> payloads;
    for (int i = 0; i < scenario.n_vehicles; ++i)
      payloads.push_back(prepare_cam(tables[i], world.positions[i]));
    TransmissionOutcome outcome =
        evaluate_slot(actions, world, channel, scenario.highway_length, channel_rng);
    for (int rx = 0; rx < scenario.n_vehicles; ++rx)
      for (int tx = 0; tx < scenario.n_vehicles; ++tx)
        if (tx != rx && outcome.decoded(rx, tx)) merge_tables(tables[rx], payloads[tx]);
    world = step_mobility(world, scenario, world_rng);
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write: " + path);
  out << "owner,vehicle_id,position,seq,last_update\n";
  for (const auto& table : tables)
    for (const auto& [id, e] : table.entries)
      out << table.owner << "," << id << "," << detail::fmt(e.position) << "," << e.seq << ","
          << e.last_update << "\n";
}

}  // namespace diral
