// Command line front-end: train, eval, sweep and dump-tables subcommands.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "diral/harness.hpp"

namespace fs = std::filesystem;
using namespace diral;

namespace {

struct CommonArgs {
  int scenario_id = 1;
  std::string config_path;
  std::uint64_t seed = 1;
  int bins = -1;
  double radius = -1;
  int history_len = -1;
};

struct Loaded {
  int scenario_id;
  ScenarioConfig scenario;
  ChannelParams channel;
  VpdParams vpd;
  RewardParams reward;
  TrainConfig train;
  SpsParams sps;
  KeyValueConfig kv;
  bool perfect_knowledge = false;
};

Loaded load(const CommonArgs& args) {
  Loaded out;
  out.scenario_id = args.scenario_id;
  out.scenario = build_scenario(args.scenario_id);
  if (!args.config_path.empty()) out.kv = KeyValueConfig::from_file(args.config_path);
  apply_config(out.scenario, out.kv);
  out.scenario.seed = args.seed;
  apply_config(out.channel, out.kv);
  out.channel.comm_range = out.scenario.comm_range;
  out.vpd = default_vpd_for_scenario(args.scenario_id, out.scenario);
  apply_config(out.vpd, out.kv);
  if (args.bins > 0) out.vpd.bins = args.bins;
  if (args.radius > 0) out.vpd.radius = args.radius;
  out.reward = default_reward_for_scenario(args.scenario_id, out.scenario);
  apply_config(out.reward, out.kv);
  apply_config(out.train, out.kv);
  if (args.history_len > 0) out.train.history_len = args.history_len;
  out.sps.apply(out.kv);
  out.perfect_knowledge = out.kv.get_bool("perfect_knowledge", false);
  return out;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed V2V resource selection simulator"};
  app.require_subcommand(1);

  CommonArgs args;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", args.scenario_id, "Built-in scenario id (1..5)")
        ->check(CLI::Range(1, 5));
    cmd->add_option("--config", args.config_path, "key=value config file overriding defaults");
    cmd->add_option("--seed", args.seed, "Random seed");
    cmd->add_option("--bins", args.bins, "Positional distribution bins B");
    cmd->add_option("--radius", args.radius, "Observation radius R, meters");
    cmd->add_option("--history-len", args.history_len, "Observation history length L");
  };

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the shared DIRAL Q-network");
  add_common(train_cmd);
  std::string out_dir = "out";
  std::string arch = "";
  long timesteps = -1;
  std::string load_path;
  train_cmd->add_option("--out", out_dir, "Output directory");
  train_cmd->add_option("--arch", arch, "Network kind: lstm or fnn");
  train_cmd->add_option("--timesteps", timesteps, "Total environment steps");
  train_cmd->add_option("--load", load_path, "Warm-start from an existing checkpoint");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a policy and emit PRR reports");
  add_common(eval_cmd);
  std::string policy_name = "diral";
  std::string checkpoint_path;
  double duration = 200.0;
  bool perfect = false;
  eval_cmd->add_option("--policy", policy_name, "diral, sps or random");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint (diral policy)");
  eval_cmd->add_option("--duration", duration, "Simulated seconds");
  eval_cmd->add_option("--out", out_dir, "Output directory");
  eval_cmd->add_flag("--perfect-knowledge", perfect,
                     "Feed true positions instead of the neighbor protocol");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run one seeded run per value of an axis");
  add_common(sweep_cmd);
  std::string axis_name = "bins";
  std::string values_csv;
  sweep_cmd->add_option("--axis", axis_name, "bins, policy, scenario or arch")->required();
  sweep_cmd->add_option("--values", values_csv, "Comma-separated values")->required();
  sweep_cmd->add_option("--out", out_dir, "Output directory");
  sweep_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint for diral evaluation axes");
  sweep_cmd->add_option("--duration", duration, "Simulated seconds (evaluation axes)");

  // dump-tables
  auto* dump_cmd = app.add_subcommand("dump-tables", "Run the neighbor protocol and dump tables");
  add_common(dump_cmd);
  long dump_steps = 100;
  std::string dump_out = "tables.csv";
  dump_cmd->add_option("--steps", dump_steps, "Slots to simulate before dumping");
  dump_cmd->add_option("--out", dump_out, "Output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    Loaded cfg = load(args);

    if (*train_cmd) {
      if (!arch.empty()) {
        cfg.train.arch = arch == "fnn" ? NetArch::fnn : NetArch::lstm;
        if (cfg.train.arch == NetArch::fnn && args.history_len <= 0) cfg.train.history_len = 1;
      }
      if (timesteps > 0) cfg.train.total_timesteps = timesteps;
      fs::create_directories(out_dir);
      QNetwork<Scalar> warm, warm_target;
      const QNetwork<Scalar>* warm_ptr = nullptr;
      if (!load_path.empty()) {
        CheckpointMeta meta = load_checkpoint(load_path, warm, warm_target);
        cfg.vpd.bins = meta.bins;
        cfg.vpd.radius = meta.radius;
        warm_ptr = &warm;
      }
      TrainOutput out =
          run_training(cfg.scenario, cfg.vpd, cfg.reward, cfg.train, args.seed, {}, warm_ptr);
      save_checkpoint(out_dir + "/checkpoint.bin", out.meta, out.eval_net, out.target_net);
      write_learning_curve_csv(out_dir + "/learning_curve.csv", out.curve);
      std::cout << "trained " << out.episodes_run << " episodes -> " << out_dir << "\n";
    } else if (*eval_cmd) {
      Policy policy = policy_from_string(policy_name);
      QNetwork<Scalar> net, target;
      if (policy == Policy::diral) {
        if (checkpoint_path.empty()) throw ConfigError("eval: --checkpoint required for diral");
        CheckpointMeta meta = load_checkpoint(checkpoint_path, net, target);
        cfg.vpd.bins = meta.bins;
        cfg.vpd.radius = meta.radius;
      }
      EvalOptions opts;
      opts.duration_s = duration;
      opts.perfect_knowledge = perfect || cfg.perfect_knowledge;
      fs::create_directories(out_dir);
      EvalReport report =
          run_eval(policy, cfg.scenario, cfg.channel, cfg.vpd, cfg.sps,
                   policy == Policy::diral ? &net : nullptr, opts, args.seed);
      write_prr_windows_csv(out_dir + "/prr_windows.csv", report);
      write_prr_by_distance_csv(out_dir + "/prr_by_distance.csv", report);
      write_eval_summary_csv(out_dir + "/eval_summary.csv", report);
      std::cout << "policy=" << to_string(policy) << " mean_prr=" << report.mean_prr
                << " collision_rate=" << report.collision_rate << "\n";
    } else if (*sweep_cmd) {
      SweepSetup setup;
      setup.scenario_id = cfg.scenario_id;
      setup.scenario = cfg.scenario;
      setup.channel = cfg.channel;
      setup.vpd = cfg.vpd;
      setup.reward = cfg.reward;
      setup.train = cfg.train;
      setup.sps = cfg.sps;
      setup.eval.duration_s = duration;
      setup.seed = args.seed;
      QNetwork<Scalar> net, target;
      if (!checkpoint_path.empty()) {
        load_checkpoint(checkpoint_path, net, target);
        setup.net = &net;
      }
      fs::create_directories(out_dir);
      sweep(sweep_axis_from_string(axis_name), split_csv(values_csv), setup, out_dir);
      std::cout << "sweep written to " << out_dir << "\n";
    } else if (*dump_cmd) {
      dump_tables_csv(dump_out, cfg.scenario, cfg.channel, dump_steps, args.seed);
      std::cout << "tables written to " << dump_out << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
