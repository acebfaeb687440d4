#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "diral/config.hpp"
#include "diral/rng.hpp"

namespace diral {

enum class MobilityKind { wrap_around_fixed, wrap_around_perturbed, wrap_around_random_velocity };

inline double kmph_to_mps(double v) { return v / 3.6; }

// One CAM-period-per-step highway world: a ring road of given length with
// every vehicle broadcasting once per period on one of K slot resources.
struct ScenarioConfig {
  int n_vehicles = 4;
  int n_resources = 3;
  double highway_length = 100.0;  // meters
  MobilityKind mobility_kind = MobilityKind::wrap_around_fixed;
  std::vector<double> velocities;    // m/s, one per vehicle (wrap_around_fixed)
  double mean_speed = kmph_to_mps(35.0);  // m/s (perturbed / random-velocity kinds)
  double speed_jitter_std = 0.5;          // m/s (wrap_around_perturbed)
  double r_reuse = 250.0;    // meters
  double comm_range = 150.0; // meters
  double cam_period = 0.1;   // seconds
  std::uint64_t seed = 1;

  void validate() const {
    if (n_vehicles < 1) throw ConfigError("scenario: n_vehicles must be >= 1");
    if (n_resources < 1) throw ConfigError("scenario: n_resources must be >= 1");
    if (highway_length <= 0) throw ConfigError("scenario: highway_length must be > 0");
    if (comm_range <= 0) throw ConfigError("scenario: comm_range must be > 0");
    if (cam_period <= 0) throw ConfigError("scenario: cam_period must be > 0");
    if (mobility_kind == MobilityKind::wrap_around_fixed &&
        static_cast<int>(velocities.size()) != n_vehicles)
      throw ConfigError("scenario: fixed mobility needs one velocity per vehicle");
  }
};

struct WorldState {
  long t = 0;                      // step index (one CAM period per step)
  std::vector<double> positions;   // meters on [0, highway_length)
  std::vector<double> velocities;  // m/s
};

// Signed shortest displacement from `from` to `to` on the ring, in
// (-length/2, length/2].
inline double wrap_delta(double from, double to, double length) {
  double d = std::fmod(to - from, length);
  if (d > length / 2.0) d -= length;
  if (d <= -length / 2.0) d += length;
  return d;
}

inline double wrap_distance(double a, double b, double length) {
  return std::abs(wrap_delta(a, b, length));
}

inline MobilityKind mobility_kind_from_string(const std::string& s) {
  if (s == "wrap_around_fixed") return MobilityKind::wrap_around_fixed;
  if (s == "wrap_around_perturbed") return MobilityKind::wrap_around_perturbed;
  if (s == "wrap_around_random_velocity") return MobilityKind::wrap_around_random_velocity;
  throw ConfigError("unknown mobility_kind: " + s);
}

inline std::string to_string(MobilityKind k) {
  switch (k) {
    case MobilityKind::wrap_around_fixed: return "wrap_around_fixed";
    case MobilityKind::wrap_around_perturbed: return "wrap_around_perturbed";
    case MobilityKind::wrap_around_random_velocity: return "wrap_around_random_velocity";
  }
  return "?";
}

// Built-in evaluation scenarios 1..5. Scenario 1 is the 4-vehicle toy ring;
// 2-5 replace the original SUMO traces with perturbed wrap-around mobility
// at ~35 km/h mean speed.
inline ScenarioConfig build_scenario(int id) {
  ScenarioConfig cfg;
  switch (id) {
    case 1:
      cfg.n_vehicles = 4;
      cfg.n_resources = 3;
      cfg.highway_length = 100.0;
      cfg.mobility_kind = MobilityKind::wrap_around_fixed;
      cfg.velocities = {kmph_to_mps(18), kmph_to_mps(36), kmph_to_mps(45), kmph_to_mps(54)};
      break;
    case 2:
      cfg.n_vehicles = 6;
      cfg.n_resources = 5;
      cfg.highway_length = 250.0;
      cfg.mobility_kind = MobilityKind::wrap_around_perturbed;
      break;
    case 3:
      cfg.n_vehicles = 8;
      cfg.n_resources = 10;
      cfg.highway_length = 500.0;
      cfg.mobility_kind = MobilityKind::wrap_around_perturbed;
      break;
    case 4:
      cfg.n_vehicles = 10;
      cfg.n_resources = 10;
      cfg.highway_length = 500.0;
      cfg.mobility_kind = MobilityKind::wrap_around_perturbed;
      break;
    case 5:
      cfg.n_vehicles = 12;
      cfg.n_resources = 10;
      cfg.highway_length = 500.0;
      cfg.mobility_kind = MobilityKind::wrap_around_perturbed;
      break;
    default:
      throw ConfigError("unknown scenario id: " + std::to_string(id));
  }
  cfg.validate();
  return cfg;
}

// Initial placement is uniform at random along the highway (seeded).
inline WorldState init_world(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  WorldState w;
  w.t = 0;
  w.positions.resize(cfg.n_vehicles);
  w.velocities.resize(cfg.n_vehicles);
  for (int i = 0; i < cfg.n_vehicles; ++i) w.positions[i] = rng.uniform(0.0, cfg.highway_length);
  switch (cfg.mobility_kind) {
    case MobilityKind::wrap_around_fixed:
      w.velocities = cfg.velocities;
      break;
    case MobilityKind::wrap_around_perturbed:
      std::fill(w.velocities.begin(), w.velocities.end(), cfg.mean_speed);
      break;
    case MobilityKind::wrap_around_random_velocity:
      // Velocity lives on [0.8, 1.4] m/step.
      for (int i = 0; i < cfg.n_vehicles; ++i)
        w.velocities[i] = rng.uniform(0.8, 1.4) / cfg.cam_period;
      break;
  }
  return w;
}

// Advances every vehicle by one CAM period, wrapping on the ring. Perturbed
// mobility redraws each speed around the mean before moving.
inline WorldState step_mobility(const WorldState& state, const ScenarioConfig& cfg, Rng& rng) {
  WorldState next = state;
  next.t = state.t + 1;
  if (cfg.mobility_kind == MobilityKind::wrap_around_perturbed) {
    for (int i = 0; i < cfg.n_vehicles; ++i) {
      double v = cfg.mean_speed + rng.normal(0.0, cfg.speed_jitter_std);
      next.velocities[i] = std::clamp(v, 0.5 * cfg.mean_speed, 1.5 * cfg.mean_speed);
    }
  }
  for (int i = 0; i < cfg.n_vehicles; ++i) {
    double p = std::fmod(state.positions[i] + next.velocities[i] * cfg.cam_period,
                         cfg.highway_length);
    if (p < 0) p += cfg.highway_length;
    // fmod can return exactly highway_length after rounding
    if (p >= cfg.highway_length) p = 0.0;
    next.positions[i] = p;
  }
  return next;
}

// Random-velocity variant: at each episode boundary every vehicle either
// accelerates or decelerates by 0.1 m/step, clamped to [0.8, 1.4] m/step.
inline void episode_velocity_update(WorldState& state, const ScenarioConfig& cfg, Rng& rng) {
  if (cfg.mobility_kind != MobilityKind::wrap_around_random_velocity) return;
  for (auto& v : state.velocities) {
    double step = v * cfg.cam_period;
    double delta = rng.uniform01() < 0.5 ? 0.1 : -0.1;
    step = std::clamp(step + delta, 0.8, 1.4);
    v = step / cfg.cam_period;
  }
}

// Applies flat config-file overrides. Bare keys and a `scenario.` prefix are
// both accepted.
inline void apply_config(ScenarioConfig& cfg, const KeyValueConfig& kv) {
  auto key = [&](const char* name) -> std::string {
    std::string pref = std::string("scenario.") + name;
    return kv.has(pref) ? pref : std::string(name);
  };
  cfg.n_vehicles = kv.get_int(key("n_vehicles"), cfg.n_vehicles);
  cfg.n_resources = kv.get_int(key("n_resources"), cfg.n_resources);
  cfg.highway_length = kv.get_double(key("highway_length"), cfg.highway_length);
  if (kv.has(key("mobility_kind")))
    cfg.mobility_kind = mobility_kind_from_string(kv.get_string(key("mobility_kind"), ""));
  cfg.velocities = kv.get_double_list(key("velocities"), cfg.velocities);
  cfg.mean_speed = kv.get_double(key("mean_speed"), cfg.mean_speed);
  cfg.speed_jitter_std = kv.get_double(key("speed_jitter_std"), cfg.speed_jitter_std);
  cfg.r_reuse = kv.get_double(key("r_reuse"), cfg.r_reuse);
  cfg.comm_range = kv.get_double(key("comm_range"), cfg.comm_range);
  cfg.cam_period = kv.get_double(key("cam_period"), cfg.cam_period);
  cfg.seed = static_cast<std::uint64_t>(kv.get_long(key("seed"), static_cast<long>(cfg.seed)));
}

}  // namespace diral
