#pragma once

#include <string>
#include <vector>

#include "diral/channel.hpp"
#include "diral/config.hpp"
#include "diral/scenario.hpp"

namespace diral {

enum class RewardVariant { standard, toy_neutral_farthest };

struct RewardParams {
  double r_reuse = 250.0;  // meters
  RewardVariant variant = RewardVariant::standard;

  void validate() const {
    if (r_reuse <= 0) throw ConfigError("reward: r_reuse must be > 0");
  }
};

namespace detail {

inline std::vector<int> sharers(int resource, const ResourceAssignment& assignment) {
  std::vector<int> c;
  for (int i = 0; i < static_cast<int>(assignment.size()); ++i)
    if (assignment[i] == resource) c.push_back(i);
  return c;
}

}  // namespace detail

// Per-agent reward from the joint assignment: +1 for a sole user, 0 for a
// pair re-using a resource beyond r_reuse (-2 otherwise), -N_c for three or
// more sharers.
inline double base_reward(int agent, const ResourceAssignment& assignment,
                          const WorldState& state, const RewardParams& params,
                          double highway_length) {
  auto c = detail::sharers(assignment[agent], assignment);
  const int nc = static_cast<int>(c.size());
  if (nc == 1) return 1.0;
  if (nc == 2) {
    double d = wrap_distance(state.positions[c[0]], state.positions[c[1]], highway_length);
    return d > params.r_reuse ? 0.0 : -2.0;
  }
  return -static_cast<double>(nc);
}

// Toy-scenario variant: a sharing pair is neutral iff it is the
// maximum-distance sharing pair at this step (ties all neutral), regardless
// of r_reuse.
inline double toy_variant_reward(int agent, const ResourceAssignment& assignment,
                                 const WorldState& state, const RewardParams& params,
                                 double highway_length) {
  auto c = detail::sharers(assignment[agent], assignment);
  const int nc = static_cast<int>(c.size());
  if (nc == 1) return 1.0;
  if (nc > 2) return -static_cast<double>(nc);
  double my_dist = wrap_distance(state.positions[c[0]], state.positions[c[1]], highway_length);
  double max_dist = my_dist;
  for (int i = 0; i < static_cast<int>(assignment.size()); ++i) {
    if (assignment[i] == assignment[agent]) continue;
    auto g = detail::sharers(assignment[i], assignment);
    if (g.size() != 2) continue;
    double d = wrap_distance(state.positions[g[0]], state.positions[g[1]], highway_length);
    if (d > max_dist) max_dist = d;
  }
  (void)params;
  return my_dist >= max_dist ? 0.0 : -2.0;
}

inline double agent_reward(int agent, const ResourceAssignment& assignment,
                           const WorldState& state, const RewardParams& params,
                           double highway_length) {
  return params.variant == RewardVariant::toy_neutral_farthest
             ? toy_variant_reward(agent, assignment, state, params, highway_length)
             : base_reward(agent, assignment, state, params, highway_length);
}

inline std::vector<double> reward_vector(const ResourceAssignment& assignment,
                                         const WorldState& state, const RewardParams& params,
                                         double highway_length) {
  std::vector<double> r(assignment.size());
  for (int i = 0; i < static_cast<int>(assignment.size()); ++i)
    r[i] = agent_reward(i, assignment, state, params, highway_length);
  return r;
}

// Adds the mean of all rewards to every agent's reward.
inline std::vector<double> cooperative_rewards(const std::vector<double>& base) {
  double sum = 0.0;
  for (double r : base) sum += r;
  const double mean = sum / static_cast<double>(base.size());
  std::vector<double> out(base.size());
  for (size_t i = 0; i < base.size(); ++i) out[i] = base[i] + mean;
  return out;
}

inline RewardVariant reward_variant_from_string(const std::string& s) {
  if (s == "standard") return RewardVariant::standard;
  if (s == "toy_neutral_farthest") return RewardVariant::toy_neutral_farthest;
  throw ConfigError("unknown reward variant: " + s);
}

inline void apply_config(RewardParams& p, const KeyValueConfig& kv) {
  p.r_reuse = kv.get_double("reward.r_reuse", p.r_reuse);
  if (kv.has("reward.variant"))
    p.variant = reward_variant_from_string(kv.get_string("reward.variant", ""));
  p.validate();
}

}  // namespace diral
