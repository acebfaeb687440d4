#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include "diral/channel.hpp"
#include "diral/config.hpp"
#include "diral/rng.hpp"

namespace diral {

struct SpsParams {
  int sensing_window = 1000;          // slots
  double base_threshold_dbm = -110.0;
  double keep_probability = 0.8;
  int counter_min = 5;
  int counter_max = 15;               // inclusive
  double pool_fraction = 0.2;         // minimum candidate pool, as a share of K
  bool use_max_rssi = false;          // rank by window max instead of mean

  void apply(const KeyValueConfig& kv) {
    sensing_window = kv.get_int("sps.sensing_window", sensing_window);
    base_threshold_dbm = kv.get_double("sps.base_threshold", base_threshold_dbm);
    keep_probability = kv.get_double("sps.keep_probability", keep_probability);
    counter_min = kv.get_int("sps.counter_min", counter_min);
    counter_max = kv.get_int("sps.counter_max", counter_max);
    pool_fraction = kv.get_double("sps.pool_fraction", pool_fraction);
    use_max_rssi = kv.get_bool("sps.use_max_rssi", use_max_rssi);
  }
};

// Per-vehicle semi-persistent scheduling state: RSSI sensing rings, the
// current resource, and the reselection counter.
struct SpsState {
  std::vector<std::deque<double>> rssi_window;  // per resource, dBm
  int current_resource = -1;
  int reselection_counter = 0;

  explicit SpsState(int n_resources) : rssi_window(n_resources) {}
};

// One RSSI sample per resource; nullopt where the vehicle could not sense
// (its own transmit slot).
inline void sense(SpsState& state, const std::vector<std::optional<double>>& rssi_dbm,
                  const SpsParams& params) {
  for (size_t k = 0; k < state.rssi_window.size(); ++k) {
    if (!rssi_dbm[k]) continue;
    auto& w = state.rssi_window[k];
    w.push_back(*rssi_dbm[k]);
    while (static_cast<int>(w.size()) > params.sensing_window) w.pop_front();
  }
}

// Empty windows rank as quietest (-inf).
inline double expected_rssi(const SpsState& state, int resource, const SpsParams& params) {
  const auto& w = state.rssi_window[resource];
  if (w.empty()) return -std::numeric_limits<double>::infinity();
  if (params.use_max_rssi) {
    double m = w.front();
    for (double v : w) m = std::max(m, v);
    return m;
  }
  double sum = 0.0;
  for (double v : w) sum += v;
  return sum / static_cast<double>(w.size());
}

// Quiet-resource pool selection with 3 dB threshold escalation until the
// pool covers at least pool_fraction of all resources.
inline int select_resource(SpsState& state, const SpsParams& params, Rng& rng) {
  const int k = static_cast<int>(state.rssi_window.size());
  const int min_pool = static_cast<int>(std::ceil(params.pool_fraction * k));
  double threshold = params.base_threshold_dbm;
  std::vector<int> pool;
  while (true) {
    pool.clear();
    for (int r = 0; r < k; ++r)
      if (expected_rssi(state, r, params) < threshold) pool.push_back(r);
    if (static_cast<int>(pool.size()) >= min_pool || static_cast<int>(pool.size()) == k) break;
    threshold += 3.0;
  }
  state.current_resource = pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)];
  state.reselection_counter = rng.uniform_int(params.counter_min, params.counter_max);
  return state.current_resource;
}

// Per-transmission resource decision: ride the counter down, then keep the
// resource with probability keep_probability (redrawing the counter) or
// reselect.
inline int maybe_reselect(SpsState& state, const SpsParams& params, Rng& rng) {
  if (state.current_resource < 0) return select_resource(state, params, rng);
  if (state.reselection_counter > 0) {
    --state.reselection_counter;
    return state.current_resource;
  }
  if (rng.uniform01() < params.keep_probability) {
    state.reselection_counter = rng.uniform_int(params.counter_min, params.counter_max);
    return state.current_resource;
  }
  return select_resource(state, params, rng);
}

inline int random_select(int n_resources, Rng& rng) {
  return rng.uniform_int(0, n_resources - 1);
}

// RSSI observed by `vehicle` on every resource for one slot: noise floor
// plus total received power from all transmitters on that resource; nullopt
// on the vehicle's own transmit resource (half-duplex).
inline std::vector<std::optional<double>> observe_rssi(int vehicle,
                                                       const ResourceAssignment& assignment,
                                                       const WorldState& state,
                                                       const ChannelParams& channel,
                                                       double highway_length, int n_resources) {
  std::vector<std::optional<double>> out(n_resources);
  const double p_mw = dbm_to_mw(channel.tx_power_dbm);
  const double noise_mw = dbm_to_mw(channel.noise_power_dbm);
  for (int r = 0; r < n_resources; ++r) {
    if (r == assignment[vehicle]) continue;
    double total = noise_mw;
    for (int tx = 0; tx < static_cast<int>(assignment.size()); ++tx) {
      if (tx == vehicle || assignment[tx] != r) continue;
      double d = wrap_distance(state.positions[tx], state.positions[vehicle], highway_length);
      total += p_mw * channel_gain(d, channel);
    }
    out[r] = lin_to_db(total);
  }
  return out;
}

}  // namespace diral
