#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "diral/config.hpp"
#include "diral/rng.hpp"
#include "diral/scenario.hpp"

namespace diral {

// One resource index per vehicle for one CAM period (0-based).
using ResourceAssignment = std::vector<int>;

enum class BlerMode { threshold, sigmoid };
enum class ChannelMode { sinr, range_based };

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double lin_to_db(double lin) { return 10.0 * std::log10(lin); }

struct ChannelParams {
  double tx_power_dbm = 23.0;
  double noise_power_dbm = -95.0;
  double pathloss_exponent = 3.0;
  double reference_distance = 1.0;  // meters
  BlerMode bler_mode = BlerMode::threshold;
  double sinr_threshold_db = 5.0;   // threshold mode
  double sigmoid_midpoint_db = 5.0; // sigmoid mode
  double sigmoid_slope = 1.0;       // 1/dB, > 0
  ChannelMode channel_mode = ChannelMode::sinr;
  double comm_range = 150.0;        // meters, kept in sync with the scenario

  void validate() const {
    if (pathloss_exponent <= 0) throw ConfigError("channel: pathloss_exponent must be > 0");
    if (reference_distance <= 0) throw ConfigError("channel: reference_distance must be > 0");
    if (sigmoid_slope <= 0) throw ConfigError("channel: sigmoid_slope must be > 0");
  }
};

// Per (receiver, transmitter) decode outcome for one slot. sinr_db is NaN
// where no SINR was evaluated (half-duplex, same vehicle, range mode).
struct TransmissionOutcome {
  int n = 0;
  std::vector<char> decoded_;   // n*n, row = receiver
  std::vector<double> sinr_db_; // n*n

  explicit TransmissionOutcome(int n_vehicles)
      : n(n_vehicles),
        decoded_(static_cast<size_t>(n_vehicles) * n_vehicles, 0),
        sinr_db_(static_cast<size_t>(n_vehicles) * n_vehicles,
                 std::numeric_limits<double>::quiet_NaN()) {}

  bool decoded(int receiver, int transmitter) const {
    return decoded_[static_cast<size_t>(receiver) * n + transmitter] != 0;
  }
  void set_decoded(int receiver, int transmitter, bool v) {
    decoded_[static_cast<size_t>(receiver) * n + transmitter] = v ? 1 : 0;
  }
  double sinr_db(int receiver, int transmitter) const {
    return sinr_db_[static_cast<size_t>(receiver) * n + transmitter];
  }
  void set_sinr_db(int receiver, int transmitter, double v) {
    sinr_db_[static_cast<size_t>(receiver) * n + transmitter] = v;
  }
};

// Log-distance path loss, clamped at the reference distance.
inline double channel_gain(double distance, const ChannelParams& params) {
  double d = std::max(distance, params.reference_distance);
  return std::pow(d / params.reference_distance, -params.pathloss_exponent);
}

// Linear SINR of transmitter's packet at the receiver, interference summed
// over all other vehicles sharing the transmitter's resource. nullopt when
// the receiver transmits on that same resource (half-duplex).
inline std::optional<double> sinr(int receiver, int transmitter,
                                  const ResourceAssignment& assignment, const WorldState& state,
                                  const ChannelParams& params, double highway_length) {
  if (assignment[receiver] == assignment[transmitter]) return std::nullopt;
  double p_mw = dbm_to_mw(params.tx_power_dbm);
  double noise_mw = dbm_to_mw(params.noise_power_dbm);
  double d = wrap_distance(state.positions[transmitter], state.positions[receiver],
                           highway_length);
  double signal = p_mw * channel_gain(d, params);
  double interference = 0.0;
  for (int k = 0; k < static_cast<int>(assignment.size()); ++k) {
    if (k == transmitter || assignment[k] != assignment[transmitter]) continue;
    double dk = wrap_distance(state.positions[k], state.positions[receiver], highway_length);
    interference += p_mw * channel_gain(dk, params);
  }
  return signal / (noise_mw + interference);
}

// Block error probability for a linear SINR.
inline double p_err(double gamma, const ChannelParams& params) {
  double gamma_db = gamma > 0 ? lin_to_db(gamma) : -std::numeric_limits<double>::infinity();
  if (params.bler_mode == BlerMode::threshold)
    return gamma_db >= params.sinr_threshold_db ? 0.0 : 1.0;
  return 1.0 / (1.0 + std::exp(params.sigmoid_slope * (gamma_db - params.sigmoid_midpoint_db)));
}

// Resolves every (receiver, transmitter) decode decision for one slot.
//
// sinr mode: per receiver and per resource it does not transmit on, only the
// highest-SINR transmitter is decode-tested via P_err(gamma) <= X, X~U[0,1];
// any co-channel transmitter fails at that receiver.
//
// range_based mode (training channel): a packet is decoded iff its sender is
// the nearest same-resource transmitter within comm_range of the receiver.
inline TransmissionOutcome evaluate_slot(const ResourceAssignment& assignment,
                                         const WorldState& state, const ChannelParams& params,
                                         double highway_length, Rng& rng) {
  const int n = static_cast<int>(assignment.size());
  const int max_res = *std::max_element(assignment.begin(), assignment.end());
  TransmissionOutcome out(n);
  for (int rx = 0; rx < n; ++rx) {
    for (int res = 0; res <= max_res; ++res) {
      if (res == assignment[rx]) continue;  // half-duplex: deaf on own slot
      int best = -1;
      if (params.channel_mode == ChannelMode::sinr) {
        double best_gamma = -1.0;
        for (int tx = 0; tx < n; ++tx) {
          if (tx == rx || assignment[tx] != res) continue;
          double g = *sinr(rx, tx, assignment, state, params, highway_length);
          out.set_sinr_db(rx, tx, g > 0 ? lin_to_db(g) : -std::numeric_limits<double>::infinity());
          if (g > best_gamma) {
            best_gamma = g;
            best = tx;
          }
        }
        if (best >= 0) {
          double x = rng.uniform01();
          out.set_decoded(rx, best, p_err(best_gamma, params) <= x);
        }
      } else {
        double best_d = std::numeric_limits<double>::infinity();
        for (int tx = 0; tx < n; ++tx) {
          if (tx == rx || assignment[tx] != res) continue;
          double d = wrap_distance(state.positions[tx], state.positions[rx], highway_length);
          if (d < best_d) {
            best_d = d;
            best = tx;
          }
        }
        if (best >= 0 && best_d <= params.comm_range) out.set_decoded(rx, best, true);
      }
    }
  }
  return out;
}

struct PrrResult {
  double value = 1.0;
  bool isolated = false;  // transmitter had no neighbors; value is the sentinel 1.0
};

// Packet reception ratio of one transmitter: decoded neighbors over the
// neighbor count (vehicles within comm_range).
inline PrrResult prr(int transmitter, const TransmissionOutcome& outcome, const WorldState& state,
                     double comm_range, double highway_length) {
  int neighbors = 0;
  int decoded = 0;
  for (int j = 0; j < outcome.n; ++j) {
    if (j == transmitter) continue;
    if (wrap_distance(state.positions[transmitter], state.positions[j], highway_length) >
        comm_range)
      continue;
    ++neighbors;
    if (outcome.decoded(j, transmitter)) ++decoded;
  }
  if (neighbors == 0) return {1.0, true};
  return {static_cast<double>(decoded) / neighbors, false};
}

inline BlerMode bler_mode_from_string(const std::string& s) {
  if (s == "threshold") return BlerMode::threshold;
  if (s == "sigmoid") return BlerMode::sigmoid;
  throw ConfigError("unknown bler_mode: " + s);
}

inline ChannelMode channel_mode_from_string(const std::string& s) {
  if (s == "sinr") return ChannelMode::sinr;
  if (s == "range_based") return ChannelMode::range_based;
  throw ConfigError("unknown channel_mode: " + s);
}

inline void apply_config(ChannelParams& p, const KeyValueConfig& kv) {
  p.tx_power_dbm = kv.get_double("channel.tx_power", p.tx_power_dbm);
  p.noise_power_dbm = kv.get_double("channel.noise_power", p.noise_power_dbm);
  p.pathloss_exponent = kv.get_double("channel.pathloss_exponent", p.pathloss_exponent);
  p.reference_distance = kv.get_double("channel.reference_distance", p.reference_distance);
  if (kv.has("channel.bler_mode"))
    p.bler_mode = bler_mode_from_string(kv.get_string("channel.bler_mode", ""));
  p.sinr_threshold_db = kv.get_double("channel.sinr_threshold", p.sinr_threshold_db);
  p.sigmoid_midpoint_db = kv.get_double("channel.sigmoid_midpoint", p.sigmoid_midpoint_db);
  p.sigmoid_slope = kv.get_double("channel.sigmoid_slope", p.sigmoid_slope);
  if (kv.has("channel.channel_mode"))
    p.channel_mode = channel_mode_from_string(kv.get_string("channel.channel_mode", ""));
  p.validate();
}

}  // namespace diral
