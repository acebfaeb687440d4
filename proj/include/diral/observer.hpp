#pragma once

#include <cmath>
#include <deque>
#include <vector>

#include "diral/config.hpp"
#include "diral/scenario.hpp"

namespace diral {

struct VpdParams {
  int bins = 40;        // B
  double radius = 100;  // R, meters

  void validate() const {
    if (bins < 1) throw ConfigError("observer: bins must be >= 1");
    if (radius <= 0) throw ConfigError("observer: radius must be > 0");
  }
};

// One agent step observation: the B-bin view-based positional distribution
// plus the one-hot of the previous action (all-zero at episode start).
struct VpdObservation {
  std::vector<double> vpd;              // length B, counts
  std::vector<double> prev_action;      // length K, one-hot

  int size() const { return static_cast<int>(vpd.size() + prev_action.size()); }
};

// Ego-centric histogram of the other vehicles' signed ring displacements.
// Bins cover [-R, +R) with width 2R/B; the single point +R lands in the last
// bin; anything beyond the radius is dropped.
inline std::vector<double> vpd(double ego_position, const std::vector<double>& others,
                               const VpdParams& params, double highway_length) {
  params.validate();
  std::vector<double> counts(params.bins, 0.0);
  const double width = 2.0 * params.radius / params.bins;
  for (double p : others) {
    double delta = wrap_delta(ego_position, p, highway_length);
    if (std::abs(delta) > params.radius) continue;
    int bin = static_cast<int>(std::floor((delta + params.radius) / width));
    if (bin < 0) bin = 0;
    if (bin >= params.bins) bin = params.bins - 1;
    counts[bin] += 1.0;
  }
  return counts;
}

// prev_action < 0 means "none" (episode start) and yields an all-zero one-hot.
inline VpdObservation build_state(double ego_position, const std::vector<double>& others,
                                  int prev_action, int n_resources, const VpdParams& params,
                                  double highway_length) {
  VpdObservation obs;
  obs.vpd = vpd(ego_position, others, params, highway_length);
  obs.prev_action.assign(n_resources, 0.0);
  if (prev_action >= 0) obs.prev_action[prev_action] = 1.0;
  return obs;
}

// FIFO of the last L observations, zero-padded before warm-up, oldest first.
class ObservationHistory {
 public:
  ObservationHistory(int length, int bins, int n_resources)
      : length_(length), bins_(bins), n_resources_(n_resources) {
    reset();
  }

  void reset() {
    items_.clear();
    VpdObservation zero;
    zero.vpd.assign(bins_, 0.0);
    zero.prev_action.assign(n_resources_, 0.0);
    for (int i = 0; i < length_; ++i) items_.push_back(zero);
  }

  void push(const VpdObservation& obs) {
    items_.push_back(obs);
    items_.pop_front();
  }

  int length() const { return length_; }
  int obs_size() const { return bins_ + n_resources_; }

  // Oldest to newest.
  const VpdObservation& at(int i) const { return items_[i]; }

  // Row t = observation t (oldest first), flattened vpd ++ prev_action.
  std::vector<double> flat() const {
    std::vector<double> out;
    out.reserve(static_cast<size_t>(length_) * obs_size());
    for (const auto& o : items_) {
      out.insert(out.end(), o.vpd.begin(), o.vpd.end());
      out.insert(out.end(), o.prev_action.begin(), o.prev_action.end());
    }
    return out;
  }

 private:
  int length_;
  int bins_;
  int n_resources_;
  std::deque<VpdObservation> items_;
};

inline void apply_config(VpdParams& p, const KeyValueConfig& kv) {
  p.bins = kv.get_int("observer.bins", p.bins);
  p.radius = kv.get_double("observer.radius", p.radius);
  p.validate();
}

}  // namespace diral
