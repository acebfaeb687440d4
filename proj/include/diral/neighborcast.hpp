#pragma once

#include <map>
#include <utility>
#include <vector>

namespace diral {

// DSDV-style neighbor table entry: a position stamped with the owning
// vehicle's broadcast sequence number, plus a staleness counter ticked by the
// holder's own transmissions.
struct NeighborEntry {
  int vehicle_id = -1;
  double position = 0.0;
  long seq = 0;
  long last_update = 0;
};

// Table snapshot piggybacked on a CAM.
struct CamPayload {
  int sender = -1;
  std::map<int, NeighborEntry> entries;
};

struct NeighborTable {
  int owner = -1;
  std::map<int, NeighborEntry> entries;
  long stale_threshold = 20;  // steps; 2 s at a 100 ms CAM period

  static NeighborTable make(int owner, double own_position, long stale_threshold = 20) {
    NeighborTable t;
    t.owner = owner;
    t.stale_threshold = stale_threshold;
    t.entries[owner] = NeighborEntry{owner, own_position, 0, 0};
    return t;
  }
};

// Called once per own CAM transmission: bumps the own sequence number,
// refreshes the own position, ages every other entry, and returns the
// snapshot to broadcast.
inline CamPayload prepare_cam(NeighborTable& table, double own_position) {
  for (auto& [id, e] : table.entries) {
    if (id == table.owner) {
      e.seq += 1;
      e.position = own_position;
      e.last_update = 0;
    } else {
      e.last_update += 1;
    }
  }
  return CamPayload{table.owner, table.entries};
}

// Adopts any entry of the received table with a strictly higher sequence
// number; unknown vehicles are inserted fresh. The holder's own entry is
// never overwritten.
inline void merge_tables(NeighborTable& mine, const CamPayload& received) {
  for (const auto& [id, theirs] : received.entries) {
    if (id == mine.owner) continue;
    auto it = mine.entries.find(id);
    if (it == mine.entries.end()) {
      NeighborEntry e = theirs;
      e.last_update = 0;
      mine.entries[id] = e;
    } else if (theirs.seq > it->second.seq) {
      it->second.position = theirs.position;
      it->second.seq = theirs.seq;
      it->second.last_update = 0;
    }
  }
}

// Positions usable for the positional distribution: everyone but the owner
// whose entry is not stale (inclusive at exactly stale_threshold).
inline std::vector<std::pair<int, double>> visible_positions(const NeighborTable& table) {
  std::vector<std::pair<int, double>> out;
  for (const auto& [id, e] : table.entries) {
    if (id == table.owner) continue;
    if (e.last_update <= table.stale_threshold) out.emplace_back(id, e.position);
  }
  return out;
}

}  // namespace diral
