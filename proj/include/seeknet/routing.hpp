#pragma once

// Distributed energy-aware next-hop selection. Every node keeps a beacon-fed
// table of its neighbors and, per packet, picks the neighbor maximizing a
// cross-layer utility built from link quality, differential queue backlog,
// forward geographic progress, and the neighbor's residual energy. The
// utility lives in one routine (compute_utility) exactly so that swapping
// the optimization objective means editing or registering one function.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seeknet/core.hpp"
#include "seeknet/mac.hpp"

namespace seeknet {

struct DegenerateDestination : std::domain_error {
  DegenerateDestination()
      : std::domain_error("node is already at the destination; "
                          "next-hop utility is undefined") {}
};

// Cross-layer view of one neighbor, refreshed by its beacons and by the
// outcome of frames we send to it.
struct NeighborRecord {
  NodeId id = 0;
  GeoPosition position;
  double energy_ratio = 1.0;   // advertised Er/E0
  std::int64_t backlog = 0;    // advertised queue occupancy q_j
  double link_quality = 1.0;   // EWMA reliability, stands in for bits/Joule
  double last_heard = 0.0;
};

struct NeighborTable {
  std::map<NodeId, NeighborRecord> records;
  double staleness_limit_s = 3.0;
};

struct SelfState {
  NodeId id = 0;
  GeoPosition position;
  EnergyState energy;
  std::int64_t backlog = 0;    // local q_i including any injected offset
};

// U = eta * (max[q_i - q_j, 0] / q_i) * ((d_is - d_js) / d_is) * (Er/E0).
// The backlog factor is 0 when q_i = 0 (nothing to route, and it removes the
// singularity). Negative values mean the neighbor sits behind us relative to
// the destination.
inline double compute_utility(const SelfState& self, const NeighborRecord& nb,
                              const GeoPosition& dest) {
  const double d_is = distance_between(self.position, dest);
  if (d_is == 0.0) throw DegenerateDestination();
  const double d_js = distance_between(nb.position, dest);

  double backlog_factor = 0.0;
  if (self.backlog > 0) {
    const std::int64_t diff = self.backlog - nb.backlog;
    backlog_factor = diff > 0
                         ? static_cast<double>(diff) / static_cast<double>(self.backlog)
                         : 0.0;
  }
  const double progress_factor = (d_is - d_js) / d_is;
  return nb.link_quality * backlog_factor * progress_factor * nb.energy_ratio;
}

using UtilityFn = std::function<double(const SelfState&, const NeighborRecord&,
                                       const GeoPosition&)>;

// Named utility objectives available to scenario files. "seek" is the
// default; alternates can be registered before runs are constructed.
inline std::map<std::string, UtilityFn>& utility_registry() {
  static std::map<std::string, UtilityFn> reg{{"seek", compute_utility}};
  return reg;
}

inline const UtilityFn& lookup_utility(const std::string& name) {
  const auto& reg = utility_registry();
  const auto it = reg.find(name);
  if (it == reg.end()) {
    throw std::invalid_argument("unknown utility objective: " + name);
  }
  return it->second;
}

// Argmax over neighbors with U > 0. Ties break toward higher energy ratio,
// then lower node id, so results are reproducible and order-independent.
// The destination itself competes like any neighbor when it is in the table.
inline std::optional<NodeId> select_next_hop(
    const SelfState& self, const NeighborTable& table, const GeoPosition& dest,
    NodeId /*dest_id*/, const UtilityFn& utility = compute_utility) {
  if (distance_between(self.position, dest) == 0.0) return std::nullopt;

  std::optional<NodeId> best;
  double best_u = 0.0;
  double best_energy = 0.0;
  for (const auto& [id, rec] : table.records) {
    const double u = utility(self, rec, dest);
    if (u <= 0.0) continue;
    const bool wins = !best.has_value() || u > best_u ||
                      (u == best_u && (rec.energy_ratio > best_energy ||
                                       (rec.energy_ratio == best_energy && id < *best)));
    if (wins) {
      best = id;
      best_u = u;
      best_energy = rec.energy_ratio;
    }
  }
  return best;
}

// Known destination coordinates (gateways are fixed command points declared
// in the scenario; their positions are not flooded through beacons).
using DestRegistry = std::map<NodeId, GeoPosition>;

// Walks the general queue in FIFO order, stamps a next hop on every packet
// that has a feasible one, and stages those in the routed pool for segment
// formation. Packets with no positive-utility neighbor stay put and are
// re-evaluated on the next beacon or routing tick. Returns packets routed.
inline int assign_routes(const SelfState& self, QueuePair& queues,
                         const NeighborTable& table, const DestRegistry& dests,
                         const UtilityFn& utility = compute_utility) {
  int routed = 0;
  auto it = queues.general_queue.begin();
  while (it != queues.general_queue.end()) {
    const auto dest = dests.find(it->dst);
    std::optional<NodeId> hop;
    if (dest != dests.end()) {
      hop = select_next_hop(self, table, dest->second, it->dst, utility);
    }
    if (hop.has_value()) {
      it->assigned_next_hop = *hop;
      queues.routed_pool.push_back(*it);
      it = queues.general_queue.erase(it);
      ++routed;
    } else {
      ++it;
    }
  }
  return routed;
}

// Upsert from a received beacon. Link quality is touched separately by
// update_link_quality on the reception itself.
inline void ingest_beacon(NeighborTable& table, const Beacon& beacon,
                          double now) {
  auto [it, inserted] = table.records.try_emplace(beacon.origin);
  NeighborRecord& rec = it->second;
  if (inserted) {
    rec.id = beacon.origin;
    rec.link_quality = 1.0;   // optimistic first contact
  }
  rec.position = beacon.position;
  rec.energy_ratio = beacon.energy_ratio;
  rec.backlog = beacon.backlog;
  rec.last_heard = now;
}

inline Beacon build_beacon(const SelfState& self, double now) {
  Beacon b;
  b.origin = self.id;
  b.position = self.position;
  b.energy_ratio = self.energy.ratio();
  b.backlog = self.backlog;
  b.issued_at = now;
  return b;
}

// EWMA over observed frame outcomes (1 success, 0 failure).
inline void update_link_quality(NeighborRecord& rec, bool success,
                                double alpha) {
  rec.link_quality =
      (1.0 - alpha) * rec.link_quality + alpha * (success ? 1.0 : 0.0);
}

// Beacons are periodic, so gaps in arrival are observable losses: a beacon
// landing k periods after the previous one means k-1 were missed. Without
// counting those, a distant neighbor whose rare beacons do get through looks
// perfect. Capped so one long silence cannot zero a link outright.
inline int beacon_miss_count(double last_heard, double now, double period_s,
                             int cap = 3) {
  if (period_s <= 0.0) return 0;
  const int gaps = static_cast<int>(std::lround((now - last_heard) / period_s));
  return std::min(cap, std::max(0, gaps - 1));
}

// Drops neighbors not heard from within the staleness limit. Returns the
// evicted ids in ascending order.
inline std::vector<NodeId> evict_stale(NeighborTable& table, double now) {
  std::vector<NodeId> removed;
  for (auto it = table.records.begin(); it != table.records.end();) {
    if (now - it->second.last_heard > table.staleness_limit_s) {
      removed.push_back(it->first);
      it = table.records.erase(it);
    } else {
      ++it;
    }
  }
  return removed;
}

}  // namespace seeknet
