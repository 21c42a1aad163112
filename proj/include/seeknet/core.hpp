#pragma once

// Shared domain types: node identity, planar geometry, energy bookkeeping,
// and the packet/segment/beacon units moved around by the rest of the stack.

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

namespace seeknet {

using NodeId = std::uint32_t;

inline constexpr NodeId kBroadcastId = 0xffffffffu;

// Local planar frame, meters east/north. Altitude is carried but ignored by
// distance computations (all supported deployments are < ~2 km across).
struct GeoPosition {
  double x = 0.0;
  double y = 0.0;
  double alt = 0.0;

  friend bool operator==(const GeoPosition&, const GeoPosition&) = default;
};

inline bool is_finite(const GeoPosition& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.alt);
}

// Euclidean distance in the planar frame.
inline double distance_between(const GeoPosition& a, const GeoPosition& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct EnergyState {
  double initial_j = 1.0e5;
  double residual_j = 1.0e5;

  double ratio() const { return initial_j > 0.0 ? residual_j / initial_j : 0.0; }
  bool depleted() const { return residual_j <= 0.0; }

  // Consumption floors at zero; residual never exceeds initial.
  void drain(double joules) {
    residual_j = std::max(0.0, residual_j - joules);
  }
  void set_ratio(double r) {
    residual_j = std::min(std::max(r, 0.0), 1.0) * initial_j;
  }
};

struct Packet {
  std::uint32_t seq = 0;
  NodeId src = 0;              // originating node, stable across hops
  NodeId dst = 0;              // final destination
  std::uint32_t payload_len = 0;
  double created_at = 0.0;
  std::optional<NodeId> assigned_next_hop;

  // (src, seq) identifies a packet for its whole life in the network.
  std::uint64_t uid() const {
    return (static_cast<std::uint64_t>(src) << 32) | seq;
  }
};

// Batch of packets bound for one next hop, transmitted under a single grant.
struct Segment {
  std::vector<Packet> packets;
  NodeId next_hop = 0;
  int retries_rts = 0;
  int retries_data = 0;

  std::size_t size() const { return packets.size(); }
};

// Periodic control broadcast: position, residual-energy ratio, backlog.
// Never enters the data queues.
struct Beacon {
  NodeId origin = 0;
  GeoPosition position;
  double energy_ratio = 1.0;   // in [0, 1]
  std::int64_t backlog = 0;
  double issued_at = 0.0;
};

enum class NodeRole { Source, Relay, Gateway };

struct NodeConfig {
  NodeId id = 0;
  GeoPosition position;
  EnergyState energy;
  NodeRole role = NodeRole::Relay;
  // Additive count advertised on top of real queue occupancy; scenario
  // events use it to emulate congestion without generating traffic.
  std::int64_t fixed_backlog_offset = 0;
};

}  // namespace seeknet
