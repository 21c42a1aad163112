#pragma once

// Declarative experiment description plus its validation. Parsing from JSON
// lives in scenario_json.hpp so that modules which only need the types do
// not pull the JSON library in.

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "seeknet/core.hpp"
#include "seeknet/link_model.hpp"
#include "seeknet/mac.hpp"

namespace seeknet {

struct Session {
  NodeId src = 0;
  NodeId dst = 0;
  double rate_pps = 1.0;         // constant bit rate source
  std::uint32_t payload_bytes = 1000;
  double start_s = 0.0;
  double stop_s = 0.0;
};

enum class WorldActionKind : std::uint8_t {
  SetBacklogOffset,
  SetResidualEnergy,
  MoveNode,
  StartSession,
  StopSession,
};

struct WorldEvent {
  double at_s = 0.0;
  WorldActionKind action = WorldActionKind::SetBacklogOffset;
  NodeId node = 0;               // node-targeted actions
  std::int64_t count = 0;        // SetBacklogOffset
  double ratio = 0.0;            // SetResidualEnergy
  GeoPosition position;          // MoveNode
  std::size_t session = 0;       // Start/StopSession
};

struct RoutingConfig {
  double staleness_periods = 3.0;   // beacon periods until a neighbor is stale
  double ewma_alpha = 0.1;
  double routing_tick_s = 0.1;
  std::string utility = "seek";
  bool beacon_stagger = true;       // offset first beacons to avoid phase lock
};

struct SimConfig {
  double duration_s = 300.0;
  std::uint64_t seed = 1;
  double metrics_tick_s = 1.0;
  double warmup_s = 30.0;
  double traffic_jitter = 0.1;      // fraction of the inter-arrival interval
};

struct Scenario {
  std::vector<NodeConfig> nodes;
  std::vector<Session> sessions;
  RadioConfig radio;
  std::optional<LinkModel> link_model;  // defaults to the calibration table
  MacConfig mac;
  RoutingConfig routing;
  std::vector<WorldEvent> world_events;
  SimConfig sim;

  const NodeConfig* find_node(NodeId id) const {
    for (const auto& n : nodes) {
      if (n.id == id) return &n;
    }
    return nullptr;
  }

  LinkModel effective_link_model() const {
    LinkModel m = link_model.value_or(default_link_model(radio.one_mbps_robustness));
    m.control_rate_mbps = radio.control_rate_mbps;
    return m;
  }
};

enum class ScenarioErrorCode {
  DuplicateNodeId,
  UnknownSessionEndpoint,
  UnsupportedDataRate,
  NonPositiveDuration,
  BadSession,
  BadNode,
  BadLinkModel,
  BadWorldEvent,
  BadConfig,
};

struct ScenarioError : std::runtime_error {
  ScenarioErrorCode code;
  ScenarioError(ScenarioErrorCode c, const std::string& msg)
      : std::runtime_error(msg), code(c) {}
};

inline bool supported_data_rate(double mbps) {
  return mbps == 1.0 || mbps == 2.0 || mbps == 5.5 || mbps == 11.0;
}

// Full referential / range validation. Returns the scenario untouched when
// every invariant holds; throws ScenarioError otherwise.
inline const Scenario& validate_scenario(const Scenario& s) {
  if (!(s.sim.duration_s > 0.0)) {
    throw ScenarioError(ScenarioErrorCode::NonPositiveDuration,
                        "sim.duration_s must be positive");
  }
  if (s.sim.warmup_s < 0.0 || s.sim.warmup_s >= s.sim.duration_s) {
    throw ScenarioError(ScenarioErrorCode::BadConfig,
                        "sim.warmup_s must lie in [0, duration)");
  }
  if (s.nodes.empty()) {
    throw ScenarioError(ScenarioErrorCode::BadNode, "scenario has no nodes");
  }
  std::set<NodeId> ids;
  for (const auto& n : s.nodes) {
    if (!ids.insert(n.id).second) {
      throw ScenarioError(ScenarioErrorCode::DuplicateNodeId,
                          "duplicate node id " + std::to_string(n.id));
    }
    if (!is_finite(n.position)) {
      throw ScenarioError(ScenarioErrorCode::BadNode,
                          "node " + std::to_string(n.id) +
                              " has a non-finite position");
    }
    if (!(n.energy.initial_j > 0.0) || n.energy.residual_j < 0.0 ||
        n.energy.residual_j > n.energy.initial_j) {
      throw ScenarioError(ScenarioErrorCode::BadNode,
                          "node " + std::to_string(n.id) +
                              " has an invalid energy state");
    }
  }
  if (!supported_data_rate(s.radio.data_rate_mbps)) {
    throw ScenarioError(ScenarioErrorCode::UnsupportedDataRate,
                        "data rate " + std::to_string(s.radio.data_rate_mbps) +
                            " Mbps is not in {1, 2, 5.5, 11}");
  }
  if (!supported_data_rate(s.radio.control_rate_mbps)) {
    throw ScenarioError(ScenarioErrorCode::UnsupportedDataRate,
                        "control rate " +
                            std::to_string(s.radio.control_rate_mbps) +
                            " Mbps is not in {1, 2, 5.5, 11}");
  }
  for (std::size_t i = 0; i < s.sessions.size(); ++i) {
    const Session& ses = s.sessions[i];
    const std::string tag = "session " + std::to_string(i);
    if (ids.find(ses.src) == ids.end() || ids.find(ses.dst) == ids.end()) {
      throw ScenarioError(ScenarioErrorCode::UnknownSessionEndpoint,
                          tag + " references a nonexistent node");
    }
    if (ses.src == ses.dst) {
      throw ScenarioError(ScenarioErrorCode::BadSession,
                          tag + " has src == dst");
    }
    if (!(ses.rate_pps > 0.0) || ses.payload_bytes == 0) {
      throw ScenarioError(ScenarioErrorCode::BadSession,
                          tag + " needs rate > 0 and payload > 0");
    }
    if (!(ses.start_s < ses.stop_s)) {
      throw ScenarioError(ScenarioErrorCode::BadSession,
                          tag + " needs start < stop");
    }
  }
  if (s.link_model.has_value()) {
    for (const auto& table : s.link_model->rates) {
      double prev = -1.0;
      for (const auto& pt : table.points) {
        if (pt.distance_m <= prev) {
          throw ScenarioError(ScenarioErrorCode::BadLinkModel,
                              "calibration points must be sorted by distance");
        }
        if (pt.p < 0.0 || pt.p > 1.0) {
          throw ScenarioError(ScenarioErrorCode::BadLinkModel,
                              "calibration probability outside [0, 1]");
        }
        prev = pt.distance_m;
      }
      if (!table.points.empty() &&
          s.link_model->cutoff_m < table.points.back().distance_m) {
        throw ScenarioError(
            ScenarioErrorCode::BadLinkModel,
            "cutoff distance below the last calibration point");
      }
    }
    if (s.link_model->find(s.radio.data_rate_mbps) == nullptr) {
      throw ScenarioError(ScenarioErrorCode::UnsupportedDataRate,
                          "link model has no table for the data rate");
    }
  }
  for (const auto& ev : s.world_events) {
    if (ev.at_s < 0.0 || ev.at_s > s.sim.duration_s) {
      throw ScenarioError(ScenarioErrorCode::BadWorldEvent,
                          "world event outside [0, duration]");
    }
    switch (ev.action) {
      case WorldActionKind::SetBacklogOffset:
      case WorldActionKind::SetResidualEnergy:
      case WorldActionKind::MoveNode:
        if (ids.find(ev.node) == ids.end()) {
          throw ScenarioError(ScenarioErrorCode::BadWorldEvent,
                              "world event targets nonexistent node " +
                                  std::to_string(ev.node));
        }
        break;
      case WorldActionKind::StartSession:
      case WorldActionKind::StopSession:
        if (ev.session >= s.sessions.size()) {
          throw ScenarioError(ScenarioErrorCode::BadWorldEvent,
                              "world event targets nonexistent session");
        }
        break;
    }
  }
  if (s.mac.cw_min <= 0 || s.mac.cw_min > s.mac.cw_max) {
    throw ScenarioError(ScenarioErrorCode::BadConfig,
                        "need 0 < cw_min <= cw_max");
  }
  if (s.mac.segment_size <= 0) {
    throw ScenarioError(ScenarioErrorCode::BadConfig,
                        "segment_size must be positive");
  }
  if (!(s.radio.beacon_period_s > 0.0) || !(s.routing.routing_tick_s > 0.0)) {
    throw ScenarioError(ScenarioErrorCode::BadConfig,
                        "beacon period and routing tick must be positive");
  }
  return s;
}

}  // namespace seeknet
