#pragma once

// Strict JSON ingestion for scenario files. Unknown fields are rejected with
// the offending path rather than silently ignored; omitted fields fall back
// to the documented defaults (payload 1000 B, segment 32, 1 Mbps, the
// calibrated link table). Positions may be planar [x, y] meters or lat/lon
// degrees; lat/lon is converted once at parse time with an equirectangular
// projection around the first geographic node, and the simulation itself is
// purely planar.

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "seeknet/scenario.hpp"

namespace seeknet {

struct SyntaxError : std::runtime_error {
  int line;
  SyntaxError(int line_, const std::string& what_)
      : std::runtime_error("syntax error at line " + std::to_string(line_) +
                           ": " + what_),
        line(line_) {}
};

struct SchemaError : std::runtime_error {
  std::string path;
  SchemaError(const std::string& path_, const std::string& expected)
      : std::runtime_error("at " + path_ + ": " + expected), path(path_) {}
};

namespace detail_json {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) throw SchemaError(path + "." + key, "unknown field");
  }
}

inline double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

inline std::int64_t intval(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<std::int64_t>();
}

inline bool boolval(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaError(path, "expected a boolean");
  return j.get<bool>();
}

inline std::string strval(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

struct GeoRef {
  bool set = false;
  double lat0 = 0.0, lon0 = 0.0;
};

inline GeoPosition parse_position(const json& j, const std::string& path,
                                  GeoRef& ref) {
  if (j.is_array()) {
    if (j.size() != 2 && j.size() != 3) {
      throw SchemaError(path, "expected [x, y] or [x, y, alt] meters");
    }
    GeoPosition p;
    p.x = num(j[0], path + "[0]");
    p.y = num(j[1], path + "[1]");
    if (j.size() == 3) p.alt = num(j[2], path + "[2]");
    return p;
  }
  if (j.is_object()) {
    check_keys(j, path, {"lat", "lon", "alt"});
    const double lat = num(j.at("lat"), path + ".lat");
    const double lon = num(j.at("lon"), path + ".lon");
    if (!ref.set) {
      ref.set = true;
      ref.lat0 = lat;
      ref.lon0 = lon;
    }
    constexpr double kEarthRadius = 6371000.0;
    constexpr double kDeg = 3.14159265358979323846 / 180.0;
    GeoPosition p;
    p.x = kEarthRadius * std::cos(ref.lat0 * kDeg) * (lon - ref.lon0) * kDeg;
    p.y = kEarthRadius * (lat - ref.lat0) * kDeg;
    if (j.contains("alt")) p.alt = num(j.at("alt"), path + ".alt");
    return p;
  }
  throw SchemaError(path, "expected an [x, y] array or a lat/lon object");
}

inline NodeRole parse_role(const json& j, const std::string& path) {
  const std::string s = strval(j, path);
  if (s == "source") return NodeRole::Source;
  if (s == "relay") return NodeRole::Relay;
  if (s == "gateway") return NodeRole::Gateway;
  throw SchemaError(path, "expected source | relay | gateway");
}

inline LinkModel parse_link_model(const json& j, const std::string& path,
                                  const RadioConfig& radio) {
  check_keys(j, path, {"cutoff_m", "rates"});
  LinkModel m = default_link_model(radio.one_mbps_robustness);
  if (j.contains("cutoff_m")) m.cutoff_m = num(j.at("cutoff_m"), path + ".cutoff_m");
  if (j.contains("rates")) {
    m.rates.clear();
    const json& rates = j.at("rates");
    if (!rates.is_object()) throw SchemaError(path + ".rates", "expected an object");
    for (const auto& [key, arr] : rates.items()) {
      RateTable table;
      try {
        table.rate_mbps = std::stod(key);
      } catch (const std::exception&) {
        throw SchemaError(path + ".rates." + key, "rate key must be numeric");
      }
      const std::string tpath = path + ".rates." + key;
      if (!arr.is_array()) throw SchemaError(tpath, "expected [[distance_m, p], ...]");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const json& pt = arr[i];
        const std::string ppath = tpath + "[" + std::to_string(i) + "]";
        if (!pt.is_array() || pt.size() != 2) {
          throw SchemaError(ppath, "expected [distance_m, p]");
        }
        table.points.push_back({num(pt[0], ppath + "[0]"), num(pt[1], ppath + "[1]")});
      }
      m.rates.push_back(std::move(table));
    }
  }
  return m;
}

}  // namespace detail_json

inline Scenario parse_scenario(const std::string& text) {
  using nlohmann::json;
  using namespace detail_json;

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw SyntaxError(line, e.what());
  }

  check_keys(doc, "$",
             {"nodes", "sessions", "radio", "mac", "routing", "world_events",
              "sim"});

  Scenario sc;

  if (doc.contains("sim")) {
    const json& j = doc.at("sim");
    check_keys(j, "sim",
               {"duration_s", "seed", "metrics_tick_s", "warmup_s",
                "traffic_jitter"});
    if (j.contains("duration_s")) sc.sim.duration_s = num(j.at("duration_s"), "sim.duration_s");
    if (j.contains("seed")) sc.sim.seed = static_cast<std::uint64_t>(intval(j.at("seed"), "sim.seed"));
    if (j.contains("metrics_tick_s")) sc.sim.metrics_tick_s = num(j.at("metrics_tick_s"), "sim.metrics_tick_s");
    if (j.contains("warmup_s")) sc.sim.warmup_s = num(j.at("warmup_s"), "sim.warmup_s");
    if (j.contains("traffic_jitter")) sc.sim.traffic_jitter = num(j.at("traffic_jitter"), "sim.traffic_jitter");
  }

  if (doc.contains("radio")) {
    const json& j = doc.at("radio");
    check_keys(j, "radio",
               {"data_rate_mbps", "control_rate_mbps", "beacon_period_s",
                "preamble_s", "data_header_bytes", "control_frame_bytes",
                "block_ack_base_bytes", "beacon_bytes", "data_frame_gap_s",
                "tx_power_w", "rx_power_w", "one_mbps_robustness",
                "link_model"});
    RadioConfig& r = sc.radio;
    if (j.contains("data_rate_mbps")) r.data_rate_mbps = num(j.at("data_rate_mbps"), "radio.data_rate_mbps");
    if (j.contains("control_rate_mbps")) r.control_rate_mbps = num(j.at("control_rate_mbps"), "radio.control_rate_mbps");
    if (j.contains("beacon_period_s")) r.beacon_period_s = num(j.at("beacon_period_s"), "radio.beacon_period_s");
    if (j.contains("preamble_s")) r.preamble_s = num(j.at("preamble_s"), "radio.preamble_s");
    if (j.contains("data_header_bytes")) r.data_header_bytes = static_cast<std::uint32_t>(intval(j.at("data_header_bytes"), "radio.data_header_bytes"));
    if (j.contains("control_frame_bytes")) r.control_frame_bytes = static_cast<std::uint32_t>(intval(j.at("control_frame_bytes"), "radio.control_frame_bytes"));
    if (j.contains("block_ack_base_bytes")) r.block_ack_base_bytes = static_cast<std::uint32_t>(intval(j.at("block_ack_base_bytes"), "radio.block_ack_base_bytes"));
    if (j.contains("beacon_bytes")) r.beacon_bytes = static_cast<std::uint32_t>(intval(j.at("beacon_bytes"), "radio.beacon_bytes"));
    if (j.contains("data_frame_gap_s")) r.data_frame_gap_s = num(j.at("data_frame_gap_s"), "radio.data_frame_gap_s");
    if (j.contains("tx_power_w")) r.tx_power_w = num(j.at("tx_power_w"), "radio.tx_power_w");
    if (j.contains("rx_power_w")) r.rx_power_w = num(j.at("rx_power_w"), "radio.rx_power_w");
    if (j.contains("one_mbps_robustness")) r.one_mbps_robustness = num(j.at("one_mbps_robustness"), "radio.one_mbps_robustness");
    if (j.contains("link_model")) {
      sc.link_model = parse_link_model(j.at("link_model"), "radio.link_model", r);
    }
  }

  if (doc.contains("mac")) {
    const json& j = doc.at("mac");
    check_keys(j, "mac",
               {"slot_time_s", "cw_min", "cw_max", "cts_timeout_s",
                "ack_timeout_s", "max_rts_retries", "max_data_retries", "arq",
                "segment_size", "queue_capacity", "virtual_carrier_sense",
                "backlog_scope"});
    MacConfig& m = sc.mac;
    if (j.contains("slot_time_s")) m.slot_time_s = num(j.at("slot_time_s"), "mac.slot_time_s");
    if (j.contains("cw_min")) m.cw_min = static_cast<int>(intval(j.at("cw_min"), "mac.cw_min"));
    if (j.contains("cw_max")) m.cw_max = static_cast<int>(intval(j.at("cw_max"), "mac.cw_max"));
    if (j.contains("cts_timeout_s")) m.cts_timeout_s = num(j.at("cts_timeout_s"), "mac.cts_timeout_s");
    if (j.contains("ack_timeout_s")) m.ack_timeout_s = num(j.at("ack_timeout_s"), "mac.ack_timeout_s");
    if (j.contains("max_rts_retries")) m.max_rts_retries = static_cast<int>(intval(j.at("max_rts_retries"), "mac.max_rts_retries"));
    if (j.contains("max_data_retries")) m.max_data_retries = static_cast<int>(intval(j.at("max_data_retries"), "mac.max_data_retries"));
    if (j.contains("arq")) m.arq_enabled = boolval(j.at("arq"), "mac.arq");
    if (j.contains("segment_size")) m.segment_size = static_cast<int>(intval(j.at("segment_size"), "mac.segment_size"));
    if (j.contains("queue_capacity")) m.queue_capacity = static_cast<std::size_t>(intval(j.at("queue_capacity"), "mac.queue_capacity"));
    if (j.contains("virtual_carrier_sense")) m.virtual_carrier_sense = boolval(j.at("virtual_carrier_sense"), "mac.virtual_carrier_sense");
    if (j.contains("backlog_scope")) {
      const std::string s = strval(j.at("backlog_scope"), "mac.backlog_scope");
      if (s == "general") {
        m.backlog_scope = BacklogScope::GeneralOnly;
      } else if (s == "both") {
        m.backlog_scope = BacklogScope::BothQueues;
      } else {
        throw SchemaError("mac.backlog_scope", "expected general | both");
      }
    }
  }

  if (doc.contains("routing")) {
    const json& j = doc.at("routing");
    check_keys(j, "routing",
               {"staleness_periods", "ewma_alpha", "routing_tick_s", "utility",
                "beacon_stagger"});
    RoutingConfig& r = sc.routing;
    if (j.contains("staleness_periods")) r.staleness_periods = num(j.at("staleness_periods"), "routing.staleness_periods");
    if (j.contains("ewma_alpha")) r.ewma_alpha = num(j.at("ewma_alpha"), "routing.ewma_alpha");
    if (j.contains("routing_tick_s")) r.routing_tick_s = num(j.at("routing_tick_s"), "routing.routing_tick_s");
    if (j.contains("utility")) r.utility = strval(j.at("utility"), "routing.utility");
    if (j.contains("beacon_stagger")) r.beacon_stagger = boolval(j.at("beacon_stagger"), "routing.beacon_stagger");
  }

  GeoRef georef;
  if (!doc.contains("nodes") || !doc.at("nodes").is_array()) {
    throw SchemaError("$.nodes", "expected an array of node objects");
  }
  for (std::size_t i = 0; i < doc.at("nodes").size(); ++i) {
    const json& j = doc.at("nodes")[i];
    const std::string path = "nodes[" + std::to_string(i) + "]";
    check_keys(j, path, {"id", "position", "role", "energy", "backlog_offset"});
    NodeConfig n;
    if (!j.contains("id")) throw SchemaError(path + ".id", "required");
    n.id = static_cast<NodeId>(intval(j.at("id"), path + ".id"));
    if (!j.contains("position")) throw SchemaError(path + ".position", "required");
    n.position = parse_position(j.at("position"), path + ".position", georef);
    if (j.contains("role")) n.role = parse_role(j.at("role"), path + ".role");
    if (j.contains("energy")) {
      const json& e = j.at("energy");
      check_keys(e, path + ".energy", {"initial_j", "residual_j"});
      if (e.contains("initial_j")) {
        n.energy.initial_j = num(e.at("initial_j"), path + ".energy.initial_j");
        n.energy.residual_j = n.energy.initial_j;
      }
      if (e.contains("residual_j")) {
        n.energy.residual_j = num(e.at("residual_j"), path + ".energy.residual_j");
      }
    }
    if (j.contains("backlog_offset")) {
      n.fixed_backlog_offset = intval(j.at("backlog_offset"), path + ".backlog_offset");
    }
    sc.nodes.push_back(n);
  }

  if (doc.contains("sessions")) {
    if (!doc.at("sessions").is_array()) {
      throw SchemaError("$.sessions", "expected an array of session objects");
    }
    for (std::size_t i = 0; i < doc.at("sessions").size(); ++i) {
      const json& j = doc.at("sessions")[i];
      const std::string path = "sessions[" + std::to_string(i) + "]";
      check_keys(j, path,
                 {"src", "dst", "rate_pps", "payload_bytes", "start_s", "stop_s"});
      Session s;
      if (!j.contains("src")) throw SchemaError(path + ".src", "required");
      if (!j.contains("dst")) throw SchemaError(path + ".dst", "required");
      if (!j.contains("rate_pps")) throw SchemaError(path + ".rate_pps", "required");
      s.src = static_cast<NodeId>(intval(j.at("src"), path + ".src"));
      s.dst = static_cast<NodeId>(intval(j.at("dst"), path + ".dst"));
      s.rate_pps = num(j.at("rate_pps"), path + ".rate_pps");
      s.payload_bytes = j.contains("payload_bytes")
                            ? static_cast<std::uint32_t>(intval(j.at("payload_bytes"), path + ".payload_bytes"))
                            : 1000u;
      s.start_s = j.contains("start_s") ? num(j.at("start_s"), path + ".start_s") : 0.0;
      s.stop_s = j.contains("stop_s") ? num(j.at("stop_s"), path + ".stop_s")
                                      : sc.sim.duration_s;
      sc.sessions.push_back(s);
    }
  }

  if (doc.contains("world_events")) {
    if (!doc.at("world_events").is_array()) {
      throw SchemaError("$.world_events", "expected an array");
    }
    for (std::size_t i = 0; i < doc.at("world_events").size(); ++i) {
      const json& j = doc.at("world_events")[i];
      const std::string path = "world_events[" + std::to_string(i) + "]";
      if (!j.is_object() || !j.contains("action")) {
        throw SchemaError(path + ".action", "required");
      }
      const std::string action = strval(j.at("action"), path + ".action");
      WorldEvent ev;
      if (!j.contains("at_s")) throw SchemaError(path + ".at_s", "required");
      ev.at_s = num(j.at("at_s"), path + ".at_s");
      if (action == "set_backlog_offset") {
        check_keys(j, path, {"at_s", "action", "node", "count"});
        ev.action = WorldActionKind::SetBacklogOffset;
        ev.node = static_cast<NodeId>(intval(j.at("node"), path + ".node"));
        ev.count = intval(j.at("count"), path + ".count");
      } else if (action == "set_residual_energy") {
        check_keys(j, path, {"at_s", "action", "node", "ratio"});
        ev.action = WorldActionKind::SetResidualEnergy;
        ev.node = static_cast<NodeId>(intval(j.at("node"), path + ".node"));
        ev.ratio = num(j.at("ratio"), path + ".ratio");
      } else if (action == "move_node") {
        check_keys(j, path, {"at_s", "action", "node", "position"});
        ev.action = WorldActionKind::MoveNode;
        ev.node = static_cast<NodeId>(intval(j.at("node"), path + ".node"));
        ev.position = parse_position(j.at("position"), path + ".position", georef);
      } else if (action == "start_session" || action == "stop_session") {
        check_keys(j, path, {"at_s", "action", "session"});
        ev.action = action == "start_session" ? WorldActionKind::StartSession
                                              : WorldActionKind::StopSession;
        ev.session = static_cast<std::size_t>(intval(j.at("session"), path + ".session"));
      } else {
        throw SchemaError(path + ".action", "unknown action " + action);
      }
      sc.world_events.push_back(ev);
    }
  }

  return sc;
}

}  // namespace seeknet
