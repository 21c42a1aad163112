#pragma once

// Statistical radio link model. Per-rate packet success probability comes
// from a measured calibration table (distance -> probability), interpolated
// linearly; past the last calibration point the probability decays linearly
// to zero at the cutoff distance. Also defines on-air frame descriptors and
// the airtime formula used for medium occupancy and energy accounting.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "seeknet/core.hpp"

namespace seeknet {

struct UnknownRate : std::invalid_argument {
  explicit UnknownRate(double rate_mbps)
      : std::invalid_argument("no link calibration for rate " +
                              std::to_string(rate_mbps) + " Mbps") {}
};

struct CalPoint {
  double distance_m = 0.0;
  double p = 1.0;
};

struct RateTable {
  double rate_mbps = 0.0;
  std::vector<CalPoint> points;  // sorted by distance
};

struct LinkModel {
  std::vector<RateTable> rates;
  double cutoff_m = 1942.0;      // no reception at or beyond this range
  double control_rate_mbps = 1.0;

  const RateTable* find(double rate_mbps) const {
    for (const auto& t : rates) {
      if (t.rate_mbps == rate_mbps) return &t;
    }
    return nullptr;
  }
};

// Measured outdoor calibration, reliability vs distance per data rate.
// The 5.5 Mbps column is non-monotone in distance; values are kept verbatim.
// No rows were published for 1 Mbps: it is derived from the 2 Mbps column,
// pulled toward 1 with a configurable robustness factor
// (p1 = 1 - factor * (1 - p2), lower rate being the more robust one).
inline LinkModel default_link_model(double one_mbps_robustness = 0.5) {
  LinkModel m;
  const std::vector<CalPoint> two = {
      {495.2, 0.999}, {771.2, 0.9977}, {1019.0, 0.9808}};
  std::vector<CalPoint> one;
  one.reserve(two.size());
  for (const auto& c : two) {
    one.push_back({c.distance_m, 1.0 - one_mbps_robustness * (1.0 - c.p)});
  }
  m.rates.push_back({1.0, one});
  m.rates.push_back({2.0, two});
  m.rates.push_back({5.5, {{495.2, 0.9962}, {771.2, 0.9603}, {1019.0, 0.9716}}});
  m.rates.push_back({11.0, {{495.2, 0.8528}, {771.2, 0.3156}, {1019.0, 0.139}}});
  return m;
}

// Packet success probability for one frame at the given rate and distance.
// Below the first calibration point the first value applies (clamp); between
// points, linear interpolation; past the last point, linear decay reaching
// exactly 0 at cutoff_m and staying 0 beyond it.
inline double link_reliability(const LinkModel& model, double rate_mbps,
                               double distance_m) {
  const RateTable* table = model.find(rate_mbps);
  if (table == nullptr || table->points.empty()) throw UnknownRate(rate_mbps);
  if (distance_m >= model.cutoff_m) return 0.0;

  const auto& pts = table->points;
  if (distance_m <= pts.front().distance_m) return pts.front().p;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (distance_m <= pts[i].distance_m) {
      const auto& a = pts[i - 1];
      const auto& b = pts[i];
      const double f = (distance_m - a.distance_m) / (b.distance_m - a.distance_m);
      return a.p + f * (b.p - a.p);
    }
  }
  const auto& last = pts.back();
  const double f = (distance_m - last.distance_m) / (model.cutoff_m - last.distance_m);
  return last.p * (1.0 - f);
}

// On-air timing and framing knobs. Sizes are whole-frame bytes as they leave
// the radio; a DATA frame is payload plus a fixed header, control frames are
// header-only. The inter-frame gap models the per-frame turnaround cost of
// pushing each DATA frame through the host-to-radio path inside a burst.
struct RadioConfig {
  double data_rate_mbps = 1.0;
  double control_rate_mbps = 1.0;
  double preamble_s = 192e-6;
  std::uint32_t data_header_bytes = 40;
  std::uint32_t control_frame_bytes = 14;
  std::uint32_t block_ack_base_bytes = 14;
  std::uint32_t beacon_bytes = 32;
  double data_frame_gap_s = 270e-6;
  double beacon_period_s = 1.0;
  double tx_power_w = 1.0;
  double rx_power_w = 0.0;
  double one_mbps_robustness = 0.5;
};

enum class FrameKind : std::uint8_t { Rts, Cts, Data, BlockAck, Beacon };

inline const char* to_string(FrameKind k) {
  switch (k) {
    case FrameKind::Rts: return "RTS";
    case FrameKind::Cts: return "CTS";
    case FrameKind::Data: return "DATA";
    case FrameKind::BlockAck: return "BLOCK_ACK";
    case FrameKind::Beacon: return "BEACON";
  }
  return "?";
}

struct RtsInfo {
  std::uint16_t n_frames = 0;   // DATA frames in the granted burst
  double burst_s = 0.0;         // airtime of the burst incl. inter-frame gaps
  double exchange_s = 0.0;      // remaining exchange duration after this frame
};

struct CtsInfo {
  NodeId granted = 0;           // requester being answered
  double exchange_s = 0.0;      // remaining exchange duration after this frame
};

struct DataInfo {
  Packet packet;
  std::uint16_t burst_index = 0;
  std::uint16_t burst_total = 0;
};

struct BlockAckInfo {
  std::vector<bool> bitmap;     // per-frame delivered flags, burst order
};

struct Frame {
  FrameKind kind = FrameKind::Data;
  NodeId src = 0;
  NodeId dst = 0;               // kBroadcastId for beacons
  std::uint32_t size_bytes = 0; // whole frame as transmitted
  double rate_mbps = 1.0;
  std::variant<std::monostate, DataInfo, BlockAckInfo, RtsInfo, CtsInfo, Beacon>
      payload;
};

// airtime = preamble + 8 * size / rate. Strictly increasing in size,
// strictly decreasing in rate.
inline double frame_airtime(const Frame& f, const RadioConfig& radio) {
  return radio.preamble_s + f.size_bytes * 8.0 / (f.rate_mbps * 1e6);
}

inline Frame make_data_frame(const RadioConfig& radio, NodeId src, NodeId dst,
                             const Packet& p, std::uint16_t index,
                             std::uint16_t total) {
  Frame f;
  f.kind = FrameKind::Data;
  f.src = src;
  f.dst = dst;
  f.size_bytes = p.payload_len + radio.data_header_bytes;
  f.rate_mbps = radio.data_rate_mbps;
  f.payload = DataInfo{p, index, total};
  return f;
}

inline Frame make_rts(const RadioConfig& radio, NodeId src, NodeId dst,
                      std::uint16_t n_frames, double burst_s, double exchange_s) {
  Frame f;
  f.kind = FrameKind::Rts;
  f.src = src;
  f.dst = dst;
  f.size_bytes = radio.control_frame_bytes;
  f.rate_mbps = radio.control_rate_mbps;
  f.payload = RtsInfo{n_frames, burst_s, exchange_s};
  return f;
}

inline Frame make_cts(const RadioConfig& radio, NodeId src, NodeId dst,
                      double exchange_s) {
  Frame f;
  f.kind = FrameKind::Cts;
  f.src = src;
  f.dst = dst;
  f.size_bytes = radio.control_frame_bytes;
  f.rate_mbps = radio.control_rate_mbps;
  f.payload = CtsInfo{dst, exchange_s};
  return f;
}

inline Frame make_block_ack(const RadioConfig& radio, NodeId src, NodeId dst,
                            std::vector<bool> bitmap) {
  Frame f;
  f.kind = FrameKind::BlockAck;
  f.src = src;
  f.dst = dst;
  f.size_bytes =
      radio.block_ack_base_bytes +
      static_cast<std::uint32_t>((bitmap.size() + 7) / 8);
  f.rate_mbps = radio.control_rate_mbps;
  f.payload = BlockAckInfo{std::move(bitmap)};
  return f;
}

inline Frame make_beacon_frame(const RadioConfig& radio, const Beacon& b) {
  Frame f;
  f.kind = FrameKind::Beacon;
  f.src = b.origin;
  f.dst = kBroadcastId;
  f.size_bytes = radio.beacon_bytes;
  f.rate_mbps = radio.control_rate_mbps;
  f.payload = b;
  return f;
}

struct Transmission {
  Frame frame;
  NodeId tx = 0;
  GeoPosition tx_pos;   // transmitter position captured at start of frame
  double start = 0.0;
  double end = 0.0;
};

}  // namespace seeknet
