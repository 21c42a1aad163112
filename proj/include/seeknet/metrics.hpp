#pragma once

// Metric computation over a completed trace, and report emission. Throughput
// follows the goodput definition: payload bytes of packets delivered to
// their final destination after warmup, divided by the measured interval.
// Headers, control frames, beacons, and retransmissions never count. The
// report also carries raw channel utilization (all airtime over duration)
// as a clearly separated diagnostic.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "seeknet/scenario.hpp"
#include "seeknet/trace.hpp"

namespace seeknet {

struct SessionMetrics {
  int session = -1;                 // -1 marks the aggregate row
  NodeId src = 0;
  NodeId dst = 0;
  std::int64_t sent = 0;
  std::int64_t received = 0;
  std::int64_t dropped_queue = 0;
  std::int64_t dropped_retry = 0;
  std::int64_t in_network = 0;      // still queued somewhere at end
  std::optional<double> reliability;        // null when sent == 0
  double goodput_bps = 0.0;
  double normalized_throughput = 0.0;
};

struct RelaySeries {
  double bin_s = 10.0;
  double window_s = 60.0;
  std::vector<double> bin_end_s;
  std::map<NodeId, std::vector<std::int64_t>> raw;    // per last hop, per bin
  std::map<NodeId, std::vector<double>> smoothed;     // trailing-window mean
  std::vector<std::int64_t> total_raw;                // all gateway arrivals
  std::vector<double> total_smoothed;
};

struct MetricsReport {
  std::vector<SessionMetrics> sessions;
  SessionMetrics aggregate;
  std::map<NodeId, std::int64_t> forwarded;   // packets accepted for relaying
  double channel_airtime_s = 0.0;
  double channel_utilization = 0.0;
  RelaySeries relay;
  std::uint64_t trace_digest = 0;
  double duration_s = 0.0;
  double warmup_s = 0.0;
  double data_rate_mbps = 1.0;
};

inline MetricsReport summarize(const EventTrace& trace, const Scenario& sc) {
  MetricsReport rep;
  rep.duration_s = sc.sim.duration_s;
  rep.warmup_s = sc.sim.warmup_s;
  rep.data_rate_mbps = sc.radio.data_rate_mbps;
  rep.trace_digest = trace.digest();

  rep.sessions.resize(sc.sessions.size());
  for (std::size_t i = 0; i < sc.sessions.size(); ++i) {
    rep.sessions[i].session = static_cast<int>(i);
    rep.sessions[i].src = sc.sessions[i].src;
    rep.sessions[i].dst = sc.sessions[i].dst;
  }

  std::map<std::uint64_t, int> session_of;
  std::vector<double> goodput_bits(sc.sessions.size() + 1, 0.0);

  for (const auto& r : trace.records()) {
    switch (r.kind) {
      case TraceKind::PacketGenerated:
        session_of[static_cast<std::uint64_t>(r.a)] = static_cast<int>(r.b);
        rep.sessions[static_cast<std::size_t>(r.b)].sent += 1;
        break;
      case TraceKind::PacketDelivered: {
        const int s = session_of.at(static_cast<std::uint64_t>(r.a));
        rep.sessions[static_cast<std::size_t>(s)].received += 1;
        if (r.t >= sc.sim.warmup_s) {
          goodput_bits[static_cast<std::size_t>(s)] += r.x * 8.0;
        }
        break;
      }
      case TraceKind::QueueDropFull: {
        const int s = session_of.at(static_cast<std::uint64_t>(r.a));
        rep.sessions[static_cast<std::size_t>(s)].dropped_queue += 1;
        break;
      }
      case TraceKind::PacketDropRetry: {
        const int s = session_of.at(static_cast<std::uint64_t>(r.a));
        rep.sessions[static_cast<std::size_t>(s)].dropped_retry += 1;
        break;
      }
      case TraceKind::PacketForwardHop:
        rep.forwarded[static_cast<NodeId>(r.node)] += 1;
        break;
      case TraceKind::FrameTx:
        rep.channel_airtime_s += r.x;
        break;
      default:
        break;
    }
  }

  const double interval = sc.sim.duration_s - sc.sim.warmup_s;
  rep.aggregate.session = -1;
  for (std::size_t i = 0; i < rep.sessions.size(); ++i) {
    SessionMetrics& m = rep.sessions[i];
    m.in_network = m.sent - m.received - m.dropped_queue - m.dropped_retry;
    if (m.sent > 0) {
      m.reliability = static_cast<double>(m.received) / static_cast<double>(m.sent);
    }
    m.goodput_bps = interval > 0.0 ? goodput_bits[i] / interval : 0.0;
    m.normalized_throughput = m.goodput_bps / (sc.radio.data_rate_mbps * 1e6);

    rep.aggregate.sent += m.sent;
    rep.aggregate.received += m.received;
    rep.aggregate.dropped_queue += m.dropped_queue;
    rep.aggregate.dropped_retry += m.dropped_retry;
    rep.aggregate.in_network += m.in_network;
    rep.aggregate.goodput_bps += m.goodput_bps;
  }
  if (rep.aggregate.sent > 0) {
    rep.aggregate.reliability = static_cast<double>(rep.aggregate.received) /
                                static_cast<double>(rep.aggregate.sent);
  }
  rep.aggregate.normalized_throughput =
      rep.aggregate.goodput_bps / (sc.radio.data_rate_mbps * 1e6);
  rep.channel_utilization =
      sc.sim.duration_s > 0.0 ? rep.channel_airtime_s / sc.sim.duration_s : 0.0;
  return rep;
}

// Per-relay forwarding series: packets that reached a final destination per
// bin, keyed by the hop that delivered them, smoothed with a trailing moving
// window. total_* aggregates every arrival regardless of last hop.
inline RelaySeries relay_share_series(const EventTrace& trace,
                                      double duration_s, double bin_s = 10.0,
                                      double window_s = 60.0) {
  RelaySeries out;
  out.bin_s = bin_s;
  out.window_s = window_s;
  const std::size_t bins =
      static_cast<std::size_t>(std::ceil(duration_s / bin_s - 1e-9));
  out.bin_end_s.resize(bins);
  for (std::size_t i = 0; i < bins; ++i) out.bin_end_s[i] = (i + 1) * bin_s;
  out.total_raw.assign(bins, 0);

  for (const auto& r : trace.records()) {
    if (r.kind != TraceKind::PacketDelivered) continue;
    std::size_t bin = static_cast<std::size_t>(r.t / bin_s);
    if (bin >= bins) bin = bins - 1;
    auto [it, inserted] =
        out.raw.try_emplace(static_cast<NodeId>(r.b), std::vector<std::int64_t>());
    if (inserted) it->second.assign(bins, 0);
    it->second[bin] += 1;
    out.total_raw[bin] += 1;
  }

  const std::size_t w = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(window_s / bin_s)));
  const auto smooth = [&](const std::vector<std::int64_t>& raw) {
    std::vector<double> s(raw.size(), 0.0);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const std::size_t lo = i + 1 >= w ? i + 1 - w : 0;
      double acc = 0.0;
      for (std::size_t k = lo; k <= i; ++k) acc += static_cast<double>(raw[k]);
      s[i] = acc / static_cast<double>(i - lo + 1);
    }
    return s;
  };
  for (const auto& [hop, raw] : out.raw) out.smoothed[hop] = smooth(raw);
  out.total_smoothed = smooth(out.total_raw);
  return out;
}

namespace detail_metrics {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) {
    throw std::runtime_error("cannot open " + p.string() + " for writing");
  }
  return os;
}

inline void write_summary_csv(const MetricsReport& rep, std::ostream& os) {
  os << "scope,src,dst,sent,received,dropped_queue,dropped_retry,in_network,"
        "reliability,goodput_bps,normalized_throughput\n";
  const auto row = [&os](const SessionMetrics& m) {
    if (m.session >= 0) {
      os << "session-" << m.session << ',' << m.src << ',' << m.dst;
    } else {
      os << "aggregate,,";
    }
    os << ',' << m.sent << ',' << m.received << ',' << m.dropped_queue << ','
       << m.dropped_retry << ',' << m.in_network << ',';
    if (m.reliability.has_value()) os << fmt(*m.reliability);
    os << ',' << fmt(m.goodput_bps) << ',' << fmt(m.normalized_throughput)
       << '\n';
  };
  for (const auto& m : rep.sessions) row(m);
  row(rep.aggregate);
}

inline nlohmann::json summary_json(const MetricsReport& rep) {
  nlohmann::json out;
  const auto jrow = [](const SessionMetrics& m) {
    nlohmann::json j;
    j["sent"] = m.sent;
    j["received"] = m.received;
    j["dropped_queue"] = m.dropped_queue;
    j["dropped_retry"] = m.dropped_retry;
    j["in_network"] = m.in_network;
    if (m.reliability.has_value()) {
      j["reliability"] = *m.reliability;
    } else {
      j["reliability"] = nullptr;
    }
    j["goodput_bps"] = m.goodput_bps;
    j["normalized_throughput"] = m.normalized_throughput;
    return j;
  };
  out["sessions"] = nlohmann::json::array();
  for (const auto& m : rep.sessions) {
    nlohmann::json j = jrow(m);
    j["session"] = m.session;
    j["src"] = m.src;
    j["dst"] = m.dst;
    out["sessions"].push_back(j);
  }
  out["aggregate"] = jrow(rep.aggregate);
  out["channel_utilization"] = rep.channel_utilization;
  out["channel_airtime_s"] = rep.channel_airtime_s;
  nlohmann::json fwd = nlohmann::json::object();
  for (const auto& [id, count] : rep.forwarded) {
    fwd[std::to_string(id)] = count;
  }
  out["forwarded"] = fwd;
  char digest[32];
  std::snprintf(digest, sizeof(digest), "%016llx",
                static_cast<unsigned long long>(rep.trace_digest));
  out["trace_digest"] = digest;
  return out;
}

inline void write_relay_csv(const RelaySeries& s, std::ostream& os) {
  os << "time_s,relay,raw_count,raw_pps,smoothed_count,smoothed_pps\n";
  for (std::size_t i = 0; i < s.bin_end_s.size(); ++i) {
    for (const auto& [hop, raw] : s.raw) {
      os << fmt(s.bin_end_s[i]) << ',' << hop << ',' << raw[i] << ','
         << fmt(raw[i] / s.bin_s) << ',' << fmt(s.smoothed.at(hop)[i]) << ','
         << fmt(s.smoothed.at(hop)[i] / s.bin_s) << '\n';
    }
    os << fmt(s.bin_end_s[i]) << ",total," << s.total_raw[i] << ','
       << fmt(s.total_raw[i] / s.bin_s) << ',' << fmt(s.total_smoothed[i])
       << ',' << fmt(s.total_smoothed[i] / s.bin_s) << '\n';
  }
}

}  // namespace detail_metrics

// Writes summary.csv, summary.json, relay_series.csv and trace_digest.txt
// into out_dir (created if needed). Emissions are deterministic functions of
// the report.
inline void emit_report(const MetricsReport& rep,
                        const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    auto os = detail_metrics::open_out(out_dir / "summary.csv");
    detail_metrics::write_summary_csv(rep, os);
  }
  {
    auto os = detail_metrics::open_out(out_dir / "summary.json");
    os << detail_metrics::summary_json(rep).dump(2) << '\n';
  }
  {
    auto os = detail_metrics::open_out(out_dir / "relay_series.csv");
    detail_metrics::write_relay_csv(rep.relay, os);
  }
  {
    auto os = detail_metrics::open_out(out_dir / "trace_digest.txt");
    char digest[32];
    std::snprintf(digest, sizeof(digest), "%016llx",
                  static_cast<unsigned long long>(rep.trace_digest));
    os << digest << '\n';
  }
}

}  // namespace seeknet
