#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "seeknet/metrics.hpp"

using namespace seeknet;

namespace {

Scenario two_session_scenario(double duration = 100.0, double warmup = 0.0) {
  Scenario sc;
  for (NodeId i = 0; i < 3; ++i) {
    NodeConfig n;
    n.id = i;
    n.position = {double(i) * 100.0, 0};
    sc.nodes.push_back(n);
  }
  Session a;
  a.src = 0;
  a.dst = 2;
  a.rate_pps = 100;
  a.stop_s = duration;
  Session b = a;
  b.src = 1;
  sc.sessions = {a, b};
  sc.sim.duration_s = duration;
  sc.sim.warmup_s = warmup;
  return sc;
}

std::uint64_t uid(NodeId src, std::uint32_t seq) {
  return (static_cast<std::uint64_t>(src) << 32) | seq;
}

}  // namespace

TEST_CASE("summarize reproduces the reliability definition") {
  const Scenario sc = two_session_scenario();
  EventTrace tr;
  for (std::uint32_t i = 0; i < 10000; ++i) {
    tr.push(0.001 * i, TraceKind::PacketGenerated, 0,
            static_cast<std::int64_t>(uid(0, i)), 0, 0, 1000.0);
  }
  for (std::uint32_t i = 0; i < 9808; ++i) {
    tr.push(0.001 * i + 0.5, TraceKind::PacketDelivered, 2,
            static_cast<std::int64_t>(uid(0, i)), 1, 0, 1000.0);
  }
  const MetricsReport rep = summarize(tr, sc);
  REQUIRE(rep.sessions[0].reliability.has_value());
  CHECK(*rep.sessions[0].reliability == Catch::Approx(0.9808));
  CHECK(rep.sessions[0].in_network == 192);
  // Session 1 sent nothing: reliability is null, not zero.
  CHECK_FALSE(rep.sessions[1].reliability.has_value());
}

TEST_CASE("goodput counts delivered payload over the measured interval") {
  const Scenario sc = two_session_scenario(100.0, 0.0);
  EventTrace tr;
  // 100 packets/s of 1000 B delivered for the full 100 s.
  for (std::uint32_t i = 0; i < 10000; ++i) {
    const double t = i * 0.01;
    tr.push(t, TraceKind::PacketGenerated, 0,
            static_cast<std::int64_t>(uid(0, i)), 0, 0, 1000.0);
    tr.push(t, TraceKind::PacketDelivered, 2,
            static_cast<std::int64_t>(uid(0, i)), 1, 0, 1000.0);
  }
  const MetricsReport rep = summarize(tr, sc);
  CHECK(rep.sessions[0].goodput_bps == Catch::Approx(0.8e6));
  CHECK(rep.sessions[0].normalized_throughput == Catch::Approx(0.8));
  CHECK(rep.aggregate.normalized_throughput == Catch::Approx(0.8));
}

TEST_CASE("warmup deliveries are excluded from goodput but not reliability") {
  const Scenario sc = two_session_scenario(100.0, 50.0);
  EventTrace tr;
  for (std::uint32_t i = 0; i < 100; ++i) {
    const double t = i;  // one per second
    tr.push(t, TraceKind::PacketGenerated, 0,
            static_cast<std::int64_t>(uid(0, i)), 0, 0, 1000.0);
    tr.push(t + 0.01, TraceKind::PacketDelivered, 2,
            static_cast<std::int64_t>(uid(0, i)), 1, 0, 1000.0);
  }
  const MetricsReport rep = summarize(tr, sc);
  CHECK(*rep.sessions[0].reliability == 1.0);
  // 50 deliveries in the measured half, 1000 B each, over 50 s.
  CHECK(rep.sessions[0].goodput_bps == Catch::Approx(50 * 8000.0 / 50.0));
}

TEST_CASE("relay series bins, smooths, and aggregates") {
  EventTrace tr;
  // Relay 1 delivers 2 packets per 10 s bin for 60 s, then goes silent;
  // relay 2 delivers 1 per bin throughout 120 s.
  for (int bin = 0; bin < 12; ++bin) {
    const double t0 = bin * 10.0;
    if (bin < 6) {
      tr.push(t0 + 1.0, TraceKind::PacketDelivered, 9, 100 + bin, 1, 0, 1000.0);
      tr.push(t0 + 2.0, TraceKind::PacketDelivered, 9, 200 + bin, 1, 0, 1000.0);
    }
    tr.push(t0 + 3.0, TraceKind::PacketDelivered, 9, 300 + bin, 2, 0, 1000.0);
  }
  const RelaySeries s = relay_share_series(tr, 120.0, 10.0, 60.0);
  REQUIRE(s.bin_end_s.size() == 12);
  REQUIRE(s.raw.count(1) == 1);
  REQUIRE(s.raw.count(2) == 1);

  // Constant per-bin value: the trailing mean equals it at steady state.
  CHECK(s.smoothed.at(2)[5] == Catch::Approx(1.0));
  CHECK(s.smoothed.at(2)[11] == Catch::Approx(1.0));
  CHECK(s.smoothed.at(1)[5] == Catch::Approx(2.0));
  // After relay 1 stops, its windowed share decays and empties by one window.
  CHECK(s.smoothed.at(1)[8] < 2.0);
  CHECK(s.smoothed.at(1)[11] == Catch::Approx(0.0));
  // Totals see both relays.
  CHECK(s.total_raw[0] == 3);
  CHECK(s.total_raw[11] == 1);
}

TEST_CASE("report emission is deterministic and formats agree") {
  const Scenario sc = two_session_scenario();
  EventTrace tr;
  for (std::uint32_t i = 0; i < 100; ++i) {
    tr.push(i * 0.5, TraceKind::PacketGenerated, 0,
            static_cast<std::int64_t>(uid(0, i)), 0, 0, 1000.0);
    if (i % 4 != 3) {
      tr.push(i * 0.5 + 0.2, TraceKind::PacketDelivered, 2,
              static_cast<std::int64_t>(uid(0, i)), 1, 0, 1000.0);
    }
  }
  MetricsReport rep = summarize(tr, sc);
  rep.relay = relay_share_series(tr, sc.sim.duration_s);

  const auto dir = std::filesystem::temp_directory_path() / "seeknet_metrics_test";
  std::filesystem::remove_all(dir);
  emit_report(rep, dir / "a");
  emit_report(rep, dir / "b");

  const auto slurp = [](const std::filesystem::path& p) {
    std::ifstream is(p);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  CHECK(slurp(dir / "a" / "summary.csv") == slurp(dir / "b" / "summary.csv"));
  CHECK(slurp(dir / "a" / "relay_series.csv") ==
        slurp(dir / "b" / "relay_series.csv"));

  // Three summary rows: two sessions plus the aggregate.
  std::istringstream csv(slurp(dir / "a" / "summary.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);  // header + 3

  // JSON mirrors the CSV values.
  const auto j = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
  CHECK(j["sessions"][0]["sent"] == 100);
  CHECK(j["sessions"][0]["received"] == 75);
  CHECK(j["sessions"][1]["reliability"].is_null());
  CHECK(j["aggregate"]["sent"] == 100);
  CHECK(j["aggregate"]["received"] == 75);
  const double csv_rel = 0.75;
  CHECK(j["sessions"][0]["reliability"].get<double>() ==
        Catch::Approx(csv_rel));
}

TEST_CASE("normalized throughput stays within [0, 1] on real traces") {
  EventTrace tr;
  const Scenario sc = two_session_scenario(10.0, 0.0);
  for (std::uint32_t i = 0; i < 1200; ++i) {
    tr.push(i * 0.008, TraceKind::PacketGenerated, 0,
            static_cast<std::int64_t>(uid(0, i)), 0, 0, 1000.0);
    tr.push(i * 0.008 + 0.004, TraceKind::PacketDelivered, 2,
            static_cast<std::int64_t>(uid(0, i)), 1, 0, 1000.0);
  }
  const MetricsReport rep = summarize(tr, sc);
  CHECK(rep.sessions[0].normalized_throughput <= 1.0);
  CHECK(rep.sessions[0].normalized_throughput >= 0.0);
}
