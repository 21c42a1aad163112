#include <catch_amalgamated.hpp>

#include "seeknet/medium.hpp"

using namespace seeknet;

namespace {

LinkModel perfect_links() {
  LinkModel m;
  m.rates.push_back({1.0, {{0.0, 1.0}, {1500.0, 1.0}}});
  m.cutoff_m = 1942.0;
  return m;
}

Frame small_frame(NodeId src, NodeId dst) {
  Frame f;
  f.kind = FrameKind::Rts;
  f.src = src;
  f.dst = dst;
  f.size_bytes = 14;
  f.rate_mbps = 1.0;
  f.payload = RtsInfo{};
  return f;
}

Transmission tx_at(NodeId who, GeoPosition pos, double start, double dur,
                   NodeId dst = 1) {
  Transmission t;
  t.frame = small_frame(who, dst);
  t.tx = who;
  t.tx_pos = pos;
  t.start = start;
  t.end = start + dur;
  return t;
}

}  // namespace

TEST_CASE("transmission fans out to every node in range") {
  Medium med(perfect_links(), 1942.0);
  const std::vector<RadioPeer> peers = {{1, {500, 0}}, {2, {900, 0}}};
  const auto recs = med.transmit(tx_at(0, {0, 0}, 0.0, 1e-3), peers);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].receiver == 1);
  CHECK(recs[1].receiver == 2);
  CHECK(recs[0].distance_m == Catch::Approx(500.0));
}

TEST_CASE("nodes beyond the cutoff hear nothing") {
  Medium med(perfect_links(), 1942.0);
  const std::vector<RadioPeer> peers = {{1, {2500, 0}}};
  const auto recs = med.transmit(tx_at(0, {0, 0}, 0.0, 1e-3), peers);
  CHECK(recs.empty());
}

TEST_CASE("overlapping transmissions collide at a common receiver") {
  Medium med(perfect_links(), 1942.0);
  Rng rng(1);
  const std::vector<RadioPeer> at2 = {{2, {500, 0}}};

  const auto first = med.transmit(tx_at(0, {0, 0}, 0.0, 1e-3), at2);
  const auto second = med.transmit(tx_at(1, {1000, 0}, 0.5e-3, 1e-3), at2);
  REQUIRE(first.size() == 1);
  REQUIRE(second.size() == 1);
  CHECK(second[0].collided);

  const Resolution r1 = med.resolve(first[0].id, rng);
  CHECK_FALSE(r1.delivered);
  CHECK(r1.reason == LossReason::Collision);
  const Resolution r2 = med.resolve(second[0].id, rng);
  CHECK(r2.reason == LossReason::Collision);
}

TEST_CASE("back-to-back transmissions do not collide (half-open intervals)") {
  Medium med(perfect_links(), 1942.0);
  Rng rng(1);
  const std::vector<RadioPeer> at2 = {{2, {500, 0}}};
  const auto first = med.transmit(tx_at(0, {0, 0}, 0.0, 1e-3), at2);
  const Resolution r1 = med.resolve(first[0].id, rng);
  CHECK(r1.delivered);
  const auto second = med.transmit(tx_at(1, {1000, 0}, 1e-3, 1e-3), at2);
  REQUIRE(second.size() == 1);
  CHECK_FALSE(second[0].collided);
}

TEST_CASE("a receiver that transmits during the frame is deaf") {
  Medium med(perfect_links(), 1942.0);
  Rng rng(1);
  const std::vector<RadioPeer> at1 = {{1, {500, 0}}};
  const std::vector<RadioPeer> at0 = {{0, {0, 0}}};

  const auto recs = med.transmit(tx_at(0, {0, 0}, 0.0, 1e-3), at1);
  REQUIRE(recs.size() == 1);
  // Node 1 starts its own frame halfway through the inbound one.
  med.transmit(tx_at(1, {500, 0}, 0.5e-3, 0.1e-3, 0), at0);
  const Resolution r = med.resolve(recs[0].id, rng);
  CHECK_FALSE(r.delivered);
  CHECK(r.reason == LossReason::Deaf);
}

TEST_CASE("half-duplex violations are simulator bugs") {
  Medium med(perfect_links(), 1942.0);
  const std::vector<RadioPeer> peers = {{1, {500, 0}}};
  med.transmit(tx_at(0, {0, 0}, 0.0, 1e-3), peers);
  CHECK_THROWS_AS(med.transmit(tx_at(0, {0, 0}, 0.5e-3, 1e-3), peers),
                  HalfDuplexViolation);
}

TEST_CASE("carrier sense reports inbound energy and own transmissions") {
  Medium med(perfect_links(), 1942.0);
  const std::vector<RadioPeer> peers = {{1, {500, 0}}};
  CHECK_FALSE(med.channel_busy(1, 0.0));
  med.transmit(tx_at(0, {0, 0}, 0.0, 1e-3), peers);
  CHECK(med.channel_busy(1, 0.5e-3));
  CHECK(med.channel_busy(0, 0.5e-3));  // own transmitter
  CHECK(med.busy_clear_time(1, 0.5e-3) == Catch::Approx(1e-3));
}

TEST_CASE("lossy link resolves by Bernoulli draw") {
  LinkModel m;
  m.rates.push_back({1.0, {{0.0, 0.5}, {1500.0, 0.5}}});
  Medium med(m, 1942.0);
  Rng rng(99);
  const std::vector<RadioPeer> peers = {{1, {500, 0}}};
  int delivered = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto recs = med.transmit(tx_at(0, {0, 0}, i * 1.0, 1e-3), peers);
    const Resolution r = med.resolve(recs[0].id, rng);
    if (r.delivered) ++delivered;
    else CHECK(r.reason == LossReason::ChannelError);
  }
  const double frac = static_cast<double>(delivered) / n;
  CHECK(std::abs(frac - 0.5) <= 3.0 * std::sqrt(0.25 / n));
}
