#include <catch_amalgamated.hpp>

#include "seeknet/mac.hpp"

using namespace seeknet;

namespace {

Packet mk_packet(std::uint32_t seq, NodeId hop = 3) {
  Packet p;
  p.seq = seq;
  p.src = 0;
  p.dst = 9;
  p.payload_len = 1000;
  p.assigned_next_hop = hop;
  return p;
}

Segment mk_segment(int n, NodeId hop = 3) {
  Segment s;
  s.next_hop = hop;
  for (int i = 0; i < n; ++i) s.packets.push_back(mk_packet(i, hop));
  return s;
}

// Walks a fresh state up to AWAIT_CTS, returning the actions of the RTS step.
std::vector<MacAction> reach_await_cts(MacState& s, const MacConfig& cfg,
                                       Rng& rng, int segment_len = 4) {
  s.current_segment = mk_segment(segment_len);
  auto acts = mac_step(s, {MacEventType::SegmentReady, {}, {}}, cfg, rng);
  REQUIRE(s.phase == MacPhase::Sensing);
  acts = mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  while (s.phase == MacPhase::Backoff) {
    acts = mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  }
  REQUIRE(s.phase == MacPhase::AwaitCts);
  return acts;
}

bool has_action(const std::vector<MacAction>& acts, MacAction::Type t) {
  for (const auto& a : acts) {
    if (a.type == t) return true;
  }
  return false;
}

const MacAction& get_action(const std::vector<MacAction>& acts,
                            MacAction::Type t) {
  for (const auto& a : acts) {
    if (a.type == t) return a;
  }
  throw std::logic_error("action not present");
}

}  // namespace

TEST_CASE("enqueue respects queue capacity") {
  MacConfig cfg;
  cfg.queue_capacity = 3;
  QueuePair q;
  for (int i = 0; i < 3; ++i) {
    CHECK(enqueue_outbound(q, mk_packet(i), cfg) == EnqueueResult::Ok);
  }
  CHECK(enqueue_outbound(q, mk_packet(3), cfg) == EnqueueResult::QueueFull);
  CHECK(q.general_queue.size() == 3);
  CHECK(q.occupancy(BacklogScope::BothQueues) == 3);
}

TEST_CASE("segment formation groups by hop, order preserved, 32 max") {
  MacConfig cfg;
  QueuePair q;
  for (int i = 0; i < 40; ++i) {
    Packet p = mk_packet(i, 3);
    q.routed_pool.push_back(p);
  }
  auto s1 = form_segment(q, 3, 32);
  REQUIRE(s1.has_value());
  CHECK(s1->packets.size() == 32);
  CHECK(s1->packets.front().seq == 0);
  CHECK(s1->packets.back().seq == 31);
  auto s2 = form_segment(q, 3, 32);
  REQUIRE(s2.has_value());
  CHECK(s2->packets.size() == 8);
  CHECK(form_segment(q, 3, 32) == std::nullopt);
}

TEST_CASE("interleaved hops form per-hop segments preserving order") {
  QueuePair q;
  for (int i = 0; i < 10; ++i) {
    q.routed_pool.push_back(mk_packet(i, i % 2 == 0 ? 2 : 3));
  }
  auto to2 = form_segment(q, 2, 32);
  auto to3 = form_segment(q, 3, 32);
  REQUIRE(to2.has_value());
  REQUIRE(to3.has_value());
  CHECK(to2->packets.size() == 5);
  CHECK(to3->packets.size() == 5);
  CHECK(to2->packets[0].seq == 0);
  CHECK(to2->packets[4].seq == 8);
  CHECK(to3->packets[0].seq == 1);
  CHECK(q.routed_pool.empty());
}

TEST_CASE("empty pool forms nothing") {
  QueuePair q;
  CHECK(form_segment(q, 3, 32) == std::nullopt);
}

TEST_CASE("happy path: sense, backoff, RTS, CTS, burst, full block-ack") {
  MacConfig cfg;
  Rng rng(11);
  MacState s;
  s.contention_window = cfg.cw_min;

  const auto rts_acts = reach_await_cts(s, cfg, rng);
  CHECK(has_action(rts_acts, MacAction::Type::SendRts));
  CHECK(has_action(rts_acts, MacAction::Type::StartCtsTimer));
  CHECK(get_action(rts_acts, MacAction::Type::SendRts).indices.size() == 4);

  auto acts = mac_step(s, {MacEventType::CtsReceived, {}, {}}, cfg, rng);
  CHECK(s.phase == MacPhase::TxData);
  CHECK(s.contention_window == cfg.cw_min);
  CHECK(get_action(acts, MacAction::Type::SendDataRound).indices ==
        std::vector<std::uint16_t>{0, 1, 2, 3});

  acts = mac_step(s, {MacEventType::DataBurstComplete, {}, {}}, cfg, rng);
  CHECK(s.phase == MacPhase::AwaitAck);
  CHECK(has_action(acts, MacAction::Type::StartAckTimer));

  MacEventRec back{MacEventType::BlockAckReceived, {}, {true, true, true, true}};
  acts = mac_step(s, back, cfg, rng);
  CHECK(s.phase == MacPhase::Idle);
  CHECK(get_action(acts, MacAction::Type::CompleteSegment).lost == 0);
}

TEST_CASE("backoff freezes while the channel is busy") {
  MacConfig cfg;
  Rng rng(2);  // seed chosen so the first draw is > 1
  MacState s;
  s.contention_window = cfg.cw_min;
  s.current_segment = mk_segment(1);
  mac_step(s, {MacEventType::SegmentReady, {}, {}}, cfg, rng);
  mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  REQUIRE(s.phase == MacPhase::Backoff);
  const int before = s.backoff_slots_remaining;
  REQUIRE(before > 1);
  const auto acts = mac_step(s, {MacEventType::ChannelBusy, {}, {}}, cfg, rng);
  CHECK(s.backoff_slots_remaining == before);  // frozen, not decremented
  CHECK(has_action(acts, MacAction::Type::SlotWhenClear));
  mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  CHECK(s.backoff_slots_remaining == before - 1);
}

TEST_CASE("CTS timeout doubles the window, caps, and finally returns the segment") {
  MacConfig cfg;
  cfg.max_rts_retries = 2;
  cfg.cw_max = 40;
  Rng rng(5);
  MacState s;
  s.contention_window = cfg.cw_min;

  reach_await_cts(s, cfg, rng);
  auto acts = on_timeout(s, TimeoutKind::CtsTimeout, cfg);
  CHECK(s.phase == MacPhase::Sensing);
  CHECK(s.contention_window == 32);
  CHECK(s.current_segment->retries_rts == 1);
  CHECK(has_action(acts, MacAction::Type::SlotAfter));

  // Walk back to AWAIT_CTS and time out twice more.
  mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  while (s.phase == MacPhase::Backoff) {
    mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  }
  acts = on_timeout(s, TimeoutKind::CtsTimeout, cfg);
  CHECK(s.contention_window == 40);  // capped at cw_max
  CHECK(s.phase == MacPhase::Sensing);

  mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  while (s.phase == MacPhase::Backoff) {
    mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  }
  acts = on_timeout(s, TimeoutKind::CtsTimeout, cfg);
  CHECK(s.phase == MacPhase::Idle);
  CHECK(has_action(acts, MacAction::Type::ReturnSegmentToGeneral));
  CHECK(s.current_segment->retries_rts == 3);
}

TEST_CASE("selective repeat retransmits exactly the missing packets") {
  MacConfig cfg;
  Rng rng(13);
  MacState s;
  s.contention_window = cfg.cw_min;

  reach_await_cts(s, cfg, rng, 32);
  mac_step(s, {MacEventType::CtsReceived, {}, {}}, cfg, rng);
  mac_step(s, {MacEventType::DataBurstComplete, {}, {}}, cfg, rng);

  std::vector<bool> bitmap(32, true);
  bitmap[5] = bitmap[17] = bitmap[30] = false;
  auto acts = mac_step(s, {MacEventType::BlockAckReceived, {}, bitmap}, cfg, rng);
  CHECK(s.phase == MacPhase::Sensing);  // re-contends for the retry round
  CHECK(s.current_segment->retries_data == 1);

  mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  while (s.phase == MacPhase::Backoff) {
    mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  }
  REQUIRE(s.phase == MacPhase::AwaitCts);
  CHECK(s.round_indices == std::vector<std::uint16_t>{5, 17, 30});

  mac_step(s, {MacEventType::CtsReceived, {}, {}}, cfg, rng);
  mac_step(s, {MacEventType::DataBurstComplete, {}, {}}, cfg, rng);
  acts = mac_step(s, {MacEventType::BlockAckReceived, {}, {true, true, true}},
                  cfg, rng);
  CHECK(s.phase == MacPhase::Idle);
  CHECK(get_action(acts, MacAction::Type::CompleteSegment).lost == 0);
}

TEST_CASE("without ARQ a lossy block-ack completes with losses counted") {
  MacConfig cfg;
  cfg.arq_enabled = false;
  Rng rng(17);
  MacState s;
  s.contention_window = cfg.cw_min;

  reach_await_cts(s, cfg, rng, 8);
  mac_step(s, {MacEventType::CtsReceived, {}, {}}, cfg, rng);
  mac_step(s, {MacEventType::DataBurstComplete, {}, {}}, cfg, rng);
  std::vector<bool> bitmap(8, true);
  bitmap[2] = bitmap[3] = false;
  const auto acts =
      mac_step(s, {MacEventType::BlockAckReceived, {}, bitmap}, cfg, rng);
  CHECK(s.phase == MacPhase::Idle);
  CHECK(get_action(acts, MacAction::Type::CompleteSegment).lost == 2);
}

TEST_CASE("ack timeout acts as an all-missing block-ack") {
  MacConfig cfg;
  cfg.max_data_retries = 1;
  Rng rng(19);
  MacState s;
  s.contention_window = cfg.cw_min;

  reach_await_cts(s, cfg, rng, 4);
  mac_step(s, {MacEventType::CtsReceived, {}, {}}, cfg, rng);
  mac_step(s, {MacEventType::DataBurstComplete, {}, {}}, cfg, rng);
  auto acts = on_timeout(s, TimeoutKind::AckTimeout, cfg);
  CHECK(s.phase == MacPhase::Sensing);  // retry budget remains
  CHECK(s.current_segment->retries_data == 1);

  mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  while (s.phase == MacPhase::Backoff) {
    mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
  }
  mac_step(s, {MacEventType::CtsReceived, {}, {}}, cfg, rng);
  mac_step(s, {MacEventType::DataBurstComplete, {}, {}}, cfg, rng);
  acts = on_timeout(s, TimeoutKind::AckTimeout, cfg);
  CHECK(s.phase == MacPhase::Idle);
  CHECK(get_action(acts, MacAction::Type::CompleteSegment).lost == 4);
}

TEST_CASE("illegal transitions are simulator bugs") {
  MacConfig cfg;
  Rng rng(1);
  MacState s;
  CHECK_THROWS_AS(mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng),
                  IllegalTransition);
  CHECK_THROWS_AS(mac_step(s, {MacEventType::CtsReceived, {}, {}}, cfg, rng),
                  IllegalTransition);
  s.current_segment = mk_segment(1);
  s.phase = MacPhase::AwaitAck;
  CHECK_THROWS_AS(mac_step(s, {MacEventType::SegmentReady, {}, {}}, cfg, rng),
                  IllegalTransition);
}

TEST_CASE("backoff draws are uniform over the contention window") {
  MacConfig cfg;
  Rng rng(20240518);
  const int trials = 16000;
  std::vector<int> counts(16, 0);
  for (int i = 0; i < trials; ++i) {
    MacState s;
    s.contention_window = cfg.cw_min;
    s.current_segment = mk_segment(1);
    mac_step(s, {MacEventType::SegmentReady, {}, {}}, cfg, rng);
    mac_step(s, {MacEventType::ChannelIdle, {}, {}}, cfg, rng);
    const int draw = s.phase == MacPhase::AwaitCts ? 0 : s.backoff_slots_remaining;
    REQUIRE(draw >= 0);
    REQUIRE(draw < 16);
    counts[static_cast<std::size_t>(draw)] += 1;
  }
  const double expected = trials / 16.0;
  double chi2 = 0.0;
  for (const int c : counts) {
    chi2 += (c - expected) * (c - expected) / expected;
  }
  CHECK(chi2 < 37.70);  // chi-squared critical value, df=15, p=0.001
}

TEST_CASE("receiver availability rules") {
  CHECK(receiver_available(MacPhase::Idle, false, false));
  CHECK(receiver_available(MacPhase::Backoff, false, false));
  CHECK(receiver_available(MacPhase::Sensing, false, false));
  CHECK_FALSE(receiver_available(MacPhase::TxData, false, false));
  CHECK_FALSE(receiver_available(MacPhase::AwaitCts, false, false));
  CHECK_FALSE(receiver_available(MacPhase::AwaitAck, false, false));
  CHECK_FALSE(receiver_available(MacPhase::Idle, true, false));
  CHECK_FALSE(receiver_available(MacPhase::Idle, false, true));
}
