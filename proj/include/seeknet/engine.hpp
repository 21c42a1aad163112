#pragma once

// Deterministic discrete-event kernel. One Engine hosts N protocol-stack
// node instances (queues, MAC state machine, neighbor table), the shared
// medium, traffic sources, and timed scenario perturbations. Events are
// dispatched in (time, insertion seq) order; all randomness flows through a
// single stream, so a (scenario, seed) pair maps to exactly one trace.

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "seeknet/core.hpp"
#include "seeknet/link_model.hpp"
#include "seeknet/mac.hpp"
#include "seeknet/medium.hpp"
#include "seeknet/rng.hpp"
#include "seeknet/routing.hpp"
#include "seeknet/scenario.hpp"
#include "seeknet/trace.hpp"

namespace seeknet {

struct RunResult {
  EventTrace trace;
  std::uint64_t digest = 0;
  std::int64_t generated = 0;
  std::int64_t delivered = 0;
  std::int64_t dropped = 0;
  std::int64_t in_network_at_end = 0;
  std::map<NodeId, double> residual_j;   // end-of-run battery state
};

class Engine {
 public:
  Engine(const Scenario& scenario, std::uint64_t seed)
      : sc_(validate_scenario(scenario)),
        rng_(seed),
        medium_(sc_.effective_link_model(),
                sc_.effective_link_model().cutoff_m) {
    nodes_.reserve(sc_.nodes.size());
    for (const auto& cfg : sc_.nodes) {
      nodes_.push_back(std::make_unique<NodeState>());
      nodes_.back()->cfg = cfg;
      nodes_.back()->mac.contention_window = sc_.mac.cw_min;
      nodes_.back()->table.staleness_limit_s =
          sc_.routing.staleness_periods * sc_.radio.beacon_period_s;
      index_[cfg.id] = nodes_.size() - 1;
    }
    for (const auto& ses : sc_.sessions) {
      dests_[ses.dst] = sc_.find_node(ses.dst)->position;
    }
    utility_ = lookup_utility(sc_.routing.utility);
    sessions_.resize(sc_.sessions.size());
  }

  RunResult run() {
    seed_initial_events();
    while (!pq_.empty()) {
      const Ev ev = pq_.top();
      if (ev.t > sc_.sim.duration_s) break;
      pq_.pop();
      now_ = ev.t;
      dispatch(ev);
    }
    RunResult out;
    finalize(out);
    out.digest = trace_.digest();
    out.trace = std::move(trace_);
    return out;
  }

 private:
  enum class EvKind : std::uint8_t {
    TrafficGen,
    BeaconTick,
    BeaconRetry,
    SlotTimer,
    CtsTimer,
    AckTimer,
    TxDataFrame,
    SendBlockAck,
    RoutingTick,
    Reception,
    World,
    MetricsTick,
  };

  struct Ev {
    double t = 0.0;
    std::uint64_t seq = 0;
    EvKind kind = EvKind::MetricsTick;
    std::int32_t node = -1;   // node index or session index, kind-dependent
    std::uint64_t a = 0;      // generation counter or reception id
  };

  struct EvOrder {
    bool operator()(const Ev& l, const Ev& r) const {
      if (l.t != r.t) return l.t > r.t;
      return l.seq > r.seq;
    }
  };

  struct NodeState {
    NodeConfig cfg;
    QueuePair queues;
    MacState mac;
    NeighborTable table;
    std::optional<RxGrant> grant;
    double defer_until = 0.0;           // NAV plus self-hold during a grant
    std::unordered_set<std::uint64_t> consumed;  // final-destination dedup

    // Sender-side burst bookkeeping for the current ARQ round.
    std::vector<Frame> burst;
    std::size_t burst_next = 0;

    std::uint64_t slot_gen = 0;
    std::uint64_t cts_gen = 0;
    std::uint64_t ack_gen = 0;
    std::uint64_t tx_gen = 0;
    std::uint64_t grant_gen = 0;
    std::uint64_t beacon_gen = 0;
  };

  struct SessionRt {
    bool enabled = true;
    bool generating = false;
    // Jitter-free CBR schedules from a fixed base so packet counts over a
    // window are exact (no accumulated float drift).
    double base_time = 0.0;
    std::uint64_t emitted_since_base = 0;
  };

  enum class PkState : std::uint8_t { InNetwork, Delivered, Dropped };

  struct PkMeta {
    std::int32_t session = 0;
    PkState state = PkState::InNetwork;
    NodeId owner = 0;
  };

  // ---- scheduling ----------------------------------------------------

  void schedule(double t, EvKind kind, std::int32_t node, std::uint64_t a = 0) {
    pq_.push(Ev{t, next_seq_++, kind, node, a});
  }

  void seed_initial_events() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      // Stagger first beacons so nodes do not phase-lock; golden-ratio
      // spacing keeps any subset well spread.
      double offset = 0.0;
      if (sc_.routing.beacon_stagger) {
        const double f = nodes_[i]->cfg.id * 0.6180339887498949;
        offset = (f - std::floor(f)) * sc_.radio.beacon_period_s;
      }
      schedule(offset, EvKind::BeaconTick, static_cast<std::int32_t>(i));
      schedule(sc_.routing.routing_tick_s, EvKind::RoutingTick,
               static_cast<std::int32_t>(i));
    }
    for (std::size_t i = 0; i < sc_.sessions.size(); ++i) {
      sessions_[i].generating = true;
      sessions_[i].base_time = sc_.sessions[i].start_s;
      schedule(sc_.sessions[i].start_s, EvKind::TrafficGen,
               static_cast<std::int32_t>(i));
    }
    for (std::size_t i = 0; i < sc_.world_events.size(); ++i) {
      schedule(sc_.world_events[i].at_s, EvKind::World,
               static_cast<std::int32_t>(i));
    }
    if (sc_.sim.metrics_tick_s > 0.0) {
      schedule(sc_.sim.metrics_tick_s, EvKind::MetricsTick, -1);
    }
  }

  // ---- dispatch ------------------------------------------------------

  void dispatch(const Ev& ev) {
    switch (ev.kind) {
      case EvKind::TrafficGen: on_traffic_gen(ev.node); break;
      case EvKind::BeaconTick: on_beacon_tick(ev.node); break;
      case EvKind::BeaconRetry:
        if (node(ev.node).beacon_gen == ev.a) attempt_beacon(ev.node);
        break;
      case EvKind::SlotTimer: on_slot_timer(ev.node, ev.a); break;
      case EvKind::CtsTimer: on_cts_timer(ev.node, ev.a); break;
      case EvKind::AckTimer: on_ack_timer(ev.node, ev.a); break;
      case EvKind::TxDataFrame: on_tx_data_frame(ev.node, ev.a); break;
      case EvKind::SendBlockAck: on_send_block_ack(ev.node, ev.a); break;
      case EvKind::RoutingTick: on_routing_tick(ev.node); break;
      case EvKind::Reception: on_reception(ev.a); break;
      case EvKind::World: on_world(ev.node); break;
      case EvKind::MetricsTick: on_metrics_tick(); break;
    }
  }

  // ---- traffic -------------------------------------------------------

  void on_traffic_gen(std::int32_t si) {
    const Session& ses = sc_.sessions[static_cast<std::size_t>(si)];
    SessionRt& rt = sessions_[static_cast<std::size_t>(si)];
    if (!rt.enabled || now_ >= ses.stop_s) {
      rt.generating = false;
      return;
    }
    Packet p;
    p.seq = src_seq_[ses.src]++;
    p.src = ses.src;
    p.dst = ses.dst;
    p.payload_len = ses.payload_bytes;
    p.created_at = now_;
    packets_[p.uid()] = PkMeta{si, PkState::InNetwork, ses.src};
    trace_.push(now_, TraceKind::PacketGenerated,
                static_cast<std::int32_t>(ses.src),
                static_cast<std::int64_t>(p.uid()), si,
                0, ses.payload_bytes);

    NodeState& n = node_by_id(ses.src);
    if (enqueue_outbound(n.queues, p, sc_.mac) == EnqueueResult::QueueFull) {
      mark_dropped(p.uid(), ses.src, TraceKind::QueueDropFull);
    } else {
      try_route(index_.at(ses.src));
    }

    rt.emitted_since_base += 1;
    double next;
    if (sc_.sim.traffic_jitter > 0.0) {
      const double dt = (1.0 / ses.rate_pps) *
                        (1.0 + sc_.sim.traffic_jitter * (rng_.u01() - 0.5));
      next = now_ + dt;
    } else {
      next = rt.base_time +
             static_cast<double>(rt.emitted_since_base) / ses.rate_pps;
    }
    schedule(next, EvKind::TrafficGen, si);
  }

  // ---- beacons -------------------------------------------------------

  void on_beacon_tick(std::int32_t ni) {
    schedule(now_ + sc_.radio.beacon_period_s, EvKind::BeaconTick, ni);
    attempt_beacon(ni);
  }

  // A beacon bypasses the data queues but still respects carrier sense and
  // never interrupts an exchange this node is part of; when blocked it
  // retries as soon as the channel clears.
  void attempt_beacon(std::int32_t ni) {
    NodeState& n = node(ni);
    if (n.cfg.energy.depleted()) return;
    const bool mac_clear = n.mac.phase == MacPhase::Idle ||
                           n.mac.phase == MacPhase::Sensing ||
                           n.mac.phase == MacPhase::Backoff;
    const bool channel_clear =
        !medium_.channel_busy(n.cfg.id, now_) && n.defer_until <= now_;
    if (mac_clear && !n.grant.has_value() && channel_clear) {
      const Beacon b = build_beacon(self_state(n), now_);
      transmit(ni, make_beacon_frame(sc_.radio, b));
      trace_.push(now_, TraceKind::BeaconSent, node_id32(ni), b.backlog, 0, 0,
                  b.energy_ratio);
      return;
    }
    double when = std::max(medium_.busy_clear_time(n.cfg.id, now_),
                           n.defer_until) +
                  sc_.mac.slot_time_s;
    if (!mac_clear || n.grant.has_value()) {
      // Blocked by our own exchange, whose end isn't knowable here; poll at
      // a coarse interval instead of every slot.
      when = std::max(when, now_ + 2e-3);
    }
    schedule(when, EvKind::BeaconRetry, ni, ++n.beacon_gen);
  }

  // ---- routing -------------------------------------------------------

  void on_routing_tick(std::int32_t ni) {
    NodeState& n = node(ni);
    evict_stale(n.table, now_);
    try_route(static_cast<std::size_t>(ni));
    schedule(now_ + sc_.routing.routing_tick_s, EvKind::RoutingTick, ni);
  }

  void try_route(std::size_t ni) {
    NodeState& n = *nodes_[ni];
    if (assign_routes(self_state(n), n.queues, n.table, dests_, utility_) > 0) {
      while (!n.queues.routed_pool.empty()) {
        const NodeId hop = *n.queues.routed_pool.front().assigned_next_hop;
        auto seg = form_segment(n.queues, hop, sc_.mac.segment_size);
        if (!seg.has_value()) break;
        n.queues.transmit_queue.push_back(std::move(*seg));
      }
    }
    kick_mac(static_cast<std::int32_t>(ni));
  }

  SelfState self_state(const NodeState& n) const {
    return SelfState{n.cfg.id, n.cfg.position, n.cfg.energy,
                     n.queues.occupancy(sc_.mac.backlog_scope) +
                         n.cfg.fixed_backlog_offset};
  }

  // ---- MAC driving ---------------------------------------------------

  void kick_mac(std::int32_t ni) {
    NodeState& n = node(ni);
    if (n.mac.phase != MacPhase::Idle || n.mac.current_segment.has_value() ||
        n.queues.transmit_queue.empty()) {
      return;
    }
    Segment seg = std::move(n.queues.transmit_queue.front());
    n.queues.transmit_queue.pop_front();
    // Consecutive segments to the same hop that queued up while the MAC was
    // busy are folded together, refilling toward the full segment size.
    while (!n.queues.transmit_queue.empty()) {
      Segment& next = n.queues.transmit_queue.front();
      if (next.next_hop != seg.next_hop ||
          seg.packets.size() + next.packets.size() >
              static_cast<std::size_t>(sc_.mac.segment_size)) {
        break;
      }
      for (auto& p : next.packets) seg.packets.push_back(std::move(p));
      n.queues.transmit_queue.pop_front();
    }
    n.mac.current_segment = std::move(seg);
    run_mac(ni, MacEventRec{MacEventType::SegmentReady, {}, {}});
  }

  void run_mac(std::int32_t ni, const MacEventRec& ev) {
    NodeState& n = node(ni);
    const auto actions = mac_step(n.mac, ev, sc_.mac, rng_);
    handle_actions(ni, actions);
  }

  void handle_actions(std::int32_t ni, const std::vector<MacAction>& actions) {
    NodeState& n = node(ni);
    for (const auto& a : actions) {
      switch (a.type) {
        case MacAction::Type::SlotAfter:
          schedule(now_ + sc_.mac.slot_time_s, EvKind::SlotTimer, ni,
                   ++n.slot_gen);
          break;
        case MacAction::Type::SlotWhenClear: {
          const double when = std::max(medium_.busy_clear_time(n.cfg.id, now_),
                                       n.defer_until) +
                              sc_.mac.slot_time_s;
          schedule(when, EvKind::SlotTimer, ni, ++n.slot_gen);
          break;
        }
        case MacAction::Type::SendRts: {
          const Segment& seg = *n.mac.current_segment;
          const double burst = burst_airtime(seg, a.indices);
          const double exchange = control_airtime() + burst +
                                  sc_.mac.slot_time_s +
                                  block_ack_airtime(a.indices.size());
          transmit(ni, make_rts(sc_.radio, n.cfg.id, seg.next_hop,
                                static_cast<std::uint16_t>(a.indices.size()),
                                burst, exchange));
          break;
        }
        case MacAction::Type::StartCtsTimer:
          schedule(now_ + sc_.mac.cts_timeout_s, EvKind::CtsTimer, ni,
                   ++n.cts_gen);
          break;
        case MacAction::Type::SendDataRound: {
          const Segment& seg = *n.mac.current_segment;
          n.burst.clear();
          for (std::size_t k = 0; k < a.indices.size(); ++k) {
            n.burst.push_back(make_data_frame(
                sc_.radio, n.cfg.id, seg.next_hop, seg.packets[a.indices[k]],
                static_cast<std::uint16_t>(k),
                static_cast<std::uint16_t>(a.indices.size())));
          }
          n.burst_next = 0;
          schedule(now_, EvKind::TxDataFrame, ni, ++n.tx_gen);
          break;
        }
        case MacAction::Type::StartAckTimer:
          schedule(now_ + sc_.mac.ack_timeout_s, EvKind::AckTimer, ni,
                   ++n.ack_gen);
          break;
        case MacAction::Type::ReturnSegmentToGeneral: {
          Segment seg = std::move(*n.mac.current_segment);
          n.mac.current_segment.reset();
          // One failure observation per abandoned segment: enough to sink a
          // hop that never answers, mild enough that a busy neighbor
          // recovers from its next few successes.
          observe_link(n, seg.next_hop, false);
          // Only undelivered packets go back; anything already confirmed by
          // an earlier round lives downstream now.
          std::int64_t returned = 0;
          for (std::size_t i = seg.packets.size(); i-- > 0;) {
            if (i < n.mac.pending_bitmap.size() && n.mac.pending_bitmap[i]) {
              continue;
            }
            seg.packets[i].assigned_next_hop.reset();
            n.queues.general_queue.push_front(std::move(seg.packets[i]));
            ++returned;
          }
          trace_.push(now_, TraceKind::SegmentReturned, node_id32(ni),
                      seg.next_hop, returned);
          try_route(static_cast<std::size_t>(ni));
          break;
        }
        case MacAction::Type::CompleteSegment:
        case MacAction::Type::DropSegment: {
          Segment seg = std::move(*n.mac.current_segment);
          n.mac.current_segment.reset();
          std::int64_t ok = 0;
          for (std::size_t i = 0; i < seg.packets.size(); ++i) {
            const bool delivered =
                a.type == MacAction::Type::CompleteSegment &&
                i < n.mac.pending_bitmap.size() && n.mac.pending_bitmap[i];
            if (delivered) {
              ++ok;
              continue;
            }
            const std::uint64_t uid = seg.packets[i].uid();
            const auto it = packets_.find(uid);
            if (it != packets_.end() && it->second.state == PkState::InNetwork &&
                it->second.owner == n.cfg.id) {
              mark_dropped(uid, n.cfg.id, TraceKind::PacketDropRetry);
            } else {
              trace_.push(now_, TraceKind::StaleCopyDiscarded, node_id32(ni),
                          static_cast<std::int64_t>(uid));
            }
          }
          trace_.push(now_, TraceKind::SegmentCompleted, node_id32(ni),
                      seg.next_hop, ok,
                      static_cast<std::int64_t>(seg.packets.size()) - ok);
          kick_mac(ni);
          break;
        }
      }
    }
  }

  void on_slot_timer(std::int32_t ni, std::uint64_t gen) {
    NodeState& n = node(ni);
    if (n.slot_gen != gen) return;
    if (n.mac.phase != MacPhase::Sensing && n.mac.phase != MacPhase::Backoff) {
      return;
    }
    const bool busy =
        medium_.channel_busy(n.cfg.id, now_) || n.defer_until > now_;
    run_mac(ni, MacEventRec{
                    busy ? MacEventType::ChannelBusy : MacEventType::ChannelIdle,
                    {},
                    {}});
  }

  // A missing CTS usually means the receiver was busy, not that the link is
  // bad, so it is not held against link quality; the retry/return machinery
  // handles unresponsive hops on its own.
  void on_cts_timer(std::int32_t ni, std::uint64_t gen) {
    NodeState& n = node(ni);
    if (n.cts_gen != gen || n.mac.phase != MacPhase::AwaitCts) return;
    run_mac(ni, MacEventRec{MacEventType::Timeout, TimeoutKind::CtsTimeout, {}});
  }

  void on_ack_timer(std::int32_t ni, std::uint64_t gen) {
    NodeState& n = node(ni);
    if (n.ack_gen != gen || n.mac.phase != MacPhase::AwaitAck) return;
    observe_link(n, n.mac.current_segment->next_hop, false);
    run_mac(ni, MacEventRec{MacEventType::Timeout, TimeoutKind::AckTimeout, {}});
  }

  void on_tx_data_frame(std::int32_t ni, std::uint64_t gen) {
    NodeState& n = node(ni);
    if (n.tx_gen != gen) return;
    if (n.burst_next >= n.burst.size()) {
      run_mac(ni, MacEventRec{MacEventType::DataBurstComplete, {}, {}});
      return;
    }
    const Frame& f = n.burst[n.burst_next++];
    const double air = frame_airtime(f, sc_.radio);
    transmit(ni, f);
    const double next_at = n.burst_next < n.burst.size()
                               ? now_ + air + sc_.radio.data_frame_gap_s
                               : now_ + air;
    schedule(next_at, EvKind::TxDataFrame, ni, gen);
  }

  void on_send_block_ack(std::int32_t ni, std::uint64_t gen) {
    NodeState& n = node(ni);
    if (!n.grant.has_value() || n.grant->gen != gen) return;
    RxGrant grant = std::move(*n.grant);
    n.grant.reset();
    if (!grant.any_received()) return;  // heard nothing: stay silent
    transmit(ni, make_block_ack(sc_.radio, n.cfg.id, grant.sender,
                                std::move(grant.bitmap)));
  }

  // ---- receptions ----------------------------------------------------

  void on_reception(std::uint64_t reception_id) {
    const Resolution res = medium_.resolve(reception_id, rng_);
    const std::size_t ni = index_.at(res.receiver);
    NodeState& n = *nodes_[ni];
    trace_.push(now_, TraceKind::FrameRx, static_cast<std::int32_t>(res.receiver),
                static_cast<std::int64_t>(res.transmission.frame.kind),
                res.transmission.tx, static_cast<std::int64_t>(res.reason));
    if (sc_.radio.rx_power_w > 0.0 && res.reason != LossReason::Deaf) {
      n.cfg.energy.drain(sc_.radio.rx_power_w *
                         (res.transmission.end - res.transmission.start));
    }
    if (!res.delivered) return;

    const Frame& f = res.transmission.frame;
    switch (f.kind) {
      case FrameKind::Beacon: on_beacon_rx(ni, std::get<Beacon>(f.payload)); break;
      case FrameKind::Rts: on_rts_rx(ni, f); break;
      case FrameKind::Cts: on_cts_rx(ni, f); break;
      case FrameKind::Data: on_data_rx(ni, f); break;
      case FrameKind::BlockAck: on_block_ack_rx(ni, f); break;
    }
  }

  void on_beacon_rx(std::size_t ni, const Beacon& b) {
    NodeState& n = *nodes_[ni];
    const auto it = n.table.records.find(b.origin);
    if (it != n.table.records.end()) {
      const int missed = beacon_miss_count(it->second.last_heard, now_,
                                           sc_.radio.beacon_period_s);
      for (int k = 0; k < missed; ++k) {
        update_link_quality(it->second, false, sc_.routing.ewma_alpha);
      }
    }
    ingest_beacon(n.table, b, now_);
    observe_link(n, b.origin, true);
    try_route(ni);
  }

  void on_rts_rx(std::size_t ni, const Frame& f) {
    NodeState& n = *nodes_[ni];
    const auto& rts = std::get<RtsInfo>(f.payload);
    if (f.dst != n.cfg.id) {
      if (sc_.mac.virtual_carrier_sense) {
        n.defer_until = std::max(n.defer_until, now_ + rts.exchange_s);
      }
      return;
    }
    // A repeat RTS from the sender we already granted means our CTS was
    // lost; the untouched grant is stale, so answer afresh.
    const bool regrant = n.grant.has_value() && n.grant->sender == f.src &&
                         !n.grant->any_received();
    if (regrant) n.grant.reset();
    const bool transmitting = medium_.busy_until(n.cfg.id) > now_;
    if (!receiver_available(n.mac.phase, n.grant.has_value(), transmitting)) {
      return;  // requester will time out and retry
    }
    RxGrant g;
    g.sender = f.src;
    g.n_frames = rts.n_frames;
    g.bitmap.assign(rts.n_frames, false);
    g.ack_due = now_ + control_airtime() + rts.burst_s + sc_.mac.slot_time_s;
    g.gen = ++n.grant_gen;
    n.grant = std::move(g);
    // Hold our own radio for the whole exchange we just granted.
    n.defer_until = std::max(
        n.defer_until, n.grant->ack_due + block_ack_airtime(rts.n_frames));
    schedule(n.grant->ack_due, EvKind::SendBlockAck,
             static_cast<std::int32_t>(ni), n.grant->gen);
    transmit(static_cast<std::int32_t>(ni),
             make_cts(sc_.radio, n.cfg.id, f.src,
                      rts.burst_s + sc_.mac.slot_time_s +
                          block_ack_airtime(rts.n_frames)));
  }

  void on_cts_rx(std::size_t ni, const Frame& f) {
    NodeState& n = *nodes_[ni];
    const auto& cts = std::get<CtsInfo>(f.payload);
    if (f.dst == n.cfg.id && n.mac.phase == MacPhase::AwaitCts &&
        n.mac.current_segment.has_value() &&
        f.src == n.mac.current_segment->next_hop) {
      ++n.cts_gen;  // cancel the pending timeout
      observe_link(n, f.src, true);
      run_mac(static_cast<std::int32_t>(ni),
              MacEventRec{MacEventType::CtsReceived, {}, {}});
      return;
    }
    if (f.dst != n.cfg.id && sc_.mac.virtual_carrier_sense) {
      n.defer_until = std::max(n.defer_until, now_ + cts.exchange_s);
    }
  }

  void on_data_rx(std::size_t ni, const Frame& f) {
    NodeState& n = *nodes_[ni];
    if (f.dst != n.cfg.id) return;
    const auto& info = std::get<DataInfo>(f.payload);
    if (n.grant.has_value() && n.grant->sender == f.src &&
        info.burst_index < n.grant->bitmap.size()) {
      n.grant->bitmap[info.burst_index] = true;
    }
    accept_packet(ni, info.packet, f.src);
  }

  // Link-layer duplicates (a lost block-ack makes the sender repeat frames
  // the receiver already has) are told apart from genuine revisits (a packet
  // legitimately bouncing back through a node during a topology transient):
  // a relay discards only what it currently holds, while a destination
  // remembers everything it has consumed.
  void accept_packet(std::size_t ni, const Packet& packet, NodeId from) {
    NodeState& n = *nodes_[ni];
    const std::uint64_t uid = packet.uid();
    auto& meta = packets_.at(uid);

    if (packet.dst == n.cfg.id) {
      if (meta.state != PkState::InNetwork || !n.consumed.insert(uid).second) {
        trace_.push(now_, TraceKind::DuplicateDiscarded, node_id32(ni),
                    static_cast<std::int64_t>(uid));
        return;
      }
      meta.state = PkState::Delivered;
      meta.owner = n.cfg.id;
      trace_.push(now_, TraceKind::PacketDelivered, node_id32(ni),
                  static_cast<std::int64_t>(uid), from, 0, packet.payload_len);
      return;
    }

    if (holds_packet(n, uid)) {
      // The copy we already hold becomes the authoritative one.
      if (meta.state == PkState::InNetwork) meta.owner = n.cfg.id;
      trace_.push(now_, TraceKind::DuplicateDiscarded, node_id32(ni),
                  static_cast<std::int64_t>(uid));
      return;
    }

    Packet onward = packet;
    onward.assigned_next_hop.reset();
    if (enqueue_outbound(n.queues, onward, sc_.mac) == EnqueueResult::QueueFull) {
      if (meta.state == PkState::InNetwork) {
        mark_dropped(uid, n.cfg.id, TraceKind::QueueDropFull);
      } else {
        trace_.push(now_, TraceKind::DuplicateDiscarded, node_id32(ni),
                    static_cast<std::int64_t>(uid));
      }
      return;
    }
    if (meta.state == PkState::InNetwork) meta.owner = n.cfg.id;
    trace_.push(now_, TraceKind::PacketForwardHop, node_id32(ni),
                static_cast<std::int64_t>(uid), from);
    try_route(ni);
  }

  static bool holds_packet(const NodeState& n, std::uint64_t uid) {
    for (const auto& p : n.queues.general_queue) {
      if (p.uid() == uid) return true;
    }
    for (const auto& p : n.queues.routed_pool) {
      if (p.uid() == uid) return true;
    }
    for (const auto& s : n.queues.transmit_queue) {
      for (const auto& p : s.packets) {
        if (p.uid() == uid) return true;
      }
    }
    if (n.mac.current_segment.has_value()) {
      for (const auto& p : n.mac.current_segment->packets) {
        if (p.uid() == uid) return true;
      }
    }
    return false;
  }

  void on_block_ack_rx(std::size_t ni, const Frame& f) {
    NodeState& n = *nodes_[ni];
    if (f.dst != n.cfg.id || n.mac.phase != MacPhase::AwaitAck ||
        !n.mac.current_segment.has_value() ||
        f.src != n.mac.current_segment->next_hop) {
      return;
    }
    ++n.ack_gen;  // cancel the pending timeout
    const auto& info = std::get<BlockAckInfo>(f.payload);
    for (std::size_t i = 0; i < n.mac.round_indices.size(); ++i) {
      observe_link(n, f.src, i < info.bitmap.size() && info.bitmap[i]);
    }
    run_mac(static_cast<std::int32_t>(ni),
            MacEventRec{MacEventType::BlockAckReceived, {}, info.bitmap});
  }

  // ---- world / metrics -----------------------------------------------

  void on_world(std::int32_t wi) {
    const WorldEvent& ev = sc_.world_events[static_cast<std::size_t>(wi)];
    switch (ev.action) {
      case WorldActionKind::SetBacklogOffset:
        node_by_id(ev.node).cfg.fixed_backlog_offset = ev.count;
        trace_.push(now_, TraceKind::WorldApplied, ev.node, 0,
                    ev.count);
        break;
      case WorldActionKind::SetResidualEnergy:
        node_by_id(ev.node).cfg.energy.set_ratio(ev.ratio);
        trace_.push(now_, TraceKind::WorldApplied, ev.node, 1, 0, 0, ev.ratio);
        break;
      case WorldActionKind::MoveNode: {
        node_by_id(ev.node).cfg.position = ev.position;
        if (dests_.count(ev.node) != 0) dests_[ev.node] = ev.position;
        trace_.push(now_, TraceKind::WorldApplied, ev.node, 2);
        break;
      }
      case WorldActionKind::StartSession: {
        SessionRt& rt = sessions_[ev.session];
        rt.enabled = true;
        if (!rt.generating && now_ < sc_.sessions[ev.session].stop_s) {
          rt.generating = true;
          rt.base_time = now_;
          rt.emitted_since_base = 0;
          schedule(now_, EvKind::TrafficGen,
                   static_cast<std::int32_t>(ev.session));
        }
        trace_.push(now_, TraceKind::SessionEvent,
                    sc_.sessions[ev.session].src,
                    static_cast<std::int64_t>(ev.session), 1);
        break;
      }
      case WorldActionKind::StopSession:
        sessions_[ev.session].enabled = false;
        trace_.push(now_, TraceKind::SessionEvent,
                    sc_.sessions[ev.session].src,
                    static_cast<std::int64_t>(ev.session), 0);
        break;
    }
  }

  void on_metrics_tick() {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const NodeState& n = *nodes_[i];
      trace_.push(now_, TraceKind::NodeSnapshot, node_id32(i),
                  n.queues.occupancy(sc_.mac.backlog_scope) +
                      n.cfg.fixed_backlog_offset,
                  static_cast<std::int64_t>(n.mac.phase), 0,
                  n.cfg.energy.ratio());
    }
    schedule(now_ + sc_.sim.metrics_tick_s, EvKind::MetricsTick, -1);
  }

  // ---- radio helpers -------------------------------------------------

  void transmit(std::int32_t ni, const Frame& f) {
    NodeState& n = node(ni);
    if (n.cfg.energy.depleted()) return;  // a drained node goes silent
    const double air = frame_airtime(f, sc_.radio);
    Transmission t;
    t.frame = f;
    t.tx = n.cfg.id;
    t.tx_pos = n.cfg.position;
    t.start = now_;
    t.end = now_ + air;
    std::vector<RadioPeer> peers;
    peers.reserve(nodes_.size() - 1);
    for (const auto& other : nodes_) {
      if (other->cfg.id != n.cfg.id) {
        peers.push_back({other->cfg.id, other->cfg.position});
      }
    }
    for (const auto& rec : medium_.transmit(t, peers)) {
      schedule(t.end, EvKind::Reception, -1, rec.id);
    }
    n.cfg.energy.drain(sc_.radio.tx_power_w * air);
    trace_.push(now_, TraceKind::FrameTx, node_id32(ni),
                static_cast<std::int64_t>(f.kind), f.dst, 0, air);
  }

  double control_airtime() const {
    return sc_.radio.preamble_s +
           sc_.radio.control_frame_bytes * 8.0 /
               (sc_.radio.control_rate_mbps * 1e6);
  }

  double block_ack_airtime(std::size_t n_frames) const {
    const double bytes =
        sc_.radio.block_ack_base_bytes + (n_frames + 7) / 8;
    return sc_.radio.preamble_s +
           bytes * 8.0 / (sc_.radio.control_rate_mbps * 1e6);
  }

  double burst_airtime(const Segment& seg,
                       const std::vector<std::uint16_t>& indices) const {
    double total = 0.0;
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const Frame f = make_data_frame(sc_.radio, 0, 0, seg.packets[indices[k]],
                                      0, 1);
      total += frame_airtime(f, sc_.radio);
      if (k + 1 < indices.size()) total += sc_.radio.data_frame_gap_s;
    }
    return total;
  }

  void observe_link(NodeState& n, NodeId neighbor, bool success) {
    const auto it = n.table.records.find(neighbor);
    if (it != n.table.records.end()) {
      update_link_quality(it->second, success, sc_.routing.ewma_alpha);
    }
  }

  void mark_dropped(std::uint64_t uid, NodeId where, TraceKind kind) {
    auto& meta = packets_.at(uid);
    meta.state = PkState::Dropped;
    meta.owner = where;
    trace_.push(now_, kind, static_cast<std::int32_t>(where),
                static_cast<std::int64_t>(uid));
  }

  // ---- finalization --------------------------------------------------

  void finalize(RunResult& out) {
    for (const auto& np : nodes_) {
      out.residual_j[np->cfg.id] = np->cfg.energy.residual_j;
    }
    for (const auto& [uid, meta] : packets_) {
      ++out.generated;
      switch (meta.state) {
        case PkState::Delivered: ++out.delivered; break;
        case PkState::Dropped: ++out.dropped; break;
        case PkState::InNetwork: ++out.in_network_at_end; break;
      }
    }
    // Conservation cross-check: every in-network packet must sit in exactly
    // one queue (or the in-flight segment) of its owning node. Copies left
    // behind when a block-ack was lost are skipped by the ownership test.
    std::int64_t queued = 0;
    const auto owned_here = [this](const Packet& p, NodeId here) {
      const auto it = packets_.find(p.uid());
      return it != packets_.end() && it->second.state == PkState::InNetwork &&
             it->second.owner == here;
    };
    for (const auto& np : nodes_) {
      const NodeState& n = *np;
      for (const auto& p : n.queues.general_queue) {
        if (owned_here(p, n.cfg.id)) ++queued;
      }
      for (const auto& p : n.queues.routed_pool) {
        if (owned_here(p, n.cfg.id)) ++queued;
      }
      for (const auto& s : n.queues.transmit_queue) {
        for (const auto& p : s.packets) {
          if (owned_here(p, n.cfg.id)) ++queued;
        }
      }
      if (n.mac.current_segment.has_value()) {
        for (const auto& p : n.mac.current_segment->packets) {
          if (owned_here(p, n.cfg.id)) ++queued;
        }
      }
    }
    if (queued != out.in_network_at_end) {
      throw std::logic_error("packet conservation violated: " +
                             std::to_string(queued) + " queued vs " +
                             std::to_string(out.in_network_at_end) +
                             " unaccounted");
    }
  }

  NodeState& node(std::int32_t ni) { return *nodes_[static_cast<std::size_t>(ni)]; }
  NodeState& node_by_id(NodeId id) { return *nodes_[index_.at(id)]; }
  std::int32_t node_id32(std::size_t ni) const {
    return static_cast<std::int32_t>(nodes_[ni]->cfg.id);
  }
  std::int32_t node_id32(std::int32_t ni) const {
    return node_id32(static_cast<std::size_t>(ni));
  }

  const Scenario& sc_;
  Rng rng_;
  Medium medium_;
  EventTrace trace_;
  std::vector<std::unique_ptr<NodeState>> nodes_;
  std::map<NodeId, std::size_t> index_;
  DestRegistry dests_;
  UtilityFn utility_;
  std::vector<SessionRt> sessions_;
  std::map<NodeId, std::uint32_t> src_seq_;
  std::unordered_map<std::uint64_t, PkMeta> packets_;
  std::priority_queue<Ev, std::vector<Ev>, EvOrder> pq_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
};

// Executes one seeded run to completion.
inline RunResult run(const Scenario& scenario, std::uint64_t seed) {
  Engine engine(scenario, seed);
  return engine.run();
}

}  // namespace seeknet
