#pragma once

// CSMA/CA channel access with an RTS/CTS handshake, segment bursts, block
// acknowledgment and selective-repeat ARQ. mac_step is a pure transition
// function: the event loop feeds it one event at a time and interprets the
// returned actions (transmissions, timers, queue movements). Stale timers
// are filtered by the caller via generation counters before they get here,
// so any impossible (phase, event) pair is a simulator bug.

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "seeknet/core.hpp"
#include "seeknet/rng.hpp"

namespace seeknet {

enum class MacPhase : std::uint8_t {
  Idle,
  Sensing,
  Backoff,
  AwaitCts,
  TxData,
  AwaitAck,
};

inline const char* to_string(MacPhase p) {
  switch (p) {
    case MacPhase::Idle: return "IDLE";
    case MacPhase::Sensing: return "SENSING";
    case MacPhase::Backoff: return "BACKOFF";
    case MacPhase::AwaitCts: return "AWAIT_CTS";
    case MacPhase::TxData: return "TX_DATA";
    case MacPhase::AwaitAck: return "AWAIT_ACK";
  }
  return "?";
}

enum class BacklogScope : std::uint8_t { GeneralOnly, BothQueues };

struct MacConfig {
  double slot_time_s = 20e-6;
  int cw_min = 16;
  int cw_max = 1024;
  double cts_timeout_s = 5e-3;
  double ack_timeout_s = 5e-3;
  int max_rts_retries = 4;
  int max_data_retries = 7;
  bool arq_enabled = true;
  int segment_size = 32;
  std::size_t queue_capacity = 2000;
  bool virtual_carrier_sense = true;
  BacklogScope backlog_scope = BacklogScope::BothQueues;
};

// General queue holds packets awaiting a route; the transmit queue holds
// routed segments. Packets stamped with a next hop sit briefly in
// routed_pool between route assignment and segment formation.
struct QueuePair {
  std::deque<Packet> general_queue;
  std::deque<Packet> routed_pool;
  std::deque<Segment> transmit_queue;

  std::int64_t occupancy(BacklogScope scope) const {
    std::int64_t n = static_cast<std::int64_t>(general_queue.size()) +
                     static_cast<std::int64_t>(routed_pool.size());
    if (scope == BacklogScope::BothQueues) {
      for (const auto& s : transmit_queue) {
        n += static_cast<std::int64_t>(s.packets.size());
      }
    }
    return n;
  }
};

enum class EnqueueResult : std::uint8_t { Ok, QueueFull };

inline EnqueueResult enqueue_outbound(QueuePair& queues, Packet packet,
                                      const MacConfig& cfg) {
  if (queues.general_queue.size() >= cfg.queue_capacity) {
    return EnqueueResult::QueueFull;
  }
  packet.assigned_next_hop.reset();
  queues.general_queue.push_back(std::move(packet));
  return EnqueueResult::Ok;
}

// Pulls up to segment_size packets routed to next_hop out of the routed
// pool, preserving their order. Returns nothing once the pool holds no
// packet for that hop; a short segment is formed rather than held back.
inline std::optional<Segment> form_segment(QueuePair& queues, NodeId next_hop,
                                           int segment_size) {
  Segment seg;
  seg.next_hop = next_hop;
  auto it = queues.routed_pool.begin();
  while (it != queues.routed_pool.end() &&
         static_cast<int>(seg.packets.size()) < segment_size) {
    if (it->assigned_next_hop == next_hop) {
      seg.packets.push_back(*it);
      it = queues.routed_pool.erase(it);
    } else {
      ++it;
    }
  }
  if (seg.packets.empty()) return std::nullopt;
  return seg;
}

enum class MacEventType : std::uint8_t {
  SegmentReady,
  ChannelIdle,
  ChannelBusy,
  CtsReceived,
  BlockAckReceived,
  Timeout,
  DataBurstComplete,
};

enum class TimeoutKind : std::uint8_t { CtsTimeout, AckTimeout, DataStall };

struct MacEventRec {
  MacEventType type = MacEventType::ChannelIdle;
  TimeoutKind timeout = TimeoutKind::CtsTimeout;
  std::vector<bool> bitmap;  // BlockAckReceived: per-frame flags, burst order
};

struct MacAction {
  enum class Type : std::uint8_t {
    SendRts,                  // indices = packets of the coming round
    SendDataRound,            // indices = packets to transmit back-to-back
    StartCtsTimer,
    StartAckTimer,
    SlotAfter,                // re-sense after one slot_time
    SlotWhenClear,            // re-sense once the channel clears
    ReturnSegmentToGeneral,   // hop unresponsive; packets go back for rerouting
    CompleteSegment,          // exchange over; lost = packets never delivered
    DropSegment,              // segment abandoned entirely
  };
  // For ReturnSegmentToGeneral / CompleteSegment / DropSegment the segment is
  // still in current_segment; the caller consumes it and resets the slot.
  Type type;
  std::vector<std::uint16_t> indices;
  int lost = 0;
};

struct IllegalTransition : std::logic_error {
  IllegalTransition(MacPhase phase, MacEventType ev)
      : std::logic_error(std::string("illegal MAC transition from ") +
                         to_string(phase) + " on event " +
                         std::to_string(static_cast<int>(ev))) {}
};

struct MacState {
  MacPhase phase = MacPhase::Idle;
  int backoff_slots_remaining = 0;
  int contention_window = 16;
  std::optional<Segment> current_segment;
  std::vector<bool> pending_bitmap;      // per-packet delivered flags
  std::vector<std::uint16_t> round_indices;

  std::vector<std::uint16_t> undelivered() const {
    std::vector<std::uint16_t> out;
    for (std::uint16_t i = 0; i < pending_bitmap.size(); ++i) {
      if (!pending_bitmap[i]) out.push_back(i);
    }
    return out;
  }
};

namespace detail {

inline std::vector<MacAction> enter_contention(MacState& s) {
  s.phase = MacPhase::Sensing;
  return {{MacAction::Type::SlotAfter, {}, 0}};
}

inline std::vector<MacAction> fire_rts(MacState& s) {
  s.phase = MacPhase::AwaitCts;
  s.round_indices = s.undelivered();
  std::vector<MacAction> out;
  out.push_back({MacAction::Type::SendRts, s.round_indices, 0});
  out.push_back({MacAction::Type::StartCtsTimer, {}, 0});
  return out;
}

// Shared by BlockAckReceived and AckTimeout (timeout = all-missing bitmap).
inline std::vector<MacAction> settle_round(MacState& s, const MacConfig& cfg,
                                           const std::vector<bool>& bitmap) {
  for (std::size_t i = 0; i < s.round_indices.size(); ++i) {
    const bool ok = i < bitmap.size() && bitmap[i];
    if (ok) s.pending_bitmap[s.round_indices[i]] = true;
  }
  const int missing = static_cast<int>(s.undelivered().size());
  if (missing == 0) {
    s.phase = MacPhase::Idle;
    return {{MacAction::Type::CompleteSegment, {}, 0}};
  }
  if (cfg.arq_enabled && s.current_segment->retries_data < cfg.max_data_retries) {
    s.current_segment->retries_data += 1;
    return enter_contention(s);
  }
  s.phase = MacPhase::Idle;
  return {{MacAction::Type::CompleteSegment, {}, missing}};
}

}  // namespace detail

inline std::vector<MacAction> on_timeout(MacState& s, TimeoutKind kind,
                                         const MacConfig& cfg);

// Deterministic CSMA/CA transition step. The caller owns timing: ChannelIdle
// and ChannelBusy arrive at slot boundaries, Timeout events only when still
// relevant. Backoff draws are uniform over [0, contention_window).
inline std::vector<MacAction> mac_step(MacState& s, const MacEventRec& ev,
                                       const MacConfig& cfg, Rng& rng) {
  switch (ev.type) {
    case MacEventType::SegmentReady:
      if (s.phase != MacPhase::Idle || !s.current_segment.has_value()) {
        throw IllegalTransition(s.phase, ev.type);
      }
      s.pending_bitmap.assign(s.current_segment->packets.size(), false);
      return detail::enter_contention(s);

    case MacEventType::ChannelIdle:
      if (s.phase == MacPhase::Sensing) {
        s.backoff_slots_remaining =
            static_cast<int>(rng.below(static_cast<std::uint64_t>(s.contention_window)));
        s.phase = MacPhase::Backoff;
        if (s.backoff_slots_remaining == 0) return detail::fire_rts(s);
        return {{MacAction::Type::SlotAfter, {}, 0}};
      }
      if (s.phase == MacPhase::Backoff) {
        s.backoff_slots_remaining -= 1;
        if (s.backoff_slots_remaining <= 0) return detail::fire_rts(s);
        return {{MacAction::Type::SlotAfter, {}, 0}};
      }
      throw IllegalTransition(s.phase, ev.type);

    case MacEventType::ChannelBusy:
      if (s.phase == MacPhase::Sensing || s.phase == MacPhase::Backoff) {
        return {{MacAction::Type::SlotWhenClear, {}, 0}};
      }
      throw IllegalTransition(s.phase, ev.type);

    case MacEventType::CtsReceived:
      if (s.phase != MacPhase::AwaitCts) throw IllegalTransition(s.phase, ev.type);
      s.contention_window = cfg.cw_min;
      s.phase = MacPhase::TxData;
      return {{MacAction::Type::SendDataRound, s.round_indices, 0}};

    case MacEventType::DataBurstComplete:
      if (s.phase != MacPhase::TxData) throw IllegalTransition(s.phase, ev.type);
      s.phase = MacPhase::AwaitAck;
      return {{MacAction::Type::StartAckTimer, {}, 0}};

    case MacEventType::BlockAckReceived:
      if (s.phase != MacPhase::AwaitAck) throw IllegalTransition(s.phase, ev.type);
      return detail::settle_round(s, cfg, ev.bitmap);

    case MacEventType::Timeout:
      return on_timeout(s, ev.timeout, cfg);
  }
  throw IllegalTransition(s.phase, ev.type);
}

// Timer expiries. CtsTimeout retries the handshake under binary exponential
// backoff until the RTS budget runs out, then bounces the segment back to
// the general queue for rerouting. AckTimeout behaves like an all-missing
// block-ack; DataStall is its ARQ-disabled alias.
inline std::vector<MacAction> on_timeout(MacState& s, TimeoutKind kind,
                                         const MacConfig& cfg) {
  switch (kind) {
    case TimeoutKind::CtsTimeout: {
      if (s.phase != MacPhase::AwaitCts) {
        throw IllegalTransition(s.phase, MacEventType::Timeout);
      }
      s.current_segment->retries_rts += 1;
      if (s.current_segment->retries_rts <= cfg.max_rts_retries) {
        s.contention_window = std::min(s.contention_window * 2, cfg.cw_max);
        return detail::enter_contention(s);
      }
      s.phase = MacPhase::Idle;
      return {{MacAction::Type::ReturnSegmentToGeneral, {}, 0}};
    }
    case TimeoutKind::AckTimeout:
    case TimeoutKind::DataStall: {
      if (s.phase != MacPhase::AwaitAck) {
        throw IllegalTransition(s.phase, MacEventType::Timeout);
      }
      return detail::settle_round(s, cfg, {});
    }
  }
  throw IllegalTransition(s.phase, MacEventType::Timeout);
}

// Receiver-side grant for one burst: which DATA frames of the announced
// round have arrived, and when the block-ack is due.
struct RxGrant {
  NodeId sender = 0;
  std::uint16_t n_frames = 0;
  std::vector<bool> bitmap;
  double ack_due = 0.0;
  std::uint64_t gen = 0;

  bool any_received() const {
    for (bool b : bitmap) {
      if (b) return true;
    }
    return false;
  }
};

// A node answers an RTS only when nothing else claims its radio: no active
// grant, no exchange of its own past contention (a frozen backoff is fine).
inline bool receiver_available(MacPhase phase, bool has_grant,
                               bool transmitting_now) {
  if (has_grant || transmitting_now) return false;
  return phase == MacPhase::Idle || phase == MacPhase::Sensing ||
         phase == MacPhase::Backoff;
}

}  // namespace seeknet
