#pragma once

// Flat chronological record of everything observable in a run. The digest is
// 64-bit FNV-1a over a fixed-width little-endian packing of every record, so
// two runs are identical exactly when their digests match. Records can also
// be dumped as newline-delimited JSON for debugging and plotting.

#include <cstdint>
#include <cstring>
#include <ostream>
#include <vector>

namespace seeknet {

enum class TraceKind : std::uint16_t {
  PacketGenerated = 1,   // node=src, a=uid, b=session, x=payload bytes
  QueueDropFull,         // node=where, a=uid
  PacketDelivered,       // node=final dst, a=uid, b=last hop, x=payload bytes
  PacketForwardHop,      // node=receiving relay, a=uid, b=transmitter
  DuplicateDiscarded,    // node=receiver, a=uid
  PacketDropRetry,       // node=sender, a=uid (retry budget exhausted)
  StaleCopyDiscarded,    // node=sender, a=uid (copy of an already-owned packet)
  FrameTx,               // node=tx, a=frame kind, b=dst, x=airtime
  FrameRx,               // node=rx, a=frame kind, b=src, c=loss reason (0=ok)
  SegmentReturned,       // node, a=next hop, b=packets returned
  SegmentCompleted,      // node, a=next hop, b=delivered, c=lost
  BeaconSent,            // node, a=advertised backlog, x=energy ratio
  WorldApplied,          // node(or -1), a=action code, x=value
  NodeSnapshot,          // node, a=backlog, b=mac phase, x=energy ratio
  SessionEvent,          // node=src, a=session, b=1 start / 0 stop
};

inline const char* to_string(TraceKind k) {
  switch (k) {
    case TraceKind::PacketGenerated: return "packet_generated";
    case TraceKind::QueueDropFull: return "queue_drop_full";
    case TraceKind::PacketDelivered: return "packet_delivered";
    case TraceKind::PacketForwardHop: return "packet_forward_hop";
    case TraceKind::DuplicateDiscarded: return "duplicate_discarded";
    case TraceKind::PacketDropRetry: return "packet_drop_retry";
    case TraceKind::StaleCopyDiscarded: return "stale_copy_discarded";
    case TraceKind::FrameTx: return "frame_tx";
    case TraceKind::FrameRx: return "frame_rx";
    case TraceKind::SegmentReturned: return "segment_returned";
    case TraceKind::SegmentCompleted: return "segment_completed";
    case TraceKind::BeaconSent: return "beacon_sent";
    case TraceKind::WorldApplied: return "world_applied";
    case TraceKind::NodeSnapshot: return "node_snapshot";
    case TraceKind::SessionEvent: return "session_event";
  }
  return "?";
}

struct TraceRecord {
  double t = 0.0;
  TraceKind kind = TraceKind::PacketGenerated;
  std::int32_t node = -1;
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::int64_t c = 0;
  double x = 0.0;
};

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

inline void fnv1a_accumulate(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

class EventTrace {
 public:
  void push(TraceRecord r) {
    canonical_accumulate(r);
    records_.push_back(r);
  }

  void push(double t, TraceKind kind, std::int32_t node, std::int64_t a = 0,
            std::int64_t b = 0, std::int64_t c = 0, double x = 0.0) {
    push(TraceRecord{t, kind, node, a, b, c, x});
  }

  const std::vector<TraceRecord>& records() const { return records_; }
  std::uint64_t digest() const { return digest_; }

  void write_ndjson(std::ostream& os) const {
    char buf[256];
    for (const auto& r : records_) {
      std::snprintf(buf, sizeof(buf),
                    "{\"t\":%.9f,\"kind\":\"%s\",\"node\":%d,\"a\":%lld,"
                    "\"b\":%lld,\"c\":%lld,\"x\":%.9g}\n",
                    r.t, to_string(r.kind), r.node,
                    static_cast<long long>(r.a), static_cast<long long>(r.b),
                    static_cast<long long>(r.c), r.x);
      os << buf;
    }
  }

 private:
  void canonical_accumulate(const TraceRecord& r) {
    std::uint64_t bits;
    std::memcpy(&bits, &r.t, sizeof(bits));
    fnv1a_accumulate(digest_, &bits, sizeof(bits));
    const std::uint16_t k = static_cast<std::uint16_t>(r.kind);
    fnv1a_accumulate(digest_, &k, sizeof(k));
    fnv1a_accumulate(digest_, &r.node, sizeof(r.node));
    fnv1a_accumulate(digest_, &r.a, sizeof(r.a));
    fnv1a_accumulate(digest_, &r.b, sizeof(r.b));
    fnv1a_accumulate(digest_, &r.c, sizeof(r.c));
    std::memcpy(&bits, &r.x, sizeof(bits));
    fnv1a_accumulate(digest_, &bits, sizeof(bits));
  }

  std::vector<TraceRecord> records_;
  std::uint64_t digest_ = kFnvOffset;
};

}  // namespace seeknet
