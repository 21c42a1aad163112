#pragma once

// Shared half-duplex medium. transmit() fans a frame out to every node
// inside the cutoff range and returns the receptions to schedule; collision
// state is settled incrementally: a new transmission marks every pending
// reception it overlaps at a common receiver, and inherits collided status
// from them. No capture effect: overlapping frames are all lost.

#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "seeknet/core.hpp"
#include "seeknet/link_model.hpp"
#include "seeknet/rng.hpp"

namespace seeknet {

struct HalfDuplexViolation : std::logic_error {
  explicit HalfDuplexViolation(NodeId n)
      : std::logic_error("node " + std::to_string(n) +
                         " started a transmission while already on air") {}
};

struct RadioPeer {
  NodeId id = 0;
  GeoPosition position;
};

enum class LossReason : std::uint8_t { None, Collision, ChannelError, Deaf };

struct Reception {
  std::uint64_t id = 0;
  Transmission transmission;
  NodeId receiver = 0;
  double distance_m = 0.0;
  bool collided = false;
  bool deaf = false;   // receiver was transmitting during the frame
};

struct Resolution {
  Transmission transmission;
  NodeId receiver = 0;
  double distance_m = 0.0;
  bool delivered = false;
  LossReason reason = LossReason::None;
};

class Medium {
 public:
  Medium(LinkModel model, double cutoff_m)
      : model_(std::move(model)), cutoff_m_(cutoff_m) {}

  // Starts a transmission at t.start and returns the receptions scheduled to
  // resolve at t.end (one per node in range). Peers must not include t.tx.
  std::vector<Reception> transmit(const Transmission& t,
                                  const std::vector<RadioPeer>& peers) {
    if (busy_until(t.tx) > t.start) throw HalfDuplexViolation(t.tx);
    tx_busy_[t.tx] = t.end;

    // The new carrier deafens any reception in progress at the transmitter.
    for (auto& r : pending_) {
      if (r.receiver == t.tx && r.transmission.end > t.start) r.deaf = true;
    }

    std::vector<Reception> out;
    for (const auto& peer : peers) {
      const double d = distance_between(t.tx_pos, peer.position);
      if (d >= cutoff_m_) continue;
      Reception r;
      r.id = next_id_++;
      r.transmission = t;
      r.receiver = peer.id;
      r.distance_m = d;
      for (auto& other : pending_) {
        if (other.receiver == peer.id && other.transmission.end > t.start) {
          other.collided = true;
          r.collided = true;
        }
      }
      out.push_back(r);
    }
    for (const auto& r : out) pending_.push_back(r);
    return out;
  }

  // Resolves a reception due now: collision and deafness dominate, otherwise
  // a Bernoulli draw against the calibrated link probability decides.
  Resolution resolve(std::uint64_t reception_id, Rng& rng) {
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      if (pending_[i].id != reception_id) continue;
      const Reception r = pending_[i];
      pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(i));

      Resolution res;
      res.transmission = r.transmission;
      res.receiver = r.receiver;
      res.distance_m = r.distance_m;
      if (r.collided) {
        res.reason = LossReason::Collision;
      } else if (r.deaf || busy_until(r.receiver) > r.transmission.end) {
        res.reason = LossReason::Deaf;
      } else {
        const double p =
            link_reliability(model_, r.transmission.frame.rate_mbps, r.distance_m);
        if (rng.bernoulli(p)) {
          res.delivered = true;
        } else {
          res.reason = LossReason::ChannelError;
        }
      }
      return res;
    }
    throw std::logic_error("unknown reception id");
  }

  // Physical carrier sense at a node: energy arriving (pending receptions)
  // or the node's own transmitter still on air.
  bool channel_busy(NodeId node, double now) const {
    return busy_clear_time(node, now) > now;
  }

  double busy_clear_time(NodeId node, double now) const {
    double t = now;
    const auto it = tx_busy_.find(node);
    if (it != tx_busy_.end()) t = std::max(t, it->second);
    for (const auto& r : pending_) {
      if (r.receiver == node) t = std::max(t, r.transmission.end);
    }
    return t;
  }

  double busy_until(NodeId node) const {
    const auto it = tx_busy_.find(node);
    return it == tx_busy_.end() ? 0.0 : it->second;
  }

  const LinkModel& model() const { return model_; }
  double cutoff() const { return cutoff_m_; }

 private:
  LinkModel model_;
  double cutoff_m_;
  std::uint64_t next_id_ = 1;
  std::vector<Reception> pending_;
  std::unordered_map<NodeId, double> tx_busy_;
};

}  // namespace seeknet
