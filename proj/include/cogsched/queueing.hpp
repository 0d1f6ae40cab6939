#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "cogsched/rng.hpp"

namespace cogsched {

using Slot = std::int64_t;

struct Packet {
  Slot arrival_slot = 0;
  std::optional<Slot> departure_slot;
};

/// Slots spent in the buffer, counting both the arrival and the departure
/// slot. Asserts that the packet has departed.
Slot packet_delay(const Packet& packet);

/// FIFO buffer of one secondary user. The head-of-line packet keeps its
/// remaining nats across service interruptions (preemptive-resume).
class UserQueue {
 public:
  explicit UserQueue(double packet_length);

  bool empty() const { return arrivals_.empty(); }
  std::size_t size() const { return arrivals_.size(); }
  double packet_length() const { return packet_length_; }
  /// Remaining nats of the HOL packet; equals packet_length() when empty.
  double hol_remaining() const { return hol_remaining_; }
  Slot hol_arrival() const { return arrivals_.front(); }

  void push(Slot arrival_slot);

  struct ServeResult {
    double sent = 0.0;
    bool completed = false;
    Packet departed;  // meaningful only when completed
  };

  /// Transmits min(rate, hol_remaining) nats of the HOL packet in `slot`.
  /// The queue must be non-empty.
  ServeResult serve(double rate, Slot slot);

 private:
  std::deque<Slot> arrivals_;
  double packet_length_;
  double hol_remaining_;
};

/// Bernoulli(lambda) arrival stamped with `slot`; returns the number added.
int arrive(UserQueue& queue, double lambda, Slot slot, Engine& rng);

inline UserQueue::ServeResult serve_slot(UserQueue& queue, double rate, Slot slot) {
  return queue.serve(rate, slot);
}

/// One idle period followed by one busy period.
struct FrameRecord {
  std::size_t index = 0;
  Slot start_slot = 0;
  Slot idle_len = 0;
  Slot busy_len = 0;
  std::vector<double> delay_sum;         // per user, over packets that arrived in the frame
  std::vector<std::size_t> arrivals;     // per user
  double interference_energy = 0.0;      // sum of power * true g over the frame

  Slot length() const { return idle_len + busy_len; }
};

enum class SlotPhase { idle, busy };

/// Splits the slot timeline into frames. Per slot the caller invokes
/// begin_slot() after arrivals have landed and end_slot() after service.
///
/// A slot that starts with every buffer empty is idle, even if packets
/// arrive in it; that arrival slot closes the idle period and service
/// begins in the following slot. The busy period ends in the slot that
/// leaves every buffer empty.
class FrameTracker {
 public:
  explicit FrameTracker(std::size_t users);

  /// True when `slot` will be the first slot of a new frame.
  bool at_frame_start() const { return at_frame_start_; }

  SlotPhase begin_slot(Slot slot, std::size_t backlog_before_arrivals, std::size_t arrivals);
  void record_arrival(std::size_t user);
  void record_departure(std::size_t user, Slot delay);
  void add_interference(double energy);
  /// Returns the completed frame when this slot drained the system.
  std::optional<FrameRecord> end_slot(std::size_t backlog_after);

  const FrameRecord& current() const { return current_; }
  std::size_t frames_completed() const { return completed_; }

 private:
  void reset_current(Slot start);

  std::size_t users_;
  FrameRecord current_;
  std::size_t completed_ = 0;
  bool in_idle_ = true;
  bool at_frame_start_ = true;
  SlotPhase phase_ = SlotPhase::idle;
};

/// Long-run average delay of `user` over completed frames; empty when the
/// user had no arrivals.
std::optional<double> long_run_delay(std::span<const FrameRecord> frames, std::size_t user);

}  // namespace cogsched
