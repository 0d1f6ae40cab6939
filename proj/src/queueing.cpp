#include "cogsched/queueing.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace cogsched {

Slot packet_delay(const Packet& packet) {
  assert(packet.departure_slot.has_value());
  assert(*packet.departure_slot >= packet.arrival_slot);
  return *packet.departure_slot - packet.arrival_slot + 1;
}

UserQueue::UserQueue(double packet_length)
    : packet_length_(packet_length), hol_remaining_(packet_length) {
  if (!(packet_length > 0.0)) throw std::invalid_argument("packet length must be positive");
}

void UserQueue::push(Slot arrival_slot) {
  arrivals_.push_back(arrival_slot);
}

UserQueue::ServeResult UserQueue::serve(double rate, Slot slot) {
  assert(!arrivals_.empty());
  assert(rate >= 0.0);
  ServeResult result;
  result.sent = std::min(rate, hol_remaining_);
  hol_remaining_ -= result.sent;
  if (hol_remaining_ <= 0.0) {
    result.completed = true;
    result.departed.arrival_slot = arrivals_.front();
    result.departed.departure_slot = slot;
    arrivals_.pop_front();
    hol_remaining_ = packet_length_;
  }
  return result;
}

int arrive(UserQueue& queue, double lambda, Slot slot, Engine& rng) {
  if (uniform01(rng) < lambda) {
    queue.push(slot);
    return 1;
  }
  return 0;
}

FrameTracker::FrameTracker(std::size_t users) : users_(users) {
  reset_current(0);
}

void FrameTracker::reset_current(Slot start) {
  current_ = FrameRecord{};
  current_.index = completed_;
  current_.start_slot = start;
  current_.delay_sum.assign(users_, 0.0);
  current_.arrivals.assign(users_, 0);
}

SlotPhase FrameTracker::begin_slot(Slot slot, [[maybe_unused]] std::size_t backlog_before_arrivals,
                                   std::size_t arrivals) {
  if (at_frame_start_) current_.start_slot = slot;
  at_frame_start_ = false;
  if (in_idle_) {
    assert(backlog_before_arrivals == 0);
    ++current_.idle_len;
    if (arrivals > 0) in_idle_ = false;
    phase_ = SlotPhase::idle;
  } else {
    ++current_.busy_len;
    phase_ = SlotPhase::busy;
  }
  return phase_;
}

void FrameTracker::record_arrival(std::size_t user) {
  ++current_.arrivals[user];
}

void FrameTracker::record_departure(std::size_t user, Slot delay) {
  current_.delay_sum[user] += static_cast<double>(delay);
}

void FrameTracker::add_interference(double energy) {
  current_.interference_energy += energy;
}

std::optional<FrameRecord> FrameTracker::end_slot(std::size_t backlog_after) {
  if (phase_ != SlotPhase::busy || backlog_after != 0) return std::nullopt;
  FrameRecord done = std::move(current_);
  ++completed_;
  in_idle_ = true;
  at_frame_start_ = true;
  reset_current(done.start_slot + done.length());
  return done;
}

std::optional<double> long_run_delay(std::span<const FrameRecord> frames, std::size_t user) {
  double delay = 0.0;
  std::size_t count = 0;
  for (const auto& frame : frames) {
    delay += frame.delay_sum[user];
    count += frame.arrivals[user];
  }
  if (count == 0) return std::nullopt;
  return delay / static_cast<double>(count);
}

}  // namespace cogsched
