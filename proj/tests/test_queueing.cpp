#include <doctest.h>

#include <vector>

#include "cogsched/queueing.hpp"

using namespace cogsched;

TEST_SUITE("queueing") {

TEST_CASE("bernoulli arrivals") {
  UserQueue q(1000.0);
  Engine rng = make_stream(21, StreamPurpose::arrivals, 0);
  int n = 0;
  for (Slot t = 0; t < 1000; ++t) n += arrive(q, 0.0, t, rng);
  CHECK(n == 0);
  for (Slot t = 0; t < 1000; ++t) n += arrive(q, 1.0, t, rng);
  CHECK(n == 1000);
  UserQueue big(1.0);
  n = 0;
  for (Slot t = 0; t < 1'000'000; ++t) n += arrive(big, 0.3, t, rng);
  CHECK(n / 1e6 == doctest::Approx(0.3).epsilon(0.002 / 0.3));
}

TEST_CASE("head-of-line accounting") {
  UserQueue q(1000.0);
  q.push(0);
  q.push(0);
  auto r = q.serve(100.0, 1);
  CHECK(r.sent == 100.0);
  CHECK(q.hol_remaining() == 900.0);
  CHECK_FALSE(r.completed);

  UserQueue q2(1000.0);
  q2.push(3);
  q2.serve(950.0, 3);
  r = q2.serve(100.0, 4);
  CHECK(r.sent == 50.0);
  CHECK(r.completed);
  CHECK(*r.departed.departure_slot == 4);

  UserQueue q3(100.0);
  q3.push(0);
  q3.push(1);
  r = q3.serve(100.0, 2);
  CHECK(r.completed);
  CHECK(q3.size() == 1);
  CHECK(q3.hol_remaining() == 100.0);
}

TEST_CASE("inclusive delay") {
  CHECK(packet_delay(Packet{5, 5}) == 1);
  CHECK(packet_delay(Packet{5, 9}) == 5);
}

TEST_CASE("frame boundaries follow the idle and busy periods") {
  // Slots 1-3 empty, an arrival in slot 4, the system drains in slot 9.
  FrameTracker f(1);
  CHECK(f.at_frame_start());
  for (Slot t = 1; t <= 3; ++t) {
    CHECK(f.begin_slot(t, 0, 0) == SlotPhase::idle);
    CHECK_FALSE(f.end_slot(0));
  }
  CHECK(f.begin_slot(4, 0, 1) == SlotPhase::idle);
  f.record_arrival(0);
  CHECK_FALSE(f.end_slot(1));
  for (Slot t = 5; t <= 8; ++t) {
    CHECK(f.begin_slot(t, 1, 0) == SlotPhase::busy);
    CHECK_FALSE(f.end_slot(1));
  }
  CHECK(f.begin_slot(9, 1, 0) == SlotPhase::busy);
  f.record_departure(0, 6);
  auto frame = f.end_slot(0);
  REQUIRE(frame);
  CHECK(frame->idle_len == 4);
  CHECK(frame->busy_len == 5);
  CHECK(frame->length() == 9);
  CHECK(frame->start_slot == 1);
  CHECK(frame->arrivals[0] == 1);
  CHECK(frame->delay_sum[0] == 6.0);
  CHECK(f.at_frame_start());
  // An arrival while busy is not a boundary.
  CHECK(f.begin_slot(10, 0, 1) == SlotPhase::idle);
  CHECK(f.begin_slot(11, 1, 1) == SlotPhase::busy);
  CHECK_FALSE(f.end_slot(2));
}

TEST_CASE("long-run delay over frames") {
  FrameRecord one;
  one.delay_sum = {7.0};
  one.arrivals = {1};
  CHECK(*long_run_delay(std::vector<FrameRecord>{one}, 0) == 7.0);
  FrameRecord a, b;
  a.delay_sum = {10.0};
  a.arrivals = {2};
  b.delay_sum = {20.0};
  b.arrivals = {3};
  CHECK(*long_run_delay(std::vector<FrameRecord>{a, b}, 0) == 6.0);
  FrameRecord none;
  none.delay_sum = {0.0};
  none.arrivals = {0};
  CHECK_FALSE(long_run_delay(std::vector<FrameRecord>{none}, 0));
}

TEST_CASE("queue recursion and conservation on a random single-queue run") {
  UserQueue q(3.0);
  Engine rng = make_stream(22, StreamPurpose::arrivals, 0);
  std::size_t arrived = 0, departed = 0, len = 0;
  for (Slot t = 0; t < 200'000; ++t) {
    const int a = arrive(q, 0.25, t, rng);
    arrived += a;
    std::size_t s = 0;
    if (!q.empty()) {
      const auto r = q.serve(4.0 * uniform01(rng), t);
      s = r.completed ? 1 : 0;
      if (r.completed) CHECK(packet_delay(r.departed) >= 1);
    }
    departed += s;
    len = len + a - s;
    CHECK(q.size() == len);
    CHECK(q.hol_remaining() >= 0.0);
    CHECK(q.hol_remaining() <= 3.0);
  }
  CHECK(arrived == departed + q.size());
}

}  // TEST_SUITE
