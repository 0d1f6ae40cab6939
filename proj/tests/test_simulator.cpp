#include <doctest.h>

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "cogsched/simulator.hpp"

using namespace cogsched;

namespace {

SimConfig desk(Policy policy, double lambda, Slot horizon, std::uint64_t seed = 7) {
  SimConfig c;
  c.users.resize(5);
  for (std::size_t i = 0; i < 5; ++i) {
    c.users[i].lambda = lambda * double(i + 1);
    c.users[i].delay_bound = i == 4 ? 5.0 : 25.0;
  }
  c.users[4].interference = GainDistribution{0.4, 4.0};
  c.link.packet_length = 5.0;
  c.policy = policy;
  c.horizon = horizon;
  c.seed = seed;
  c.table.mu_samples = 20'000;
  c.table.moment_trials = 5'000;
  return c;
}

std::shared_ptr<const ServiceTable> desk_table() {
  static const auto table = build_table(desk(Policy::doac, 0.02, 1));
  return table;
}

Metrics run_desk(const SimConfig& c, std::ostream* trace = nullptr, std::ostream* flog = nullptr) {
  RunOptions ro;
  ro.table = desk_table();
  ro.slot_trace = trace;
  ro.frame_log = flog;
  return run(c, ro);
}

// One user, two-slot service, a packet every third slot.
const char* kHandTrace =
    "# users=1\n# policy=doic\n# seed=0\n# horizon=12\n# lambda=0.34\n# delay_bound=DBOUND\n# V=0\n"
    "# avg_threshold=0.1\n# inst_threshold=20\n# packet_length=2\n# stability_eps=0.05\n"
    "# admission_scaled=0\n# pmin_index=0\n# pmin=1\n"
    "slot,arrivals,user,gamma,g,gamma_used,g_used,power,rate,sent,completed,interference\n"
    "0,1,0,1,0.5,1,0.5,1,1,1,0,0.5\n1,0,0,1,0.5,1,0.5,1,1,1,1,0.5\n"
    "3,1,0,1,0.5,1,0.5,1,1,1,0,0.5\n4,0,0,1,0.5,1,0.5,1,1,1,1,0.5\n"
    "6,1,0,1,0.5,1,0.5,1,1,1,0,0.5\n7,0,0,1,0.5,1,0.5,1,1,1,1,0.5\n"
    "9,1,0,1,0.5,1,0.5,1,1,1,0,0.5\n10,0,0,1,0.5,1,0.5,1,1,1,1,0.5\n"
    "# fallback_frames=0\n";

std::string hand_trace(const std::string& d) {
  std::string s = kHandTrace;
  s.replace(s.find("DBOUND"), 6, d);
  return s;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("config validation") {
  auto c = desk(Policy::doac, 0.02, 100);
  CHECK_NOTHROW(c.validate());
  c.horizon = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = desk(Policy::doac, 0.02, 100);
  c.users[0].lambda = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = desk(Policy::doac, 0.02, 100);
  c.users.clear();
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("no traffic") {
  const auto m = run_desk(desk(Policy::doac, 0.0, 5'000));
  CHECK(m.frames == 0);
  CHECK(m.avg_interference == 0.0);
  CHECK(m.sum_delay == 0.0);
  for (const auto& d : m.delay) CHECK_FALSE(d);
  for (auto a : m.arrivals) CHECK(a == 0);
}

TEST_CASE("hand-computed deterministic queue") {
  std::istringstream in(hand_trace("5"));
  const auto m = replay_trace(in);
  CHECK(m.frames == 4);
  REQUIRE(m.delay[0]);
  CHECK(*m.delay[0] == 2.0);
  CHECK(m.packets[0] == 4);
  CHECK(m.energy == doctest::Approx(4.0));
  CHECK(m.avg_interference == doctest::Approx(4.0 / 12));
  // Frames of 2, 3, 3, 3 slots, each with energy 1.
  CHECK(m.x == doctest::Approx(2.9));
  // V = 0: r is 0 on the first frame, then d whenever Y > 0.
  CHECK(m.y[0] == 0.0);
  std::istringstream tight(hand_trace("1"));
  const auto m1 = replay_trace(tight);
  CHECK(m1.y[0] == 5.0);
  CHECK(m1.y_ratio[0] == doctest::Approx(1.25));
  CHECK(m1.inst_violations == 0);
  CHECK(m1.single_violations == 0);
}

TEST_CASE("replay flags broken traces") {
  std::string s = hand_trace("5");
  const std::string row = "3,1,0,1,0.5,1,0.5,1,1,1,0,0.5\n";
  s.insert(s.find(row), row);
  std::istringstream twice(s);
  CHECK(replay_trace(twice).single_violations == 1);

  std::string hot = hand_trace("5");
  hot.replace(hot.find("0,1,0,1,0.5,1,0.5,1,1,1,0,0.5"), 29, "0,1,0,1,0.5,1,0.5,50,1,1,0,25.");
  std::istringstream over(hot);
  CHECK(replay_trace(over).inst_violations == 1);

  std::istringstream missing("slot,arrivals\n");
  CHECK_THROWS(replay_trace(missing));
}

TEST_CASE("every policy is deterministic and replays exactly") {
  for (Policy p : {Policy::doic, Policy::doac, Policy::subopt, Policy::csma, Policy::maxweight}) {
    CAPTURE(to_string(p));
    const auto c = desk(p, 0.02, 30'000, 11);
    std::stringstream trace;
    const auto a = run_desk(c, &trace);
    const auto b = run_desk(c);
    CHECK(a == b);
    const auto back = replay_trace(trace);
    CHECK(back == a);
    CHECK(a.inst_violations == 0);
    CHECK(a.single_violations == 0);
    CHECK(a.frames > 1000);
  }
}

TEST_CASE("a table that does not fit is rebuilt") {
  auto c = desk(Policy::doic, 0.02, 2'000);
  c.grid_points = 8;
  RunOptions ro;
  ro.table = desk_table();
  CHECK_NOTHROW(run(c, ro));
}

TEST_CASE("hard constraints hold with CSI errors") {
  for (double alpha : {0.0, 0.1}) {
    auto c = desk(Policy::doac, 0.02, 200'000, 3);
    c.link.csi.alpha = alpha;
    RunOptions ro;
    if (alpha == 0.0) ro.table = desk_table();
    const auto m = run(c, ro);
    CHECK(m.inst_violations == 0);
    CHECK(m.single_violations == 0);
    CHECK(m.max_slot_interference <= c.link.inst_threshold * (1 + 1e-12));
  }
}

TEST_CASE("frame log has one row per frame") {
  std::stringstream flog;
  const auto m = run_desk(desk(Policy::doac, 0.02, 20'000), nullptr, &flog);
  std::string line;
  std::getline(flog, line);
  CHECK(line == "frame,start,idle,busy,priority,power,y,x,r,fallback");
  std::size_t rows = 0;
  while (std::getline(flog, line)) ++rows;
  CHECK(rows == m.frames);
}

TEST_CASE("plan powers respect the load floor") {
  std::vector<std::vector<double>> powers;
  RunOptions ro;
  ro.table = desk_table();
  ro.plan_powers = &powers;
  const auto m = run(desk(Policy::doac, 0.015, 50'000, 4), ro);
  REQUIRE(!powers.empty());
  for (const auto& frame : powers) {
    for (double p : frame) {
      CHECK(p >= m.pmin);
      CHECK(p <= 100.0);
    }
  }
  CHECK(m.fallback_frames == 0);
}

TEST_CASE("stability monitor") {
  // Y only stops growing once Y lambda passes V, so a small V settles early.
  auto small_v = desk(Policy::doac, 0.01, 200'000);
  small_v.v = 1.0;
  const auto m = run_desk(small_v);
  const auto ok = stability_monitor(m, 0.05);
  CHECK(ok.all_stable());
  CHECK(ok.y_settle_frame <= 10'000);

  // A zero delay target cannot be met: that user's debt grows every frame.
  auto c = desk(Policy::doac, 0.01, 100'000);
  c.users[2].delay_bound = 0.0;
  const auto bad = stability_monitor(run_desk(c), 0.05);
  CHECK_FALSE(bad.y_stable[2]);
  CHECK(bad.y_ratio[2] > 0.5);
  CHECK_FALSE(bad.all_stable());
}

TEST_CASE("larger V takes longer to settle") {
  std::size_t prev = 0;
  for (double v : {25.0, 50.0, 100.0}) {
    auto c = desk(Policy::doac, 0.01, 300'000);
    c.v = v;
    const auto m = run_desk(c);
    CAPTURE(v);
    CHECK(m.y_settle_frame >= prev);
    prev = m.y_settle_frame;
  }
}

TEST_CASE("overload triggers admission scaling") {
  const auto m = run_desk(desk(Policy::doic, 0.2, 20'000));
  CHECK(m.admission_scaled);
  double load = 0.0;
  for (std::size_t i = 0; i < 5; ++i) load += m.lambda[i] * desk_table()->at_max(i).es;
  CHECK(load == doctest::Approx(0.9));
  CHECK(m.pmin_index == desk_table()->grid().size() - 1);
  CHECK_FALSE(run_desk(desk(Policy::doic, 0.02, 2'000)).admission_scaled);
}

TEST_CASE("metrics csv") {
  std::stringstream out;
  write_metrics_header(out, 5);
  const auto m = run_desk(desk(Policy::subopt, 0.02, 5'000));
  write_metrics_row(out, "subopt", 0.02, m);
  std::string header, row;
  std::getline(out, header);
  std::getline(out, row);
  CHECK(header.rfind("label,policy,lambda,seed,slots,frames,delay_1", 0) == 0);
  CHECK(std::count(header.begin(), header.end(), ',') == std::count(row.begin(), row.end(), ','));
  CHECK(row.rfind("subopt,subopt,0.02", 0) == 0);
}

}  // TEST_SUITE
