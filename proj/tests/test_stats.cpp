#include <doctest.h>

#include <boost/math/distributions/negative_binomial.hpp>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "cogsched/stats.hpp"
#include "cogsched/validation.hpp"

using namespace cogsched;

namespace {

std::vector<UserProfile> desk_users(double lambda) {
  std::vector<UserProfile> users(5);
  for (int i = 0; i < 5; ++i) users[i].lambda = (i + 1) * lambda;
  users[4].interference = GainDistribution{0.4, 4.0};
  return users;
}

LinkParams desk_link() {
  LinkParams link;
  link.packet_length = 5.0;
  return link;
}

std::vector<double> lambdas_of(const std::vector<UserProfile>& users) {
  std::vector<double> out;
  for (const auto& u : users) out.push_back(u.lambda);
  return out;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("power grid is log spaced and ends at the maximum") {
  const PowerGrid g(0.1, 100.0, 64);
  CHECK(g.size() == 64);
  CHECK(g[0] == doctest::Approx(0.1));
  CHECK(g.max() == 100.0);
  for (std::size_t m = 1; m + 1 < g.size(); ++m) CHECK(g[m + 1] / g[m] == doctest::Approx(g[m] / g[m - 1]));
}

TEST_CASE("mean rate") {
  UserProfile p;
  LinkParams link;
  Engine rng = make_stream(31, StreamPurpose::estimation, 0);
  CHECK(estimate_mu(p, link, 0.0, 10'000, rng) == 0.0);
  CHECK_THROWS_AS(estimate_mu(p, link, -1.0, 10'000, rng), std::invalid_argument);
  // 1000-nat packets, P = 100: against the quadrature oracle within 1%.
  const double mc = estimate_mu(p, link, 100.0, 200'000, rng);
  const double quad = validation::mu_quadrature(p, link, 100.0);
  CHECK(mc == doctest::Approx(quad).epsilon(0.01));
  // Monotone on the grid.
  const PowerGrid grid(0.1, 100.0, 64);
  const auto curve = estimate_mu_curve(p, link, grid.values(), 20'000, rng);
  for (std::size_t m = 1; m < curve.size(); ++m) CHECK(curve[m] >= curve[m - 1]);
}

TEST_CASE("quadrature oracle reduces to a one-dimensional integral without the cap") {
  // With I_inst huge the cap never binds: E[ln(1 + P gamma)] / L.
  UserProfile p;
  LinkParams link;
  link.inst_threshold = 1e12;
  link.packet_length = 1.0;
  const double norm = -std::expm1(-10.0);
  double ref = 0.0;
  const int n = 2'000'000;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) * 10.0 / n;
    ref += std::log1p(3.0 * x) * std::exp(-x) / norm * (10.0 / n);
  }
  CHECK(validation::mu_quadrature(p, link, 3.0) == doctest::Approx(ref).epsilon(1e-7));
}

TEST_CASE("service moments in the long-packet regime") {
  UserProfile p;
  LinkParams link;  // 1000-nat packets
  Engine rng = make_stream(32, StreamPurpose::estimation, 1);
  const auto mom = estimate_service_moments(p, link, 100.0, 20'000, rng);
  REQUIRE(mom);
  const double quad = validation::mu_quadrature(p, link, 100.0);
  CHECK(mom->mean == doctest::Approx(1.0 / quad).epsilon(0.02));
  CHECK(mom->second >= mom->mean * mom->mean);
  CHECK(mom->mean >= 1.0);
  CHECK_FALSE(estimate_service_moments(p, link, 0.0, 100, rng));
}

TEST_CASE("residual time") {
  CHECK(residual_time(std::vector<LoadTerm>{}) == 0.0);
  CHECK(residual_time(std::vector<LoadTerm>{{0.2, 4.0}}) == doctest::Approx(0.4));
  const std::vector<LoadTerm> a{{0.1, 3.0}, {0.2, 5.0}};
  const std::vector<LoadTerm> b{{0.05, 7.0}};
  std::vector<LoadTerm> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  CHECK(residual_time(ab) == doctest::Approx(residual_time(a) + residual_time(b)));
}

TEST_CASE("waiting time formula") {
  CHECK(waiting_time(0.5, 0.4, 0.0, 0.4) == doctest::Approx(2.0 + 0.4 / 0.6));
  CHECK(waiting_time(0.5, 0.4, 0.0, 0.0) == doctest::Approx(2.0));
  CHECK(waiting_time(0.5, 0.4, 0.3, 0.0) == doctest::Approx(2.0 / 0.7));
  CHECK(std::isinf(waiting_time(0.5, 0.4, 0.6, 0.4)));
  CHECK(std::isinf(waiting_time(0.5, 0.4, 1.0, 0.4)));
  CHECK(waiting_time(0.5, 0.4, 0.5999999, 0.4) > 1e5);

  // Deterministic service of 2 slots: E[s^2] = 4, so the same 2.6667.
  using K = validation::ServiceLaw::Kind;
  const auto sim = validation::simulate_priority_queue({{0.2, {K::deterministic, 2.0}}}, 100'000, 33);
  CHECK(std::abs(sim.sojourn_mean[0] - 8.0 / 3.0) <= 3.0 * sim.sojourn_se[0]);
}

TEST_CASE("upper-bound waiting time") {
  CHECK(waiting_time_upper(0.5, 0.4, 0.1, 0.4) == waiting_time(0.5, 0.4, 0.1, 0.4));
  CHECK(waiting_time_upper(0.5, 0.4, 0.2, 0.4) > waiting_time(0.5, 0.4, 0.1, 0.4));
  const auto users = desk_users(0.02);
  const auto table = ServiceTable::build(users, desk_link(), PowerGrid(0.1, 100.0, 64));
  CHECK(validation::upper_bound_dominates(table, 0.05));
}

TEST_CASE("load bound recursion") {
  const std::vector<std::size_t> order{2, 0, 1};
  const std::vector<double> load{0.1, 0.2, 0.15};
  const auto bounds = rho_bar_max_recursion(order, [&](std::size_t u, double) { return load[u]; });
  REQUIRE(bounds.size() == 4);
  CHECK(bounds[0] == 0.0);
  CHECK(bounds[1] == doctest::Approx(0.15));
  CHECK(bounds[3] == doctest::Approx(0.45));
  for (std::size_t j = 1; j < bounds.size(); ++j) CHECK(bounds[j] >= bounds[j - 1]);
  const auto single = rho_bar_max_recursion(std::vector<std::size_t>{0}, [](std::size_t, double) { return 0.3; });
  CHECK(single[1] == doctest::Approx(0.3));
}

TEST_CASE("minimum power for the load margin") {
  const auto users = desk_users(0.02);
  const auto table = ServiceTable::build(users, desk_link(), PowerGrid(0.1, 100.0, 64));
  const auto lam = lambdas_of(users);
  const std::size_t m = find_pmin(table, lam, 0.1);
  CHECK(total_load(table, lam, m) <= 0.9);
  REQUIRE(m > 0);
  CHECK(total_load(table, lam, m - 1) > 0.9);

  // Smaller arrivals never need more power.
  std::size_t prev = m;
  for (double scale : {0.8, 0.5, 0.2}) {
    std::vector<double> l = lam;
    for (double& x : l) x *= scale;
    const std::size_t k = find_pmin(table, l, 0.1);
    CHECK(k <= prev);
    prev = k;
  }

  std::vector<double> heavy = lam;
  for (double& x : heavy) x *= 10.0;
  CHECK_THROWS_AS(find_pmin(table, heavy, 0.1), InfeasibleError);
}

TEST_CASE("thousand-nat packets overload the cell at lambda = 0.01") {
  std::vector<UserProfile> users(5);
  for (int i = 0; i < 5; ++i) users[i].lambda = 0.01 * (i + 1);
  users[4].interference = GainDistribution{0.4, 4.0};
  ServiceTable::Options opt;
  opt.mu_samples = 10'000;
  opt.moment_trials = 2'000;
  const auto table = ServiceTable::build(users, LinkParams{}, PowerGrid(10.0, 100.0, 4), opt);
  CHECK(total_load(table, lambdas_of(users), 3) > 10.0);
  CHECK_THROWS_AS(find_pmin(table, lambdas_of(users), 0.1), InfeasibleError);
}

TEST_CASE("admission scaling") {
  const std::vector<double> rates{1.0, 1.0};
  auto s = admission_scale(std::vector<double>{0.5, 0.5}, rates, 0.1);
  CHECK(s[0] == doctest::Approx(0.45));
  s = admission_scale(std::vector<double>{1.0, 1.0}, rates, 0.1);
  CHECK(s[0] == doctest::Approx(0.45));
  const std::vector<double> r2{0.3, 0.7};
  s = admission_scale(std::vector<double>{0.4, 0.9}, r2, 0.1);
  CHECK(s[0] / 0.3 + s[1] / 0.7 == doctest::Approx(0.9).epsilon(1e-14));
}

TEST_CASE("service table csv round trip") {
  const auto users = desk_users(0.02);
  ServiceTable::Options opt;
  opt.mu_samples = 10'000;
  opt.moment_trials = 2'000;
  const auto table = ServiceTable::build(users, desk_link(), PowerGrid(0.1, 100.0, 8), opt);
  std::stringstream ss;
  table.write_csv(ss);
  CHECK(ss.str().rfind("user,P,mu,es,es2\n", 0) == 0);
  const auto back = ServiceTable::read_csv(ss);
  REQUIRE(back.users() == table.users());
  REQUIRE(back.grid().size() == table.grid().size());
  for (std::size_t u = 0; u < table.users(); ++u) {
    for (std::size_t m = 0; m < table.grid().size(); ++m) {
      CHECK(back.at(u, m).es == table.at(u, m).es);
      CHECK(back.at(u, m).es2 == table.at(u, m).es2);
      CHECK(back.at(u, m).mu == table.at(u, m).mu);
      CHECK(back.grid()[m] == table.grid()[m]);
    }
  }
  // Identical laws share one estimate.
  for (std::size_t m = 0; m < table.grid().size(); ++m) CHECK(table.at(0, m).es == table.at(3, m).es);
  std::stringstream bad("user,P,mu,es\n0,1,2,3\n");
  CHECK_THROWS(ServiceTable::read_csv(bad));
}

TEST_CASE("negative-binomial service bound") {
  Engine rng = make_stream(34, StreamPurpose::validation, 0);
  // Never a zero-rate slot: the bound is the deterministic L slots.
  const DiscreteRateLaw sure{{1, 2}, {0.5, 0.5}};
  CHECK(service_time_stochastic_bound_check(sure, 5, 10'000, rng).holds);
  // Bernoulli rate with one-unit packets: s is geometric, the bound is tight.
  const DiscreteRateLaw coin{{0, 1}, {0.3, 0.7}};
  const auto tight = service_time_stochastic_bound_check(coin, 1, 100'000, rng);
  CHECK(tight.holds);
  CHECK(std::abs(tight.max_violation) < 0.01);
  const DiscreteRateLaw fixture{{0, 1, 2}, {0.5, 0.25, 0.25}};
  const auto r = service_time_stochastic_bound_check(fixture, 5, 100'000, rng);
  CHECK(r.holds);
  CHECK(r.zero_probability == doctest::Approx(0.5));
  CHECK(r.points_checked > 10);
  // A law quantized from the channel itself.
  UserProfile p;
  const auto law = discretize_rate_law(p, desk_link(), 5.0, 1.0, 50'000, rng);
  CHECK(law.zero_probability() > 0.0);
  CHECK(service_time_stochastic_bound_check(law, 5, 100'000, rng).holds);
}

TEST_CASE("two-point rate law gives negative-binomial moments") {
  // Rate 0 w.p. q, else 1 unit: s = trials to collect L successes.
  const double q = 0.4;
  const int units = 5;
  const DiscreteRateLaw law{{0, 1}, {q, 1.0 - q}};
  Engine rng = make_stream(35, StreamPurpose::validation, 0);
  double s1 = 0.0, s2 = 0.0;
  const int n = 200'000;
  for (int k = 0; k < n; ++k) {
    int acc = 0, t = 0;
    while (acc < units) {
      acc += law.sample(rng);
      ++t;
    }
    s1 += t;
    s2 += double(t) * t;
  }
  const boost::math::negative_binomial_distribution<double> nb(units, 1.0 - q);
  const double mean = boost::math::mean(nb) + units;
  const double second = boost::math::variance(nb) + mean * mean;
  CHECK(s1 / n == doctest::Approx(mean).epsilon(0.005));
  CHECK(s2 / n == doctest::Approx(second).epsilon(0.01));
}

}  // TEST_SUITE
