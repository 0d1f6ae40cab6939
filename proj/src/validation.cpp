#include "cogsched/validation.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "cogsched/simulator.hpp"

namespace cogsched::validation {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double exponential(Engine& rng, double rate) {
  return -std::log1p(-uniform01(rng)) / rate;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

// Truncated exponential density on [0, max].
double density(const GainDistribution& d, double x) {
  return std::exp(-x / d.mean) / d.mean / -std::expm1(-d.max_gain / d.mean);
}

}  // namespace

double ServiceLaw::mean() const {
  switch (kind) {
    case Kind::deterministic: return a;
    case Kind::exponential: return a;
    case Kind::uniform: return 0.5 * (a + b);
    case Kind::two_point: return p * a + (1.0 - p) * b;
  }
  return 0.0;
}

double ServiceLaw::second_moment() const {
  switch (kind) {
    case Kind::deterministic: return a * a;
    case Kind::exponential: return 2.0 * a * a;
    case Kind::uniform: return (a * a + a * b + b * b) / 3.0;
    case Kind::two_point: return p * a * a + (1.0 - p) * b * b;
  }
  return 0.0;
}

double ServiceLaw::sample(Engine& rng) const {
  switch (kind) {
    case Kind::deterministic: return a;
    case Kind::exponential: return exponential(rng, 1.0 / a);
    case Kind::uniform: return a + (b - a) * uniform01(rng);
    case Kind::two_point: return uniform01(rng) < p ? a : b;
  }
  return 0.0;
}

DesResult simulate_priority_queue(const std::vector<PriorityClass>& classes, std::size_t packets,
                                  std::uint64_t seed, std::size_t batches) {
  const std::size_t k = classes.size();
  if (k == 0 || batches < 2) throw std::invalid_argument("need classes and at least two batches");
  Engine arrivals = make_stream(seed, StreamPurpose::validation, 100);
  Engine service = make_stream(seed, StreamPurpose::validation, 101);

  struct Job {
    double arrival;
    double remaining;
  };
  std::vector<std::deque<Job>> queue(k);
  std::vector<double> next_arrival(k, kInf);
  for (std::size_t c = 0; c < k; ++c) {
    if (classes[c].lambda > 0.0) next_arrival[c] = exponential(arrivals, classes[c].lambda);
  }
  std::vector<std::vector<double>> sojourn(k);
  const std::size_t warmup = std::max<std::size_t>(1000, packets / 50);
  std::size_t done = 0;
  double now = 0.0;

  while (done < warmup + packets) {
    const auto first = std::min_element(next_arrival.begin(), next_arrival.end());
    const double t_arrival = *first;
    std::size_t busy = k;
    for (std::size_t c = 0; c < k; ++c) {
      if (!queue[c].empty()) {
        busy = c;
        break;
      }
    }
    const double t_done = busy < k ? now + queue[busy].front().remaining : kInf;
    if (t_done <= t_arrival) {
      const Job job = queue[busy].front();
      queue[busy].pop_front();
      now = t_done;
      if (done >= warmup) sojourn[busy].push_back(now - job.arrival);
      ++done;
    } else {
      if (!std::isfinite(t_arrival)) throw std::invalid_argument("no arrivals and nothing to serve");
      if (busy < k) queue[busy].front().remaining -= t_arrival - now;
      now = t_arrival;
      const auto c = static_cast<std::size_t>(first - next_arrival.begin());
      queue[c].push_back(Job{now, classes[c].service.sample(service)});
      next_arrival[c] = now + exponential(arrivals, classes[c].lambda);
    }
  }

  DesResult r;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& xs = sojourn[c];
    r.completed.push_back(xs.size());
    r.sojourn_mean.push_back(mean_of(xs));
    const std::size_t per = xs.size() / batches;
    if (per == 0) {
      r.sojourn_se.push_back(kInf);
      continue;
    }
    std::vector<double> means;
    for (std::size_t b = 0; b < batches; ++b) {
      double s = 0.0;
      for (std::size_t i = b * per; i < (b + 1) * per; ++i) s += xs[i];
      means.push_back(s / static_cast<double>(per));
    }
    const double m = mean_of(means);
    double ss = 0.0;
    for (double x : means) ss += (x - m) * (x - m);
    r.sojourn_se.push_back(std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches)));
  }
  return r;
}

std::vector<double> priority_queue_formula(const std::vector<PriorityClass>& classes) {
  // Classic preemptive-resume M/G/1 result: the job waits out the residual
  // work of its own and higher classes, then every higher-priority arrival
  // during its stay.
  std::vector<double> out;
  double sigma_prev = 0.0;
  double residual = 0.0;
  for (const auto& c : classes) {
    const double sigma = sigma_prev + c.lambda * c.service.mean();
    residual += c.lambda * c.service.second_moment() / 2.0;
    if (sigma >= 1.0) {
      out.push_back(kInf);
    } else {
      out.push_back(c.service.mean() / (1.0 - sigma_prev) + residual / ((1.0 - sigma_prev) * (1.0 - sigma)));
    }
    sigma_prev = sigma;
  }
  return out;
}

double mu_quadrature(const UserProfile& profile, const LinkParams& link, double power) {
  using boost::math::quadrature::gauss_kronrod;
  if (power <= 0.0) return 0.0;
  const auto& dg = profile.direct;
  const auto& di = profile.interference;
  auto inner = [&](double p_eff) {
    auto f = [&](double gamma) { return std::log1p(p_eff * gamma) * density(dg, gamma); };
    return gauss_kronrod<double, 61>::integrate(f, 0.0, dg.max_gain, 15, 1e-12);
  };
  auto outer = [&](double g) {
    const double p_eff = g > 0.0 ? std::min(link.inst_threshold / g, power) : power;
    return inner(p_eff) * density(di, g);
  };
  // The cap switches on at g = I_inst / P; split there so both pieces are smooth.
  const double knee = link.inst_threshold / power;
  double total = 0.0;
  if (knee < di.max_gain) {
    total += gauss_kronrod<double, 61>::integrate(outer, 0.0, knee, 15, 1e-10);
    total += gauss_kronrod<double, 61>::integrate(outer, knee, di.max_gain, 15, 1e-10);
  } else {
    total += gauss_kronrod<double, 61>::integrate(outer, 0.0, di.max_gain, 15, 1e-10);
  }
  return total / link.packet_length;
}

PsiModel random_psi_instance(const ServiceTable& table, std::size_t users, Engine& rng) {
  const std::size_t types = table.users();
  const double g_bar[] = {0.1, 0.4};
  std::vector<PsiUser> out(users);
  const double target = 0.3 + 0.6 * uniform01(rng);  // load at P_max
  std::vector<double> share(users);
  double total = 0.0;
  for (auto& s : share) total += (s = 0.2 + uniform01(rng));
  for (std::size_t i = 0; i < users; ++i) {
    const std::size_t t = std::min(types - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(types)));
    const double lambda = target * share[i] / total / table.at_max(t).es;
    const double y = 1000.0 * uniform01(rng);
    auto& u = out[i];
    u.weight = y * lambda;
    for (std::size_t m = 0; m < table.grid().size(); ++m) {
      const auto& s = table.at(t, m);
      u.mean_service.push_back(s.es);
      u.rho.push_back(lambda * s.es);
      u.residual.push_back(lambda * s.es2 / 2.0);
      u.energy.push_back(lambda * s.es * table.grid()[m] * g_bar[std::min<std::size_t>(t, 1)]);
    }
  }
  const double x = 100.0 * uniform01(rng);
  return PsiModel(std::vector<double>(table.grid().values().begin(), table.grid().values().end()), std::move(out), x);
}

DpCheck dp_versus_brute(std::size_t instances, std::size_t grid_points, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  LinkParams link;
  link.packet_length = 5.0;
  std::vector<UserProfile> types(2);
  types[1].interference = GainDistribution{0.4, 4.0};
  ServiceTable::Options opt;
  opt.seed = seed;
  const auto table = ServiceTable::build(types, link, PowerGrid(0.1, 100.0, grid_points), opt);

  Engine rng = make_stream(seed, StreamPurpose::validation, 1);
  DpCheck check;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = 2 + k % 3;
    const PsiModel model = random_psi_instance(table, n, rng);
    const auto dp = doac_opt(model);
    const auto brute = doac_brute(model);
    ++check.instances;
    if (dp.objective != brute.objective) {
      ++check.mismatches;
      if (std::isfinite(brute.objective) && brute.objective > 0.0) {
        check.max_relative_gap = std::max(check.max_relative_gap, (dp.objective - brute.objective) / brute.objective);
      }
    }
    if (brute.objective > dp.objective) check.brute_never_worse = false;
  }
  check.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return check;
}

QueueCheck queue_formula_versus_des(std::size_t packets, std::uint64_t seed) {
  using K = ServiceLaw::Kind;
  const std::vector<std::vector<PriorityClass>> cases = {
      {{0.2, {K::two_point, 1.0, 3.0, 0.5}}},
      {{0.5, {K::exponential, 1.0}}},
      {{0.15, {K::uniform, 1.0, 3.0}}, {0.2, {K::deterministic, 1.5}}},
      {{0.1, {K::exponential, 2.0}}, {0.25, {K::two_point, 1.0, 2.0, 0.7}}},
      {{0.1, {K::deterministic, 1.0}}, {0.1, {K::exponential, 2.0}}, {0.1, {K::uniform, 1.0, 5.0}}},
      {{0.2, {K::two_point, 1.0, 2.0, 0.5}}, {0.1, {K::deterministic, 2.0}}, {0.05, {K::exponential, 3.0}}},
  };
  QueueCheck out;
  std::uint64_t s = seed;
  for (const auto& classes : cases) {
    const auto sim = simulate_priority_queue(classes, packets, s++);
    double sigma = 0.0;
    double residual = 0.0;
    for (std::size_t j = 0; j < classes.size(); ++j) {
      const auto& c = classes[j];
      const double rho = c.lambda * c.service.mean();
      residual += c.lambda * c.service.second_moment() / 2.0;
      const double predicted = waiting_time(1.0 / c.service.mean(), rho, sigma, residual);
      const double z = std::abs(sim.sojourn_mean[j] - predicted) / sim.sojourn_se[j];
      ++out.cases;
      out.worst_z = std::max(out.worst_z, z);
      const bool ok = z <= 3.0;
      if (!ok) ++out.failures;
      char buf[160];
      std::snprintf(buf, sizeof buf, "N=%zu class %zu load %.2f: formula %.4f sim %.4f +- %.4f (z %.2f)%s",
                    classes.size(), j + 1, sigma + rho, predicted, sim.sojourn_mean[j], sim.sojourn_se[j], z,
                    ok ? "" : " FAIL");
      out.lines.emplace_back(buf);
      sigma += rho;
    }
  }
  return out;
}

bool upper_bound_dominates(const ServiceTable& table, double lambda) {
  for (std::size_t u = 0; u < table.users(); ++u) {
    for (std::size_t m = 0; m < table.grid().size(); ++m) {
      const auto& s = table.at(u, m);
      const double rho = lambda * s.es;
      const double tr = lambda * s.es2 / 2.0;
      for (double prev : {0.0, 0.05, 0.1, 0.2, 0.3}) {
        for (double extra : {0.0, 0.01, 0.05, 0.1}) {
          const double w = waiting_time(s.service_rate(), rho, prev, tr);
          const double wu = waiting_time_upper(s.service_rate(), rho, prev + extra, tr);
          if (!(wu >= w)) return false;
          if (extra > 0.0 && std::isfinite(w) && !(wu > w)) return false;
        }
      }
    }
  }
  return true;
}

std::vector<SuiteResult> run_all(std::uint64_t seed) {
  std::vector<SuiteResult> out;
  char buf[256];

  {
    const auto dp = dp_versus_brute(60, 16, seed);
    std::snprintf(buf, sizeof buf, "%zu/%zu instances equal, max gap %.3g%%, %.2fs", dp.instances - dp.mismatches,
                  dp.instances, 100.0 * dp.max_relative_gap, dp.seconds);
    out.push_back({"subset DP equals exhaustive search", dp.mismatches == 0, buf});
  }
  {
    const auto q = queue_formula_versus_des(50'000, seed);
    std::snprintf(buf, sizeof buf, "%zu/%zu classes within 3 SE, worst z %.2f", q.cases - q.failures, q.cases,
                  q.worst_z);
    out.push_back({"priority-queue formula versus simulation", q.failures == 0, buf});
  }
  {
    DiscreteRateLaw law{{0, 1, 2}, {0.5, 0.25, 0.25}};
    Engine rng = make_stream(seed, StreamPurpose::validation, 2);
    const auto r = service_time_stochastic_bound_check(law, 5, 100'000, rng);
    std::snprintf(buf, sizeof buf, "%d points, max raw gap %.2e", r.points_checked, r.max_violation);
    out.push_back({"negative-binomial service-time bound", r.holds, buf});
  }
  {
    UserProfile p;
    LinkParams link;
    Engine rng = make_stream(seed, StreamPurpose::validation, 3);
    const double mc = estimate_mu(p, link, 100.0, 200'000, rng);
    const double quad = mu_quadrature(p, link, 100.0);
    const double rel = std::abs(mc - quad) / quad;
    std::snprintf(buf, sizeof buf, "Monte Carlo %.6g vs quadrature %.6g (%.3f%%)", mc, quad, 100.0 * rel);
    out.push_back({"mean rate versus quadrature", rel < 0.01, buf});
  }
  {
    std::size_t violations = 0;
    for (double alpha : {0.0, 0.1}) {
      SimConfig c;
      c.link.packet_length = 5.0;
      c.link.csi.alpha = alpha;
      c.horizon = 100'000;
      c.seed = seed;
      for (int i = 1; i <= 5; ++i) {
        UserProfile u;
        u.lambda = 0.02 * i;
        u.delay_bound = i == 5 ? 5.0 : 25.0;
        if (i == 5) u.interference = GainDistribution{0.4, 4.0};
        c.users.push_back(u);
      }
      for (Policy p : {Policy::doac, Policy::maxweight}) {
        c.policy = p;
        const auto m = run(c);
        violations += m.inst_violations + m.single_violations;
      }
    }
    std::snprintf(buf, sizeof buf, "%zu violations", violations);
    out.push_back({"per-slot interference cap and single transmitter", violations == 0, buf});
  }
  return out;
}

}  // namespace cogsched::validation
