#include "cogsched/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cogsched {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::size_t> order_by_score(std::span<const double> score) {
  std::vector<std::size_t> order(score.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  return order;
}

}  // namespace

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::doic: return "doic";
    case Policy::doac: return "doac";
    case Policy::subopt: return "subopt";
    case Policy::csma: return "csma";
    case Policy::maxweight: return "maxweight";
  }
  return "unknown";
}

std::optional<Policy> parse_policy(std::string_view name) {
  for (Policy p : {Policy::doic, Policy::doac, Policy::subopt, Policy::csma, Policy::maxweight}) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

void FramePlan::validate(std::size_t users, double max_power) const {
  if (power.size() != users) throw std::invalid_argument("plan needs one power per user");
  for (double p : power) {
    if (!(p >= 0.0) || p > max_power) throw std::invalid_argument("plan power outside [0, P_max]");
  }
  if (mode != SchedulingMode::priority) return;
  std::vector<bool> seen(users, false);
  if (priority.size() != users) throw std::invalid_argument("priority list is not a permutation");
  for (std::size_t u : priority) {
    if (u >= users || seen[u]) throw std::invalid_argument("priority list is not a permutation");
    seen[u] = true;
  }
}

double choose_r(double y, double lambda, double v, double d) {
  return v < y * lambda ? d : 0.0;
}

double update_y(double y, double delay_sum, std::size_t arrivals, double r) {
  return std::max(0.0, y + delay_sum - static_cast<double>(arrivals) * r);
}

double update_x(double x, double energy, double i_avg, Slot frame_len) {
  return std::max(0.0, x + energy - i_avg * static_cast<double>(frame_len));
}

FramePlan doic_plan(std::span<const double> y, std::span<const double> rate_at_pmax, double max_power) {
  std::vector<double> score(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) score[i] = y[i] * rate_at_pmax[i];
  FramePlan plan;
  plan.priority = order_by_score(score);
  plan.power.assign(y.size(), max_power);
  plan.tag = Policy::doic;
  return plan;
}

PsiModel::PsiModel(std::vector<double> powers, std::vector<PsiUser> users, double x)
    : powers_(std::move(powers)), users_(std::move(users)), x_(x) {
  for (const auto& u : users_) {
    if (u.mean_service.size() != powers_.size() || u.rho.size() != powers_.size() ||
        u.residual.size() != powers_.size() || u.energy.size() != powers_.size()) {
      throw std::invalid_argument("psi user curves must match the power grid");
    }
  }
}

PsiModel PsiModel::from_table(const ServiceTable& table, std::span<const UserProfile> profiles,
                              std::span<const double> lambdas, std::span<const double> y, double x,
                              std::size_t first) {
  const auto& full = table.grid();
  if (first >= full.size()) throw std::invalid_argument("power floor index past the grid");
  const std::vector<double> grid(full.values().begin() + first, full.values().end());
  std::vector<PsiUser> users(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    auto& u = users[i];
    u.weight = y[i] * lambdas[i];
    u.mean_service.resize(grid.size());
    u.rho.resize(grid.size());
    u.residual.resize(grid.size());
    u.energy.resize(grid.size());
    for (std::size_t m = 0; m < grid.size(); ++m) {
      const ServiceStats& s = table.at(i, first + m);
      u.mean_service[m] = s.es;
      u.rho[m] = lambdas[i] * s.es;
      u.residual[m] = lambdas[i] * s.es2 / 2.0;
      u.energy[m] = u.rho[m] * grid[m] * profiles[i].interference.mean;
    }
  }
  return PsiModel(grid, std::move(users), x);
}

void PsiModel::reweight(std::span<const double> weight, double x) {
  if (weight.size() != users_.size()) throw std::invalid_argument("one weight per user");
  for (std::size_t i = 0; i < users_.size(); ++i) users_[i].weight = weight[i];
  x_ = x;
}

double PsiModel::psi(std::size_t user, std::size_t m, double rho_bound, double residual_prev) const {
  const PsiUser& u = users_[user];
  if (!std::isfinite(u.mean_service[m])) return kInf;
  const double w = waiting_time_upper(1.0 / u.mean_service[m], u.rho[m], rho_bound,
                                      residual_prev + u.residual[m]);
  if (!std::isfinite(w)) return kInf;
  return u.weight * w + x_ * u.energy[m];
}

PsiModel::Choice PsiModel::argmin(std::size_t user, double rho_bound, double residual_prev) const {
  Choice best{powers_.size() - 1, kInf};
  // Load falls as power rises, so once a power is unstable every lower one is too.
  for (std::size_t k = powers_.size(); k-- > 0;) {
    const double v = psi(user, k, rho_bound, residual_prev);
    if (!std::isfinite(v)) break;
    if (v < best.value) best = Choice{k, v};
  }
  return best;
}

DoacSolution doac_opt(const PsiModel& model, std::size_t max_users) {
  const std::size_t n = model.users();
  if (n == 0 || n > max_users || n >= 8 * sizeof(std::size_t)) {
    throw std::invalid_argument("doac_opt: user count outside the supported range");
  }
  const std::size_t states = std::size_t{1} << n;
  std::vector<double> cost(states, kInf);
  std::vector<double> rho(states, 0.0);
  std::vector<double> residual(states, 0.0);
  std::vector<std::size_t> last(states, 0);
  std::vector<std::size_t> power_of(states, 0);
  cost[0] = 0.0;

  // prev = mask without one bit is numerically smaller, so ascending order
  // visits every predecessor first.
  for (std::size_t mask = 1; mask < states; ++mask) {
    for (std::size_t l = 0; l < n; ++l) {
      const std::size_t bit = std::size_t{1} << l;
      if (!(mask & bit)) continue;
      const std::size_t prev = mask ^ bit;
      if (!std::isfinite(cost[prev])) continue;
      const auto choice = model.argmin(l, rho[prev], residual[prev]);
      if (!std::isfinite(choice.value)) continue;
      const double total = cost[prev] + choice.value;
      if (total < cost[mask]) {
        cost[mask] = total;
        last[mask] = l;
        power_of[mask] = choice.m;
        rho[mask] = rho[prev] + model.user(l).rho[choice.m];
        residual[mask] = residual[prev] + model.user(l).residual[choice.m];
      }
    }
  }

  DoacSolution out;
  out.plan.tag = Policy::doac;
  const std::size_t full = states - 1;
  out.objective = cost[full];
  out.feasible = std::isfinite(cost[full]);
  if (!out.feasible) return out;
  out.plan.priority.resize(n);
  out.plan.power.resize(n);
  out.power_index.resize(n);
  std::size_t mask = full;
  for (std::size_t pos = n; pos-- > 0;) {
    const std::size_t l = last[mask];
    out.plan.priority[pos] = l;
    out.power_index[l] = power_of[mask];
    out.plan.power[l] = model.power(power_of[mask]);
    mask ^= std::size_t{1} << l;
  }
  return out;
}

DoacSolution doac_brute(const PsiModel& model) {
  const std::size_t n = model.users();
  const std::size_t grid = model.grid_size();
  if (n == 0 || n > 5) throw std::invalid_argument("doac_brute supports 1..5 users");

  DoacSolution best;
  best.plan.tag = Policy::doac;
  best.objective = kInf;

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::vector<double>> term(n, std::vector<double>(grid));
  std::vector<std::size_t> digit(n);
  std::vector<double> prefix(n + 1);
  do {
    // Load bounds along this order come from each user's own minimizer and
    // do not depend on the power vector being scored.
    double bound = 0.0;
    double residual = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t m = 0; m < grid; ++m) term[j][m] = model.psi(perm[j], m, bound, residual);
      const auto choice = model.argmin(perm[j], bound, residual);
      if (std::isfinite(choice.value)) {
        bound += model.user(perm[j]).rho[choice.m];
        residual += model.user(perm[j]).residual[choice.m];
      } else {
        bound = 1.0;
      }
    }
    // Odometer over grid^n power vectors with running prefix sums.
    std::fill(digit.begin(), digit.end(), 0);
    prefix[0] = 0.0;
    for (std::size_t j = 0; j < n; ++j) prefix[j + 1] = prefix[j] + term[j][0];
    while (true) {
      const double total = prefix[n];
      if (total < best.objective) {
        best.objective = total;
        best.plan.priority = perm;
        best.plan.power.assign(n, 0.0);
        best.power_index.assign(n, 0);
        for (std::size_t j = 0; j < n; ++j) {
          best.plan.power[perm[j]] = model.power(digit[j]);
          best.power_index[perm[j]] = digit[j];
        }
      }
      std::size_t j = n;
      while (j > 0 && digit[j - 1] + 1 == grid) --j;
      if (j == 0) break;
      ++digit[j - 1];
      for (std::size_t k = j; k < n; ++k) digit[k] = 0;
      for (std::size_t k = j - 1; k < n; ++k) prefix[k + 1] = prefix[k] + term[k][digit[k]];
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  best.feasible = std::isfinite(best.objective);
  return best;
}

FramePlan subopt_plan(std::span<const double> y, double x, std::span<const double> rate_at_pmin,
                      std::span<const double> rate_at_pmax, double pmin, double pmax) {
  FramePlan plan;
  plan.tag = Policy::subopt;
  plan.power.resize(y.size());
  std::vector<double> score(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool low = x > y[i];
    plan.power[i] = low ? pmin : pmax;
    score[i] = y[i] * (low ? rate_at_pmin[i] : rate_at_pmax[i]);
  }
  plan.priority = order_by_score(score);
  return plan;
}

FramePlan csma_plan(std::span<const double> powers) {
  FramePlan plan;
  plan.tag = Policy::csma;
  plan.mode = SchedulingMode::uniform_random;
  plan.power.assign(powers.begin(), powers.end());
  plan.priority.resize(powers.size());
  std::iota(plan.priority.begin(), plan.priority.end(), std::size_t{0});
  return plan;
}

FramePlan maxweight_plan(std::size_t users, double max_power) {
  FramePlan plan;
  plan.tag = Policy::maxweight;
  plan.mode = SchedulingMode::max_weight;
  plan.power.assign(users, max_power);
  plan.priority.resize(users);
  std::iota(plan.priority.begin(), plan.priority.end(), std::size_t{0});
  return plan;
}

std::optional<std::size_t> maxweight_select(std::span<const std::size_t> backlog,
                                            std::span<const double> rates) {
  std::optional<std::size_t> best;
  double best_weight = -1.0;
  for (std::size_t i = 0; i < backlog.size(); ++i) {
    if (backlog[i] == 0) continue;
    const double w = static_cast<double>(backlog[i]) * rates[i];
    if (w > best_weight) {
      best_weight = w;
      best = i;
    }
  }
  return best;
}

std::optional<std::size_t> schedule_slot(const FramePlan& plan, std::span<const std::size_t> backlog,
                                         Engine* rng) {
  switch (plan.mode) {
    case SchedulingMode::priority:
      for (std::size_t u : plan.priority) {
        if (backlog[u] > 0) return u;
      }
      return std::nullopt;
    case SchedulingMode::uniform_random: {
      const auto count = static_cast<std::size_t>(
          std::count_if(backlog.begin(), backlog.end(), [](std::size_t q) { return q > 0; }));
      if (count == 0) return std::nullopt;
      if (rng == nullptr) throw std::invalid_argument("random scheduling needs a random stream");
      auto pick = static_cast<std::size_t>(uniform01(*rng) * static_cast<double>(count));
      for (std::size_t i = 0; i < backlog.size(); ++i) {
        if (backlog[i] == 0) continue;
        if (pick-- == 0) return i;
      }
      return std::nullopt;
    }
    case SchedulingMode::max_weight:
      throw std::logic_error("max-weight plans are resolved per slot by maxweight_select");
  }
  return std::nullopt;
}

}  // namespace cogsched
