#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cogsched/channel.hpp"
#include "cogsched/rng.hpp"

namespace cogsched {

/// Static description of one secondary user.
struct UserProfile {
  double lambda = 0.0;       // Bernoulli arrival probability per slot
  double delay_bound = 0.0;  // d_i, slots
  GainDistribution direct{1.0, 10.0};
  GainDistribution interference{0.1, 1.0};
};

/// Parameters shared by every link in the cell.
struct LinkParams {
  double packet_length = 1000.0;  // nats
  double inst_threshold = 20.0;   // I_inst
  double max_power = 100.0;       // P_max
  CsiErrorModel csi;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Log-spaced power levels on [floor, max]; the last point is exactly max.
class PowerGrid {
 public:
  PowerGrid(double floor, double max, std::size_t points);
  explicit PowerGrid(std::vector<double> powers);

  std::size_t size() const { return powers_.size(); }
  double operator[](std::size_t m) const { return powers_[m]; }
  double max() const { return powers_.back(); }
  std::span<const double> values() const { return powers_; }

 private:
  std::vector<double> powers_;
};

/// Mean of ln(1 + min(I_inst/g, P) gamma) / L over the two gain laws.
double estimate_mu(const UserProfile& profile, const LinkParams& link, double power,
                   std::size_t samples, Engine& rng);

/// Same estimator evaluated on one shared sample set for every power, so
/// the curve is monotone in P sample-by-sample.
std::vector<double> estimate_mu_curve(const UserProfile& profile, const LinkParams& link,
                                      std::span<const double> powers, std::size_t samples,
                                      Engine& rng);

struct ServiceMoments {
  double mean = 0.0;    // E[s], slots
  double second = 0.0;  // E[s^2], slots^2
};

/// Slots needed to push L nats through fresh per-slot gains, with the exact
/// min(R, H) accounting. Empty when the power cannot serve (P <= 0).
std::optional<ServiceMoments> estimate_service_moments(const UserProfile& profile,
                                                       const LinkParams& link, double power,
                                                       std::size_t trials, Engine& rng);

std::vector<std::optional<ServiceMoments>> estimate_moment_curve(const UserProfile& profile,
                                                                 const LinkParams& link,
                                                                 std::span<const double> powers,
                                                                 std::size_t trials, Engine& rng);

struct ServiceStats {
  double power = 0.0;
  double mu = 0.0;   // E[R(P)] / L
  double es = 0.0;   // E[s]
  double es2 = 0.0;  // E[s^2]

  /// Packets per slot used by the priority-queue formulas. Equals mu in
  /// the large-packet regime, and stays exact for short packets.
  double service_rate() const { return es > 0.0 ? 1.0 / es : 0.0; }
};

/// Memoized (user, grid power) -> ServiceStats. Users with identical gain
/// laws share one estimate. Read-only once built.
class ServiceTable {
 public:
  struct Options {
    std::size_t mu_samples = 20000;
    std::size_t moment_trials = 20000;
    std::uint64_t seed = 0x5eedc0deULL;
  };

  static ServiceTable build(std::span<const UserProfile> users, const LinkParams& link,
                            const PowerGrid& grid, const Options& options);
  static ServiceTable build(std::span<const UserProfile> users, const LinkParams& link,
                            const PowerGrid& grid) {
    return build(users, link, grid, Options{});
  }
  /// Assembles a table from precomputed rows (tests, CSV import).
  ServiceTable(PowerGrid grid, std::vector<std::vector<ServiceStats>> rows);

  const PowerGrid& grid() const { return grid_; }
  std::size_t users() const { return rows_.size(); }
  const ServiceStats& at(std::size_t user, std::size_t m) const { return rows_[user][m]; }
  const ServiceStats& at_max(std::size_t user) const { return rows_[user].back(); }

  /// CSV with header user,P,mu,es,es2.
  void write_csv(std::ostream& out) const;
  static ServiceTable read_csv(std::istream& in);

 private:
  PowerGrid grid_;
  std::vector<std::vector<ServiceStats>> rows_;
};

struct LoadTerm {
  double lambda = 0.0;
  double es2 = 0.0;
};

/// Mean residual service time seen by the first k priority classes.
double residual_time(std::span<const LoadTerm> prefix);

/// Mean time in system of the class after `rho_bar_prev` worth of higher
/// priority load, preemptive-resume M/G/1. +infinity when unstable.
double waiting_time(double mu, double rho, double rho_bar_prev, double residual);

/// Same expression evaluated at an upper bound of the higher-priority load.
double waiting_time_upper(double mu, double rho, double rho_bar_max_prev, double residual);

/// Accumulated load bounds along a priority order. `minimizer(user,
/// bound_so_far)` returns the load of that user at its cost-minimizing
/// power. Result has order.size() + 1 entries, starting at 0.
std::vector<double> rho_bar_max_recursion(std::span<const std::size_t> order,
                                          const std::function<double(std::size_t, double)>& minimizer);

/// sum_i lambda_i * E[s_i(P_m)].
double total_load(const ServiceTable& table, std::span<const double> lambdas, std::size_t m);

/// Smallest grid index whose total load is <= 1 - epsilon (the top of the
/// grid when none is). Throws InfeasibleError when even P_max gives load >= 1.
std::size_t find_pmin(const ServiceTable& table, std::span<const double> lambdas, double epsilon);

/// Scales arrival rates so that the load at P_max becomes 1 - epsilon.
std::vector<double> admission_scale(std::span<const double> lambdas,
                                    std::span<const double> rates_at_pmax, double epsilon);

/// Integer-unit rate law used to check the negative-binomial service bound.
struct DiscreteRateLaw {
  std::vector<int> units;
  std::vector<double> probs;

  double zero_probability() const;
  int sample(Engine& rng) const;
};

/// Quantizes ln(1 + min(I_inst/g, P) gamma) down to whole multiples of `unit`.
DiscreteRateLaw discretize_rate_law(const UserProfile& profile, const LinkParams& link,
                                    double power, double unit, std::size_t samples, Engine& rng);

struct DominanceReport {
  bool holds = false;
  int points_checked = 0;
  int max_x = 0;
  double max_violation = 0.0;  // max over x of P{s_B <= x} - P{s <= x}, raw
  double zero_probability = 0.0;
};

/// Checks P{s <= x} >= P{s_B <= x}, s_B = NegBin(L, 1 - P{R = 0}) + L, at
/// every integer x up to the 99.9th percentile. The empirical side is given
/// `tolerance_sigmas` binomial standard errors of slack.
DominanceReport service_time_stochastic_bound_check(const DiscreteRateLaw& law, int packet_units,
                                                    std::size_t trials, Engine& rng,
                                                    double tolerance_sigmas = 4.0);

}  // namespace cogsched
