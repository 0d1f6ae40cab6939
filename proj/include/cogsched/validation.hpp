#pragma once

// Independent oracles: a continuous-time priority-queue simulator, a
// quadrature evaluation of the mean rate, and the suites built on them.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cogsched/policies.hpp"
#include "cogsched/rng.hpp"
#include "cogsched/stats.hpp"

namespace cogsched::validation {

/// Service-time law with known first two moments.
struct ServiceLaw {
  enum class Kind { deterministic, exponential, uniform, two_point };
  Kind kind = Kind::exponential;
  double a = 1.0;  // value / mean / low / first point
  double b = 0.0;  // -    / -    / high / second point
  double p = 0.5;  // probability of the first point (two_point only)

  double mean() const;
  double second_moment() const;
  double sample(Engine& rng) const;
};

struct PriorityClass {
  double lambda = 0.0;  // Poisson rate
  ServiceLaw service;
};

struct DesResult {
  std::vector<double> sojourn_mean;  // per class, highest priority first
  std::vector<double> sojourn_se;    // batch-means standard error
  std::vector<std::size_t> completed;
};

/// Single server, preemptive-resume priority (index 0 highest), Poisson
/// arrivals. Runs until `packets` jobs have completed in total.
DesResult simulate_priority_queue(const std::vector<PriorityClass>& classes, std::size_t packets,
                                  std::uint64_t seed, std::size_t batches = 30);

/// Closed-form mean sojourn time of every class for the same system.
std::vector<double> priority_queue_formula(const std::vector<PriorityClass>& classes);

/// E[ln(1 + min(I_inst/g, P) gamma)] / L by nested adaptive quadrature.
double mu_quadrature(const UserProfile& profile, const LinkParams& link, double power);

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct DpCheck {
  std::size_t instances = 0;
  std::size_t mismatches = 0;
  double max_relative_gap = 0.0;  // (dp - brute) / brute
  bool brute_never_worse = true;  // brute <= dp on every instance
  double seconds = 0.0;
};

/// Random DOAC instances on a service table measured for two user types.
PsiModel random_psi_instance(const ServiceTable& table, std::size_t users, Engine& rng);
DpCheck dp_versus_brute(std::size_t instances, std::size_t grid_points, std::uint64_t seed);

struct QueueCheck {
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst_z = 0.0;  // max |sim - formula| / se
  std::vector<std::string> lines;
};

/// Formula versus simulation for 1, 2 and 3 classes at loads <= 0.7.
QueueCheck queue_formula_versus_des(std::size_t packets, std::uint64_t seed);

/// True when the upper-bound waiting time dominates the exact one at every
/// grid power for a sample of bounds.
bool upper_bound_dominates(const ServiceTable& table, double lambda);

/// The standard oracle suites with modest sizes, for quick checks.
std::vector<SuiteResult> run_all(std::uint64_t seed);

}  // namespace cogsched::validation
