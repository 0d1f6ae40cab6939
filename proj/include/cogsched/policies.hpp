#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cogsched/queueing.hpp"
#include "cogsched/rng.hpp"
#include "cogsched/stats.hpp"

namespace cogsched {

enum class Policy { doic, doac, subopt, csma, maxweight };

std::string_view to_string(Policy policy);
std::optional<Policy> parse_policy(std::string_view name);

enum class SchedulingMode {
  priority,        // highest-priority backlogged user
  uniform_random,  // uniform over backlogged users
  max_weight,      // per-slot argmax of backlog * rate
};

/// What a policy decides at the start of a frame.
struct FramePlan {
  std::vector<std::size_t> priority;  // highest priority first
  std::vector<double> power;          // power parameter per user
  SchedulingMode mode = SchedulingMode::priority;
  Policy tag = Policy::doic;
  bool fallback = false;

  /// Throws std::invalid_argument on a bad permutation or power.
  void validate(std::size_t users, double max_power) const;
};

/// Delay debt per user, interference debt, and the auxiliary targets.
struct VirtualQueueState {
  std::vector<double> y;
  double x = 0.0;
  std::vector<double> r;

  explicit VirtualQueueState(std::size_t users) : y(users, 0.0), r(users, 0.0) {}
};

/// d when V < Y * lambda, else 0.
double choose_r(double y, double lambda, double v, double d);
double update_y(double y, double delay_sum, std::size_t arrivals, double r);
double update_x(double x, double energy, double i_avg, Slot frame_len);

/// c-mu order on Y_i * mu_i(P_max); every user at P_max.
FramePlan doic_plan(std::span<const double> y, std::span<const double> rate_at_pmax, double max_power);

/// Per-user curves on the power grid feeding the DOAC cost.
struct PsiUser {
  double weight = 0.0;                 // Y_i * lambda_i
  std::vector<double> mean_service;    // 1 / mu(P_m)
  std::vector<double> rho;             // lambda / mu(P_m)
  std::vector<double> residual;        // lambda * E[s^2](P_m) / 2
  std::vector<double> energy;          // rho(P_m) * P_m * g_bar
};

/// psi_i(P, bound) = Y_i lambda_i W_up(P, bound) + X rho_i(P) P g_bar_i on a
/// fixed power grid.
class PsiModel {
 public:
  PsiModel(std::vector<double> powers, std::vector<PsiUser> users, double x);

  /// Grid points below index `first` (the P_min floor) are left out.
  static PsiModel from_table(const ServiceTable& table, std::span<const UserProfile> profiles,
                             std::span<const double> lambdas, std::span<const double> y, double x,
                             std::size_t first = 0);

  std::size_t users() const { return users_.size(); }
  std::size_t grid_size() const { return powers_.size(); }
  double power(std::size_t m) const { return powers_[m]; }
  double x() const { return x_; }
  const PsiUser& user(std::size_t i) const { return users_[i]; }

  /// Swaps in new delay weights Y_i * lambda_i and a new X, keeping the curves.
  void reweight(std::span<const double> weight, double x);

  /// Cost of placing `user` at grid power m behind `rho_bound` worth of load
  /// whose residual-time contribution is `residual_prev`. +inf if unstable.
  double psi(std::size_t user, std::size_t m, double rho_bound, double residual_prev) const;

  struct Choice {
    std::size_t m = 0;
    double value = 0.0;
  };
  /// Grid argmin of psi; ties go to the higher power.
  Choice argmin(std::size_t user, double rho_bound, double residual_prev) const;

 private:
  std::vector<double> powers_;
  std::vector<PsiUser> users_;
  double x_;
};

struct DoacSolution {
  FramePlan plan;
  std::vector<std::size_t> power_index;
  double objective = 0.0;
  bool feasible = false;
};

/// Subset dynamic program over priority prefixes, O(M N 2^N).
DoacSolution doac_opt(const PsiModel& model, std::size_t max_users = 16);

/// Every permutation times every grid power vector; test oracle, N <= 5.
DoacSolution doac_brute(const PsiModel& model);

/// P_min when X > Y_i, else P_max; then c-mu order on Y_i * mu_i(P_hat_i).
FramePlan subopt_plan(std::span<const double> y, double x, std::span<const double> rate_at_pmin,
                      std::span<const double> rate_at_pmax, double pmin, double pmax);

/// Random-access plan reusing another policy's power parameters.
FramePlan csma_plan(std::span<const double> powers);

/// Plan marker for the per-slot MaxWeight rule; powers are P_max.
FramePlan maxweight_plan(std::size_t users, double max_power);

/// argmax_i backlog_i * rate_i over backlogged users, ties to the lowest index.
std::optional<std::size_t> maxweight_select(std::span<const std::size_t> backlog,
                                            std::span<const double> rates);

/// At most one user per slot: the highest-priority backlogged user, or a
/// uniform draw in random mode. Empty when nobody is backlogged.
std::optional<std::size_t> schedule_slot(const FramePlan& plan, std::span<const std::size_t> backlog,
                                         Engine* rng);

}  // namespace cogsched
