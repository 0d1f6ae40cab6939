#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cogsched/policies.hpp"
#include "cogsched/queueing.hpp"
#include "cogsched/stats.hpp"

namespace cogsched {

struct SimConfig {
  std::vector<UserProfile> users;
  LinkParams link;
  double avg_threshold = 5.0;  // I_avg
  double v = 100.0;
  double epsilon = 0.1;
  Policy policy = Policy::doac;
  std::size_t grid_points = 64;
  double power_floor = 0.1;
  Slot horizon = 1'000'000;
  std::uint64_t seed = 1;
  ServiceTable::Options table;
  double stability_eps = 0.05;
  std::size_t max_dp_users = 16;

  /// Throws std::invalid_argument with a readable message.
  void validate() const;
  PowerGrid grid() const { return PowerGrid(power_floor, link.max_power, grid_points); }
};

struct Metrics {
  Policy policy = Policy::doac;
  std::uint64_t seed = 0;
  Slot slots = 0;
  std::size_t frames = 0;

  std::vector<double> lambda;  // after admission control
  bool admission_scaled = false;
  std::size_t pmin_index = 0;
  double pmin = 0.0;

  // Over completed frames.
  std::vector<std::optional<double>> delay;  // mean slots per packet; empty without packets
  std::vector<double> delay_sum;
  std::vector<std::size_t> packets;
  double sum_delay = 0.0;           // sum over users of mean delay

  double avg_interference = 0.0;    // true energy / slots
  double max_slot_interference = 0.0;
  double energy = 0.0;

  std::vector<double> y;            // final Y_i(K)
  double x = 0.0;
  std::vector<double> y_ratio;      // Y_i(K) / K
  double x_ratio = 0.0;
  // First frame from which sum_i Y_i(k) / (N k) (resp. X(k)/k) stays below
  // stability_eps through the end of the run; frames + 1 if it never settles.
  std::size_t y_settle_frame = 0;
  std::size_t x_settle_frame = 0;

  std::size_t inst_violations = 0;    // P g_true > I_inst
  std::size_t single_violations = 0;  // more than one transmitter
  std::size_t fallback_frames = 0;    // DOAC with no stable priority list

  std::vector<std::size_t> arrivals;   // every arrival in the horizon
  std::vector<std::size_t> departures;
  std::vector<std::size_t> backlog;    // at the end of the horizon

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Convenience per-user view used by reports.
double max_delay_ratio(const Metrics& m, std::span<const UserProfile> users);

struct RunOptions {
  /// Reused if it matches the run's grid and link; built on demand otherwise.
  std::shared_ptr<const ServiceTable> table;
  /// Per-frame power parameters for CSMA. Computed by a shadow DOAC run
  /// with the same seed when absent.
  std::shared_ptr<const std::vector<std::vector<double>>> shadow_powers;
  std::ostream* slot_trace = nullptr;
  std::ostream* frame_log = nullptr;
  /// Filled with each frame's power parameters when non-null.
  std::vector<std::vector<double>>* plan_powers = nullptr;
};

/// Builds the service table a config needs.
std::shared_ptr<const ServiceTable> build_table(const SimConfig& config);

/// One slot-accurate simulation. Deterministic in (config, seed). Throws
/// InfeasibleError when the load cannot be brought below one.
Metrics run(const SimConfig& config, const RunOptions& options = {});

/// Recomputes Metrics from a slot trace written by run().
Metrics replay_trace(std::istream& trace);

struct StabilityReport {
  std::vector<double> y_ratio;
  double x_ratio = 0.0;
  double threshold = 0.0;
  std::vector<bool> y_stable;
  bool x_stable = false;
  std::size_t y_settle_frame = 0;
  std::size_t x_settle_frame = 0;

  bool all_stable() const;
};

StabilityReport stability_monitor(const Metrics& metrics, double threshold);

void write_metrics_header(std::ostream& out, std::size_t users);
void write_metrics_row(std::ostream& out, const std::string& label, double lambda, const Metrics& m);

}  // namespace cogsched
