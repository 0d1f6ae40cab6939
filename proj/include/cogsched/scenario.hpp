#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cogsched/simulator.hpp"

namespace cogsched {

/// Flat key = value settings; '#' starts a comment. Later keys win.
class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& origin = "<input>");
  static KeyValues load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& all() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// One named column of a comparison: a policy plus setting overrides, e.g.
/// "doac alpha=0.1".
struct Variant {
  std::string name;
  Policy policy = Policy::doac;
  std::map<std::string, std::string> overrides;
};

struct Scenario {
  std::string name = "scenario";
  std::size_t users = 5;
  std::vector<double> lambda_weights;  // lambda_i = weight_i * lambda
  std::vector<double> gamma_mean;
  std::vector<double> g_mean;
  double gamma_max_factor = 10.0;
  double g_max_factor = 10.0;
  double d_high = 25.0;
  double d_low = 5.0;
  std::vector<std::size_t> d_low_users;  // zero-based
  std::vector<double> delay_bounds;      // explicit, wins over d_high/d_low

  double packet_length = 5.0;
  double inst_threshold = 20.0;
  double avg_threshold = 5.0;
  double max_power = 100.0;
  double alpha = 0.0;
  double epsilon = 0.1;
  double v = 100.0;
  std::size_t grid_points = 64;
  double power_floor = 0.1;
  Slot horizon = 500'000;
  double stability_eps = 0.05;
  std::size_t mu_samples = 20'000;
  std::size_t moment_trials = 20'000;
  std::uint64_t table_seed = 0x5eedc0deULL;

  std::vector<double> lambdas{0.02};
  std::vector<std::uint64_t> seeds{1};
  std::vector<Variant> variants;
  std::string out = "sweep.csv";

  /// Reads every known key, rejecting unknown ones.
  static Scenario from_settings(const KeyValues& kv);
  static Scenario load(const std::string& path);

  /// Applies one "key=value" override (same keys as the file).
  void apply(const std::string& key, const std::string& value);

  /// Full config for a variant at one arrival scale and seed.
  SimConfig config(const Variant& variant, double lambda, std::uint64_t seed) const;
  /// Config for a bare policy without variant overrides.
  SimConfig config(Policy policy, double lambda, std::uint64_t seed) const;

  void validate() const;
};

/// Resolves a config file argument: absolute or existing paths are used as
/// given; otherwise the name is looked up in $COGSCHED_CONFIG_DIR.
std::string resolve_config_path(const std::string& name);

struct SweepRow {
  std::string variant;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::optional<Metrics> metrics;  // empty when the cell was infeasible
  std::string error;
};

struct SweepOptions {
  std::size_t jobs = 1;
  std::function<void(const SweepRow&)> on_row;  // called under a lock, in completion order
};

/// Every (variant, lambda, seed) cell; rows come back in enumeration order.
std::vector<SweepRow> sweep(const Scenario& scenario, const SweepOptions& options = {});

struct CellSummary {
  std::string variant;
  double lambda = 0.0;
  std::size_t runs = 0;
  std::vector<double> delay_mean, delay_se;  // per user
  double sum_delay_mean = 0.0, sum_delay_se = 0.0;
  double interference_mean = 0.0, interference_se = 0.0;
  double x_ratio_max = 0.0;
  double y_ratio_max = 0.0;
  std::size_t violations = 0;
};

/// Across-seed means and standard errors per (variant, lambda).
std::vector<CellSummary> aggregate(const std::vector<SweepRow>& rows);

const CellSummary* find_cell(const std::vector<CellSummary>& cells, const std::string& variant, double lambda);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, std::size_t users);
void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells, std::size_t users);

}  // namespace cogsched
