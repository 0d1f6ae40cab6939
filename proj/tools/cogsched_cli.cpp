// cogsched: run, sweep and validate the uplink scheduling simulator.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "cogsched/scenario.hpp"
#include "cogsched/simulator.hpp"
#include "cogsched/validation.hpp"

#ifndef COGSCHED_SCENARIO_DIR
#define COGSCHED_SCENARIO_DIR "scenarios"
#endif

namespace {

constexpr int kOk = 0;
constexpr int kInfeasible = 1;
constexpr int kInvalid = 2;

struct Common {
  std::string config = "desk.cfg";
  std::string policy;
  std::optional<double> lambda;
  std::optional<std::uint64_t> seed;
  std::optional<long long> horizon;
  std::optional<double> v;
  std::optional<double> alpha;
  std::string out;
};

std::string locate(const std::string& name) {
  namespace fs = std::filesystem;
  std::string path = cogsched::resolve_config_path(name);
  if (fs::exists(path)) return path;
  const fs::path builtin = fs::path(COGSCHED_SCENARIO_DIR) / name;
  if (fs::exists(builtin)) return builtin.string();
  throw std::runtime_error("config '" + name + "' not found (set COGSCHED_CONFIG_DIR)");
}

cogsched::Scenario load(const Common& c) {
  auto s = cogsched::Scenario::load(locate(c.config));
  if (c.horizon) s.apply("horizon", std::to_string(*c.horizon));
  if (c.v) s.apply("V", std::to_string(*c.v));
  if (c.alpha) s.apply("alpha", std::to_string(*c.alpha));
  if (c.lambda) s.lambdas = {*c.lambda};
  if (c.seed) s.seeds = {*c.seed};
  return s;
}

// A name matches a variant first, then a bare policy.
std::vector<cogsched::Variant> pick(const cogsched::Scenario& s, const std::string& name) {
  if (name.empty()) return s.variants;
  std::vector<cogsched::Variant> out;
  for (const auto& v : s.variants) {
    if (v.name == name) out.push_back(v);
  }
  if (!out.empty()) return out;
  auto p = cogsched::parse_policy(name);
  if (!p) throw std::invalid_argument("unknown policy or variant '" + name + "'");
  return {cogsched::Variant{name, *p, {}}};
}

void print_metrics(const cogsched::Metrics& m, const cogsched::SimConfig& c) {
  std::printf("policy %s  seed %llu  slots %lld  frames %zu\n", std::string(cogsched::to_string(m.policy)).c_str(),
              static_cast<unsigned long long>(m.seed), static_cast<long long>(m.slots), m.frames);
  for (std::size_t i = 0; i < m.delay.size(); ++i) {
    std::printf("  user %zu  lambda %.4g  d %.4g  delay %s\n", i + 1, m.lambda[i], c.users[i].delay_bound,
                m.delay[i] ? std::to_string(*m.delay[i]).c_str() : "-");
  }
  std::printf("  sum delay %.4f  avg interference %.4f (limit %.4g)  peak %.4f\n", m.sum_delay, m.avg_interference,
              c.avg_threshold, m.max_slot_interference);
  std::printf("  X/K %.4g  max Y/K %.4g  P_min %.4g  admission %s  fallback frames %zu\n", m.x_ratio,
              *std::max_element(m.y_ratio.begin(), m.y_ratio.end()), m.pmin, m.admission_scaled ? "scaled" : "off",
              m.fallback_frames);
  std::printf("  violations: cap %zu  single transmitter %zu\n", m.inst_violations, m.single_violations);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  return f;
}

int cmd_run(const Common& c, const std::string& trace, const std::string& frame_log, const std::string& table_in,
            const std::string& table_out) {
  const auto s = load(c);
  const auto variants = pick(s, c.policy.empty() ? "doac" : c.policy);
  const auto config = s.config(variants.front(), s.lambdas.front(), s.seeds.front());

  cogsched::RunOptions ro;
  if (!table_in.empty()) {
    std::ifstream in(table_in);
    if (!in) throw std::runtime_error("cannot read '" + table_in + "'");
    ro.table = std::make_shared<const cogsched::ServiceTable>(cogsched::ServiceTable::read_csv(in));
  } else {
    ro.table = cogsched::build_table(config);
  }
  if (!table_out.empty()) {
    auto f = open_out(table_out);
    ro.table->write_csv(f);
  }
  std::ofstream trace_file, log_file;
  if (!trace.empty()) {
    trace_file = open_out(trace);
    ro.slot_trace = &trace_file;
  }
  if (!frame_log.empty()) {
    log_file = open_out(frame_log);
    ro.frame_log = &log_file;
  }
  const auto m = cogsched::run(config, ro);
  print_metrics(m, config);
  if (!c.out.empty()) {
    auto f = open_out(c.out);
    cogsched::write_metrics_header(f, config.users.size());
    cogsched::write_metrics_row(f, variants.front().name, s.lambdas.front(), m);
  }
  return kOk;
}

int cmd_sweep(const Common& c, std::size_t jobs) {
  auto s = load(c);
  s.variants = pick(s, c.policy);
  const std::string out = c.out.empty() ? s.out : c.out;
  std::size_t done = 0;
  const std::size_t total = s.variants.size() * s.lambdas.size() * s.seeds.size();
  cogsched::SweepOptions so;
  so.jobs = jobs;
  so.on_row = [&](const cogsched::SweepRow& r) {
    ++done;
    std::fprintf(stderr, "[%zu/%zu] %s lambda=%g seed=%llu %s\n", done, total, r.variant.c_str(), r.lambda,
                 static_cast<unsigned long long>(r.seed),
                 r.metrics ? ("sum delay " + std::to_string(r.metrics->sum_delay)).c_str() : r.error.c_str());
  };
  const auto rows = cogsched::sweep(s, so);
  {
    auto f = open_out(out);
    cogsched::write_sweep_csv(f, rows, s.users);
  }
  const auto cells = cogsched::aggregate(rows);
  const auto summary = std::filesystem::path(out).replace_extension(".summary.csv").string();
  {
    auto f = open_out(summary);
    cogsched::write_summary_csv(f, cells, s.users);
  }
  cogsched::write_summary_csv(std::cout, cells, s.users);
  std::fprintf(stderr, "wrote %s and %s\n", out.c_str(), summary.c_str());
  for (const auto& r : rows) {
    if (!r.metrics) return kInfeasible;
  }
  return kOk;
}

int cmd_validate(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : cogsched::validation::run_all(seed)) {
    std::printf("%s  %-50s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? kOk : kInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uplink cognitive-radio scheduling simulator"};
  app.require_subcommand(1);
  Common common;
  std::size_t jobs = 1;
  std::string trace, frame_log, table_in, table_out;
  std::uint64_t validate_seed = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Scenario file (looked up in $COGSCHED_CONFIG_DIR)");
    sub->add_option("--policy", common.policy, "Policy or variant name");
    sub->add_option("--lambda", common.lambda, "Arrival scale lambda (lambda_i = weight_i * lambda)");
    sub->add_option("--seed", common.seed, "Random seed");
    sub->add_option("--horizon", common.horizon, "Slots to simulate")->check(CLI::PositiveNumber);
    sub->add_option("--V", common.v, "Drift-plus-penalty weight");
    sub->add_option("--alpha", common.alpha, "CSI error magnitude")->check(CLI::Range(0.0, 0.999));
    sub->add_option("--out", common.out, "Output CSV");
  };
  auto* run = app.add_subcommand("run", "Simulate one configuration");
  add_common(run);
  run->add_option("--trace", trace, "Write the slot trace CSV here");
  run->add_option("--frame-log", frame_log, "Write the per-frame plan log CSV here");
  run->add_option("--table-in", table_in, "Import the service table from CSV");
  run->add_option("--table-out", table_out, "Export the service table to CSV");
  auto* sw = app.add_subcommand("sweep", "Run every variant x lambda x seed cell");
  add_common(sw);
  sw->add_option("--jobs", jobs, "Parallel workers")->check(CLI::PositiveNumber);
  auto* val = app.add_subcommand("validate", "Run the oracle suites");
  val->add_option("--seed", validate_seed, "Seed for the suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(common, trace, frame_log, table_in, table_out);
    if (*sw) return cmd_sweep(common, jobs);
    if (*val) return cmd_validate(validate_seed);
  } catch (const cogsched::InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return kInfeasible;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  }
  return kOk;
}
