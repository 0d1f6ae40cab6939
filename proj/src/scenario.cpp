#include "cogsched/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace cogsched {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw std::invalid_argument("'" + key + "' expects a number, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto u = std::stoull(v, &used, 0);
    if (used != v.size() || v.front() == '-') throw std::invalid_argument("bad integer");
    return u;
  } catch (const std::exception&) {
    throw std::invalid_argument("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  return out;
}

// A scalar broadcasts to every user; a list must have one entry per user.
std::vector<double> per_user(const std::vector<double>& values, std::size_t users, const char* what) {
  if (values.size() == 1) return std::vector<double>(users, values.front());
  if (values.size() != users) throw std::invalid_argument(std::string(what) + " needs 1 or N entries");
  return values;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Variant parse_variant(const std::string& name, const std::string& spec) {
  const auto words = split(spec, ' ');
  if (words.empty()) throw std::invalid_argument("variant '" + name + "' is empty");
  Variant v;
  v.name = name;
  auto policy = parse_policy(words.front());
  if (!policy) throw std::invalid_argument("variant '" + name + "': unknown policy '" + words.front() + "'");
  v.policy = *policy;
  for (std::size_t i = 1; i < words.size(); ++i) {
    const auto eq = words[i].find('=');
    if (eq == std::string::npos) throw std::invalid_argument("variant '" + name + "': expected key=value");
    v.overrides[words[i].substr(0, eq)] = words[i].substr(eq + 1);
  }
  return v;
}

double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double std_error(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

// Inputs the service table depends on; runs that agree here share a table.
std::string table_signature(const SimConfig& c) {
  std::string s = fmt(c.link.packet_length) + "|" + fmt(c.link.inst_threshold) + "|" + fmt(c.link.max_power) +
                  "|" + fmt(c.link.csi.alpha) + "|" + std::to_string(c.grid_points) + "|" + fmt(c.power_floor) +
                  "|" + std::to_string(c.table.mu_samples) + "|" + std::to_string(c.table.moment_trials) + "|" +
                  std::to_string(c.table.seed);
  for (const auto& u : c.users) {
    s += "|" + fmt(u.direct.mean) + "," + fmt(u.direct.max_gain) + "," + fmt(u.interference.mean) + "," +
         fmt(u.interference.max_gain);
  }
  return s;
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in, const std::string& origin) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": empty key");
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  return parse(in, path);
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void Scenario::apply(const std::string& key, const std::string& value) {
  if (key == "name") name = value;
  else if (key == "users") users = to_u64(key, value);
  else if (key == "lambda_weights") lambda_weights = to_doubles(key, value);
  else if (key == "gamma_mean") gamma_mean = to_doubles(key, value);
  else if (key == "g_mean") g_mean = to_doubles(key, value);
  else if (key == "gamma_max_factor") gamma_max_factor = to_double(key, value);
  else if (key == "g_max_factor") g_max_factor = to_double(key, value);
  else if (key == "d_high") d_high = to_double(key, value);
  else if (key == "d_low") d_low = to_double(key, value);
  else if (key == "d_low_users") {
    d_low_users.clear();
    for (const auto& item : split(value, ',')) {
      const auto u = to_u64(key, item);
      if (u == 0) throw std::invalid_argument("d_low_users are numbered from 1");
      d_low_users.push_back(u - 1);
    }
  } else if (key == "delay_bounds") delay_bounds = to_doubles(key, value);
  else if (key == "packet_length") packet_length = to_double(key, value);
  else if (key == "inst_threshold") inst_threshold = to_double(key, value);
  else if (key == "avg_threshold") avg_threshold = to_double(key, value);
  else if (key == "max_power") max_power = to_double(key, value);
  else if (key == "alpha") alpha = to_double(key, value);
  else if (key == "epsilon") epsilon = to_double(key, value);
  else if (key == "V") v = to_double(key, value);
  else if (key == "grid_points") grid_points = to_u64(key, value);
  else if (key == "power_floor") power_floor = to_double(key, value);
  else if (key == "horizon") horizon = static_cast<Slot>(to_u64(key, value));
  else if (key == "stability_eps") stability_eps = to_double(key, value);
  else if (key == "mu_samples") mu_samples = to_u64(key, value);
  else if (key == "moment_trials") moment_trials = to_u64(key, value);
  else if (key == "table_seed") table_seed = to_u64(key, value);
  else if (key == "lambdas") lambdas = to_doubles(key, value);
  else if (key == "seeds") {
    seeds.clear();
    for (const auto& item : split(value, ',')) seeds.push_back(to_u64(key, item));
  } else if (key == "out") out = value;
  else throw std::invalid_argument("unknown setting '" + key + "'");
}

Scenario Scenario::from_settings(const KeyValues& kv) {
  Scenario s;
  std::map<std::string, std::string> definitions;
  std::vector<std::string> order;
  for (const auto& [key, value] : kv.all()) {
    if (key.rfind("variant.", 0) == 0) {
      definitions[key.substr(8)] = value;
    } else if (key == "variants") {
      order = split(value, ',');
    } else {
      s.apply(key, value);
    }
  }
  if (order.empty()) {
    for (const auto& [name, spec] : definitions) order.push_back(name);
  }
  for (const auto& name : order) {
    auto it = definitions.find(name);
    if (it != definitions.end()) {
      s.variants.push_back(parse_variant(name, it->second));
    } else if (auto p = parse_policy(name)) {
      s.variants.push_back(Variant{name, *p, {}});
    } else {
      throw std::invalid_argument("variant '" + name + "' is not defined");
    }
  }
  s.validate();
  return s;
}

Scenario Scenario::load(const std::string& path) {
  return from_settings(KeyValues::load(path));
}

void Scenario::validate() const {
  if (users == 0) throw std::invalid_argument("users must be positive");
  if (lambdas.empty()) throw std::invalid_argument("lambdas must not be empty");
  if (seeds.empty()) throw std::invalid_argument("seeds must not be empty");
  for (const auto& v : variants) {
    Scenario probe = *this;
    for (const auto& [k, val] : v.overrides) probe.apply(k, val);
  }
  config(Policy::doac, lambdas.front(), seeds.front()).validate();
}

SimConfig Scenario::config(Policy policy, double lambda, std::uint64_t seed) const {
  SimConfig c;
  c.policy = policy;
  c.seed = seed;
  c.link.packet_length = packet_length;
  c.link.inst_threshold = inst_threshold;
  c.link.max_power = max_power;
  c.link.csi.alpha = alpha;
  c.avg_threshold = avg_threshold;
  c.v = v;
  c.epsilon = epsilon;
  c.grid_points = grid_points;
  c.power_floor = power_floor;
  c.horizon = horizon;
  c.stability_eps = stability_eps;
  c.table.mu_samples = mu_samples;
  c.table.moment_trials = moment_trials;
  c.table.seed = table_seed;

  std::vector<double> weights = lambda_weights;
  if (weights.empty()) {
    for (std::size_t i = 1; i <= users; ++i) weights.push_back(static_cast<double>(i));
  }
  weights = per_user(weights, users, "lambda_weights");
  const auto gm = per_user(gamma_mean.empty() ? std::vector<double>{1.0} : gamma_mean, users, "gamma_mean");
  const auto im = per_user(g_mean.empty() ? std::vector<double>{0.1} : g_mean, users, "g_mean");
  std::vector<double> d(users, d_high);
  for (std::size_t u : d_low_users) {
    if (u >= users) throw std::invalid_argument("d_low_users names a user beyond 'users'");
    d[u] = d_low;
  }
  if (!delay_bounds.empty()) d = per_user(delay_bounds, users, "delay_bounds");

  c.users.resize(users);
  for (std::size_t i = 0; i < users; ++i) {
    auto& u = c.users[i];
    u.lambda = weights[i] * lambda;
    u.delay_bound = d[i];
    u.direct = GainDistribution{gm[i], gamma_max_factor * gm[i]};
    u.interference = GainDistribution{im[i], g_max_factor * im[i]};
  }
  return c;
}

SimConfig Scenario::config(const Variant& variant, double lambda, std::uint64_t seed) const {
  Scenario s = *this;
  for (const auto& [k, v] : variant.overrides) s.apply(k, v);
  return s.config(variant.policy, lambda, seed);
}

std::string resolve_config_path(const std::string& name) {
  namespace fs = std::filesystem;
  if (fs::path(name).is_absolute() || fs::exists(name)) return name;
  if (const char* dir = std::getenv("COGSCHED_CONFIG_DIR")) {
    const fs::path candidate = fs::path(dir) / name;
    if (fs::exists(candidate)) return candidate.string();
  }
  return name;
}

std::vector<SweepRow> sweep(const Scenario& scenario, const SweepOptions& options) {
  struct Cell {
    const Variant* variant;
    double lambda;
    std::uint64_t seed;
  };
  std::vector<Variant> variants = scenario.variants;
  if (variants.empty()) variants.push_back(Variant{"doac", Policy::doac, {}});
  std::vector<Cell> cells;
  for (const auto& v : variants) {
    for (double lambda : scenario.lambdas) {
      for (auto seed : scenario.seeds) cells.push_back(Cell{&v, lambda, seed});
    }
  }

  // Tables depend on neither lambda nor the seed; build each distinct one once.
  std::map<std::string, std::shared_ptr<const ServiceTable>> tables;
  for (const auto& v : variants) {
    const SimConfig c = scenario.config(v, scenario.lambdas.front(), scenario.seeds.front());
    auto& slot = tables[table_signature(c)];
    if (!slot) slot = build_table(c);
  }

  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      SweepRow row;
      row.variant = cell.variant->name;
      row.lambda = cell.lambda;
      row.seed = cell.seed;
      try {
        const SimConfig c = scenario.config(*cell.variant, cell.lambda, cell.seed);
        RunOptions ro;
        ro.table = tables.at(table_signature(c));
        row.metrics = run(c, ro);
      } catch (const InfeasibleError& e) {
        row.error = e.what();
      }
      std::lock_guard lock(mu);
      rows[i] = row;
      if (options.on_row) options.on_row(rows[i]);
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return rows;
}

std::vector<CellSummary> aggregate(const std::vector<SweepRow>& rows) {
  std::vector<CellSummary> out;
  std::map<std::pair<std::string, double>, std::vector<const Metrics*>> groups;
  std::vector<std::pair<std::string, double>> order;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.variant, r.lambda);
    if (!groups.count(key)) order.push_back(key);
    auto& g = groups[key];
    if (r.metrics) g.push_back(&*r.metrics);
  }
  for (const auto& key : order) {
    const auto& g = groups[key];
    CellSummary s;
    s.variant = key.first;
    s.lambda = key.second;
    s.runs = g.size();
    if (g.empty()) {
      out.push_back(s);
      continue;
    }
    const std::size_t n = g.front()->delay.size();
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> xs;
      for (const auto* m : g) {
        if (m->delay[i]) xs.push_back(*m->delay[i]);
      }
      s.delay_mean.push_back(mean(xs));
      s.delay_se.push_back(std_error(xs));
    }
    std::vector<double> sums, inter;
    for (const auto* m : g) {
      sums.push_back(m->sum_delay);
      inter.push_back(m->avg_interference);
      s.x_ratio_max = std::max(s.x_ratio_max, m->x_ratio);
      for (double y : m->y_ratio) s.y_ratio_max = std::max(s.y_ratio_max, y);
      s.violations += m->inst_violations + m->single_violations;
    }
    s.sum_delay_mean = mean(sums);
    s.sum_delay_se = std_error(sums);
    s.interference_mean = mean(inter);
    s.interference_se = std_error(inter);
    out.push_back(std::move(s));
  }
  return out;
}

const CellSummary* find_cell(const std::vector<CellSummary>& cells, const std::string& variant, double lambda) {
  for (const auto& c : cells) {
    if (c.variant == variant && c.lambda == lambda) return &c;
  }
  return nullptr;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, std::size_t users) {
  write_metrics_header(out, users);
  for (const auto& r : rows) {
    if (r.metrics) write_metrics_row(out, r.variant, r.lambda, *r.metrics);
  }
}

void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells, std::size_t users) {
  out << "variant,lambda,runs";
  for (std::size_t i = 1; i <= users; ++i) out << ",delay_" << i << ",delay_" << i << "_se";
  out << ",sum_delay,sum_delay_se,avg_interference,avg_interference_se,y_ratio_max,x_ratio_max,violations\n";
  for (const auto& c : cells) {
    out << c.variant << ',' << fmt(c.lambda) << ',' << c.runs;
    for (std::size_t i = 0; i < users; ++i) {
      if (i < c.delay_mean.size()) {
        out << ',' << fmt(c.delay_mean[i]) << ',' << fmt(c.delay_se[i]);
      } else {
        out << ",,";
      }
    }
    out << ',' << fmt(c.sum_delay_mean) << ',' << fmt(c.sum_delay_se) << ',' << fmt(c.interference_mean) << ','
        << fmt(c.interference_se) << ',' << fmt(c.y_ratio_max) << ',' << fmt(c.x_ratio_max) << ',' << c.violations
        << '\n';
  }
}

}  // namespace cogsched
