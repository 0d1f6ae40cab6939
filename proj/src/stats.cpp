#include "cogsched/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>

#include <boost/math/distributions/negative_binomial.hpp>

namespace cogsched {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::int64_t kMaxServiceSlots = 10'000'000;

ChannelRealization draw_used_gains(const UserProfile& profile, const LinkParams& link, Engine& rng) {
  ChannelRealization truth{sample_gain(profile.direct, rng), sample_gain(profile.interference, rng)};
  return apply_csi_error(truth, link.csi, rng, rng);
}

std::uint64_t law_key(const UserProfile& p, const LinkParams& link) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (double v : {p.direct.mean, p.direct.max_gain, p.interference.mean, p.interference.max_gain,
                   link.csi.alpha}) {
    h ^= std::bit_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

}  // namespace

PowerGrid::PowerGrid(double floor, double max, std::size_t points) {
  if (!(floor > 0.0) || !(max >= floor) || points == 0) {
    throw std::invalid_argument("power grid needs 0 < floor <= max and at least one point");
  }
  powers_.resize(points);
  if (points == 1) {
    powers_[0] = max;
    return;
  }
  const double step = std::log(max / floor) / static_cast<double>(points - 1);
  for (std::size_t m = 0; m < points; ++m) {
    powers_[m] = floor * std::exp(step * static_cast<double>(m));
  }
  powers_.front() = floor;
  powers_.back() = max;
}

PowerGrid::PowerGrid(std::vector<double> powers) : powers_(std::move(powers)) {
  if (powers_.empty() || !std::is_sorted(powers_.begin(), powers_.end()) || !(powers_.front() > 0.0)) {
    throw std::invalid_argument("power grid must be non-empty, positive and ascending");
  }
}

std::vector<double> estimate_mu_curve(const UserProfile& profile, const LinkParams& link,
                                      std::span<const double> powers, std::size_t samples,
                                      Engine& rng) {
  for (double p : powers) {
    if (p < 0.0) throw std::invalid_argument("power must be non-negative");
  }
  std::vector<double> sum(powers.size(), 0.0);
  for (std::size_t k = 0; k < samples; ++k) {
    const ChannelRealization used = draw_used_gains(profile, link, rng);
    for (std::size_t m = 0; m < powers.size(); ++m) {
      sum[m] += transmission_rate(capped_power(powers[m], used.g, link.inst_threshold), used.gamma);
    }
  }
  for (double& s : sum) s /= static_cast<double>(samples) * link.packet_length;
  return sum;
}

double estimate_mu(const UserProfile& profile, const LinkParams& link, double power,
                   std::size_t samples, Engine& rng) {
  const double p[] = {power};
  return estimate_mu_curve(profile, link, p, samples, rng).front();
}

std::vector<std::optional<ServiceMoments>> estimate_moment_curve(const UserProfile& profile,
                                                                 const LinkParams& link,
                                                                 std::span<const double> powers,
                                                                 std::size_t trials, Engine& rng) {
  if (!std::is_sorted(powers.begin(), powers.end())) {
    throw std::invalid_argument("powers must be ascending");
  }
  const std::size_t count = powers.size();
  // Powers <= 0 never finish; they form a prefix because the list is sorted.
  std::size_t servable_from = 0;
  while (servable_from < count && !(powers[servable_from] > 0.0)) ++servable_from;

  std::vector<double> sum(count, 0.0);
  std::vector<double> sum_sq(count, 0.0);
  std::vector<double> acc(count);
  bool overflow = false;
  for (std::size_t trial = 0; trial < trials && !overflow; ++trial) {
    std::fill(acc.begin(), acc.end(), 0.0);
    // Rates are monotone in P per slot, so finished powers form a suffix
    // [pending, count) of the grid.
    std::size_t pending = count;
    for (std::int64_t t = 1; pending > servable_from; ++t) {
      if (t > kMaxServiceSlots) {
        overflow = true;
        break;
      }
      const ChannelRealization used = draw_used_gains(profile, link, rng);
      for (std::size_t m = servable_from; m < pending; ++m) {
        acc[m] += transmission_rate(capped_power(powers[m], used.g, link.inst_threshold), used.gamma);
      }
      while (pending > servable_from && acc[pending - 1] >= link.packet_length) {
        --pending;
        const auto s = static_cast<double>(t);
        sum[pending] += s;
        sum_sq[pending] += s * s;
      }
    }
  }
  std::vector<std::optional<ServiceMoments>> out(count);
  if (overflow) return out;
  for (std::size_t m = servable_from; m < count; ++m) {
    out[m] = ServiceMoments{sum[m] / static_cast<double>(trials), sum_sq[m] / static_cast<double>(trials)};
  }
  return out;
}

std::optional<ServiceMoments> estimate_service_moments(const UserProfile& profile,
                                                       const LinkParams& link, double power,
                                                       std::size_t trials, Engine& rng) {
  const double p[] = {power};
  return estimate_moment_curve(profile, link, p, trials, rng).front();
}

ServiceTable::ServiceTable(PowerGrid grid, std::vector<std::vector<ServiceStats>> rows)
    : grid_(std::move(grid)), rows_(std::move(rows)) {
  for (const auto& row : rows_) {
    if (row.size() != grid_.size()) throw std::invalid_argument("service table row size mismatch");
  }
}

ServiceTable ServiceTable::build(std::span<const UserProfile> users, const LinkParams& link,
                                 const PowerGrid& grid, const Options& options) {
  std::map<std::uint64_t, std::vector<ServiceStats>> memo;
  std::vector<std::vector<ServiceStats>> rows;
  rows.reserve(users.size());
  for (const auto& user : users) {
    user.direct.validate();
    user.interference.validate();
    const std::uint64_t key = law_key(user, link);
    auto it = memo.find(key);
    if (it == memo.end()) {
      Engine mu_rng = make_stream(options.seed ^ key, StreamPurpose::estimation, 0);
      Engine moment_rng = make_stream(options.seed ^ key, StreamPurpose::estimation, 1);
      const auto mu = estimate_mu_curve(user, link, grid.values(), options.mu_samples, mu_rng);
      const auto moments = estimate_moment_curve(user, link, grid.values(), options.moment_trials, moment_rng);
      std::vector<ServiceStats> row(grid.size());
      for (std::size_t m = 0; m < grid.size(); ++m) {
        row[m].power = grid[m];
        row[m].mu = mu[m];
        row[m].es = moments[m] ? moments[m]->mean : kInf;
        row[m].es2 = moments[m] ? moments[m]->second : kInf;
      }
      it = memo.emplace(key, std::move(row)).first;
    }
    rows.push_back(it->second);
  }
  return ServiceTable(grid, std::move(rows));
}

void ServiceTable::write_csv(std::ostream& out) const {
  out << "user,P,mu,es,es2\n";
  out.precision(17);
  for (std::size_t u = 0; u < rows_.size(); ++u) {
    for (const auto& s : rows_[u]) {
      out << u << ',' << s.power << ',' << s.mu << ',' << s.es << ',' << s.es2 << '\n';
    }
  }
}

ServiceTable ServiceTable::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty service table CSV");
  std::vector<std::vector<ServiceStats>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw std::invalid_argument("service table CSV row needs 5 fields: " + line);
    const auto user = static_cast<std::size_t>(std::stoul(cells[0]));
    if (user >= rows.size()) rows.resize(user + 1);
    rows[user].push_back(ServiceStats{std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                                      std::stod(cells[4])});
  }
  if (rows.empty() || rows.front().empty()) throw std::invalid_argument("service table CSV has no rows");
  std::vector<double> powers;
  for (const auto& s : rows.front()) powers.push_back(s.power);
  return ServiceTable(PowerGrid(std::move(powers)), std::move(rows));
}

double residual_time(std::span<const LoadTerm> prefix) {
  double sum = 0.0;
  for (const auto& term : prefix) sum += term.lambda * term.es2;
  return sum / 2.0;
}

double waiting_time(double mu, double rho, double rho_bar_prev, double residual) {
  const double ahead = 1.0 - rho_bar_prev;
  const double with_self = ahead - rho;
  if (!(mu > 0.0) || !(ahead > 0.0) || !(with_self > 0.0)) return kInf;
  return (1.0 / mu + residual / with_self) / ahead;
}

double waiting_time_upper(double mu, double rho, double rho_bar_max_prev, double residual) {
  return waiting_time(mu, rho, rho_bar_max_prev, residual);
}

std::vector<double> rho_bar_max_recursion(std::span<const std::size_t> order,
                                          const std::function<double(std::size_t, double)>& minimizer) {
  std::vector<double> bounds;
  bounds.reserve(order.size() + 1);
  bounds.push_back(0.0);
  for (std::size_t user : order) {
    bounds.push_back(bounds.back() + minimizer(user, bounds.back()));
  }
  return bounds;
}

double total_load(const ServiceTable& table, std::span<const double> lambdas, std::size_t m) {
  double load = 0.0;
  for (std::size_t u = 0; u < lambdas.size(); ++u) load += lambdas[u] * table.at(u, m).es;
  return load;
}

std::size_t find_pmin(const ServiceTable& table, std::span<const double> lambdas, double epsilon) {
  const std::size_t top = table.grid().size() - 1;
  if (total_load(table, lambdas, top) >= 1.0) {
    throw InfeasibleError("offered load reaches 1 even at maximum power");
  }
  if (total_load(table, lambdas, top) > 1.0 - epsilon) return top;
  // Load is non-increasing in the grid index; find the first index <= 1-eps.
  std::size_t lo = 0;
  std::size_t hi = top;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (total_load(table, lambdas, mid) <= 1.0 - epsilon) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

std::vector<double> admission_scale(std::span<const double> lambdas,
                                    std::span<const double> rates_at_pmax, double epsilon) {
  double load = 0.0;
  for (std::size_t i = 0; i < lambdas.size(); ++i) load += lambdas[i] / rates_at_pmax[i];
  std::vector<double> scaled(lambdas.begin(), lambdas.end());
  for (double& l : scaled) l = l * (1.0 - epsilon) / load;
  return scaled;
}

double DiscreteRateLaw::zero_probability() const {
  double p = 0.0;
  for (std::size_t k = 0; k < units.size(); ++k) {
    if (units[k] == 0) p += probs[k];
  }
  return p;
}

int DiscreteRateLaw::sample(Engine& rng) const {
  const double u = uniform01(rng);
  double cum = 0.0;
  for (std::size_t k = 0; k < units.size(); ++k) {
    cum += probs[k];
    if (u < cum) return units[k];
  }
  return units.back();
}

DiscreteRateLaw discretize_rate_law(const UserProfile& profile, const LinkParams& link,
                                    double power, double unit, std::size_t samples, Engine& rng) {
  std::map<int, std::size_t> counts;
  for (std::size_t k = 0; k < samples; ++k) {
    const ChannelRealization used = draw_used_gains(profile, link, rng);
    const double rate = transmission_rate(capped_power(power, used.g, link.inst_threshold), used.gamma);
    ++counts[static_cast<int>(std::floor(rate / unit))];
  }
  DiscreteRateLaw law;
  for (const auto& [units, n] : counts) {
    law.units.push_back(units);
    law.probs.push_back(static_cast<double>(n) / static_cast<double>(samples));
  }
  return law;
}

DominanceReport service_time_stochastic_bound_check(const DiscreteRateLaw& law, int packet_units,
                                                    std::size_t trials, Engine& rng,
                                                    double tolerance_sigmas) {
  if (packet_units < 1 || trials == 0) throw std::invalid_argument("need packet_units >= 1 and trials > 0");
  DominanceReport report;
  report.zero_probability = law.zero_probability();
  const double success = 1.0 - report.zero_probability;
  if (!(success > 0.0)) throw std::invalid_argument("rate law never serves");

  std::vector<std::int64_t> slots(trials);
  for (auto& s : slots) {
    std::int64_t acc = 0;
    std::int64_t t = 0;
    while (acc < packet_units) {
      acc += law.sample(rng);
      ++t;
    }
    s = t;
  }
  std::sort(slots.begin(), slots.end());

  // s_B - L is the number of failures before the L-th success.
  const boost::math::negative_binomial_distribution<double> failures(packet_units, success);
  const double bound_q999 =
      success >= 1.0 ? 0.0 : boost::math::quantile(failures, 0.999);
  const auto empirical_q999 = slots[static_cast<std::size_t>(0.999 * static_cast<double>(trials - 1))];
  report.max_x = static_cast<int>(std::max<double>(packet_units + std::ceil(bound_q999),
                                                   static_cast<double>(empirical_q999)));

  const auto n = static_cast<double>(trials);
  report.holds = true;
  for (int x = 1; x <= report.max_x; ++x) {
    const double bound_cdf =
        x < packet_units ? 0.0
                         : (success >= 1.0 ? 1.0 : boost::math::cdf(failures, static_cast<double>(x - packet_units)));
    const auto below = std::upper_bound(slots.begin(), slots.end(), static_cast<std::int64_t>(x)) - slots.begin();
    const double empirical_cdf = static_cast<double>(below) / n;
    const double violation = bound_cdf - empirical_cdf;
    report.max_violation = std::max(report.max_violation, violation);
    const double slack = tolerance_sigmas * std::sqrt(bound_cdf * (1.0 - bound_cdf) / n) + 1.0 / n;
    if (violation > slack) report.holds = false;
    ++report.points_checked;
  }
  return report;
}

}  // namespace cogsched
