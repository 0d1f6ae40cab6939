#include "cogsched/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cogsched {

namespace {

// Tolerance on the per-slot interference cap; the capped power is computed
// as I_inst / g and multiplying back by g can round up by one ulp.
constexpr double kCapSlack = 1e-12;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& values, char sep) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

std::vector<double> split_doubles(const std::string& text, char sep) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(std::stod(item));
  return out;
}

std::size_t total_backlog(const std::vector<UserQueue>& queues) {
  std::size_t n = 0;
  for (const auto& q : queues) n += q.size();
  return n;
}

// Shared bookkeeping between the online run and the trace replay: frames,
// virtual queues and the derived metrics. Everything here depends only on
// what happened in the slots, never on how the scheduler decided.
class Ledger {
 public:
  Ledger(std::vector<double> lambda, std::vector<double> delay_bound, double v, double i_avg,
         double inst_threshold, double stability_eps)
      : lambda_(std::move(lambda)),
        d_(std::move(delay_bound)),
        v_(v),
        i_avg_(i_avg),
        inst_(inst_threshold),
        eps_(stability_eps),
        tracker_(lambda_.size()),
        vq_(lambda_.size()) {
    const std::size_t n = lambda_.size();
    m_.delay_sum.assign(n, 0.0);
    m_.packets.assign(n, 0);
    m_.arrivals.assign(n, 0);
    m_.departures.assign(n, 0);
  }

  bool at_frame_start() const { return tracker_.at_frame_start(); }
  const VirtualQueueState& vq() const { return vq_; }
  const FrameTracker& tracker() const { return tracker_; }

  /// Call at the first slot of a frame, before begin_slot.
  void open_frame() {
    for (std::size_t i = 0; i < lambda_.size(); ++i) vq_.r[i] = choose_r(vq_.y[i], lambda_[i], v_, d_[i]);
  }

  SlotPhase begin_slot(Slot slot, std::size_t backlog_before, const std::vector<int>& arrived) {
    std::size_t count = 0;
    for (int a : arrived) count += static_cast<std::size_t>(a);
    const SlotPhase phase = tracker_.begin_slot(slot, backlog_before, count);
    for (std::size_t i = 0; i < arrived.size(); ++i) {
      if (arrived[i]) {
        tracker_.record_arrival(i);
        ++m_.arrivals[i];
      }
    }
    return phase;
  }

  void transmit(double power, double g_true) {
    const double interference = power * g_true;
    if (interference > inst_ * (1.0 + kCapSlack)) ++m_.inst_violations;
    m_.max_slot_interference = std::max(m_.max_slot_interference, interference);
    m_.energy += interference;
    tracker_.add_interference(interference);
  }

  void depart(std::size_t user, Slot delay) {
    tracker_.record_departure(user, delay);
    ++m_.departures[user];
  }

  void count_transmitters(std::size_t n) {
    if (n > 1) ++m_.single_violations;
  }

  /// Returns the frame when it just closed (Y and X already updated).
  std::optional<FrameRecord> end_slot(std::size_t backlog_after) {
    auto frame = tracker_.end_slot(backlog_after);
    if (!frame) return frame;
    const std::size_t n = lambda_.size();
    for (std::size_t i = 0; i < n; ++i) {
      vq_.y[i] = update_y(vq_.y[i], frame->delay_sum[i], frame->arrivals[i], vq_.r[i]);
      m_.delay_sum[i] += frame->delay_sum[i];
      m_.packets[i] += frame->arrivals[i];
    }
    vq_.x = update_x(vq_.x, frame->interference_energy, i_avg_, frame->length());
    const auto k = static_cast<double>(tracker_.frames_completed());
    const double y_mean = std::accumulate(vq_.y.begin(), vq_.y.end(), 0.0) / (static_cast<double>(n) * k);
    if (y_mean >= eps_) y_last_above_ = tracker_.frames_completed();
    if (vq_.x / k >= eps_) x_last_above_ = tracker_.frames_completed();
    return frame;
  }

  Metrics finish(Slot slots, const std::vector<UserQueue>& queues) {
    const std::size_t n = lambda_.size();
    m_.slots = slots;
    m_.frames = tracker_.frames_completed();
    m_.lambda = lambda_;
    m_.delay.assign(n, std::nullopt);
    m_.sum_delay = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (m_.packets[i] > 0) {
        m_.delay[i] = m_.delay_sum[i] / static_cast<double>(m_.packets[i]);
        m_.sum_delay += *m_.delay[i];
      }
    }
    m_.avg_interference = slots > 0 ? m_.energy / static_cast<double>(slots) : 0.0;
    m_.y = vq_.y;
    m_.x = vq_.x;
    const double k = std::max<double>(1.0, static_cast<double>(m_.frames));
    m_.y_ratio.resize(n);
    for (std::size_t i = 0; i < n; ++i) m_.y_ratio[i] = vq_.y[i] / k;
    m_.x_ratio = vq_.x / k;
    m_.y_settle_frame = y_last_above_ + 1;
    m_.x_settle_frame = x_last_above_ + 1;
    m_.backlog.resize(n);
    for (std::size_t i = 0; i < n; ++i) m_.backlog[i] = queues[i].size();
    return m_;
  }

 private:
  std::vector<double> lambda_;
  std::vector<double> d_;
  double v_, i_avg_, inst_, eps_;
  FrameTracker tracker_;
  VirtualQueueState vq_;
  Metrics m_;
  std::size_t y_last_above_ = 0;
  std::size_t x_last_above_ = 0;
};

struct UserStreams {
  Engine arrivals, gamma, g, csi_gamma, csi_g;
};

std::vector<UserStreams> make_streams(std::uint64_t seed, std::size_t users) {
  std::vector<UserStreams> out;
  out.reserve(users);
  for (std::size_t i = 0; i < users; ++i) {
    out.push_back(UserStreams{make_stream(seed, StreamPurpose::arrivals, i),
                              make_stream(seed, StreamPurpose::direct_gain, i),
                              make_stream(seed, StreamPurpose::interference_gain, i),
                              make_stream(seed, StreamPurpose::csi_direct, i),
                              make_stream(seed, StreamPurpose::csi_interference, i)});
  }
  return out;
}

bool table_fits(const ServiceTable& table, const SimConfig& config) {
  if (table.users() != config.users.size()) return false;
  const PowerGrid grid = config.grid();
  if (table.grid().size() != grid.size()) return false;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    if (table.grid()[m] != grid[m]) return false;
  }
  return true;
}

void write_trace_header(std::ostream& out, const SimConfig& config, const Metrics& m) {
  std::vector<double> d;
  for (const auto& u : config.users) d.push_back(u.delay_bound);
  out << "# cogsched slot trace v1\n";
  out << "# users=" << config.users.size() << "\n";
  out << "# policy=" << to_string(config.policy) << "\n";
  out << "# seed=" << config.seed << "\n";
  out << "# horizon=" << config.horizon << "\n";
  out << "# lambda=" << join(m.lambda, ';') << "\n";
  out << "# delay_bound=" << join(d, ';') << "\n";
  out << "# V=" << fmt(config.v) << "\n";
  out << "# avg_threshold=" << fmt(config.avg_threshold) << "\n";
  out << "# inst_threshold=" << fmt(config.link.inst_threshold) << "\n";
  out << "# packet_length=" << fmt(config.link.packet_length) << "\n";
  out << "# stability_eps=" << fmt(config.stability_eps) << "\n";
  out << "# admission_scaled=" << (m.admission_scaled ? 1 : 0) << "\n";
  out << "# pmin_index=" << m.pmin_index << "\n";
  out << "# pmin=" << fmt(m.pmin) << "\n";
  out << "slot,arrivals,user,gamma,g,gamma_used,g_used,power,rate,sent,completed,interference\n";
}

}  // namespace

void SimConfig::validate() const {
  if (users.empty()) throw std::invalid_argument("at least one user is required");
  if (users.size() > max_dp_users) throw std::invalid_argument("too many users for the subset search");
  for (const auto& u : users) {
    if (!(u.lambda >= 0.0 && u.lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
    if (!(u.delay_bound >= 0.0)) throw std::invalid_argument("delay bounds must be non-negative");
    u.direct.validate();
    u.interference.validate();
  }
  link.csi.validate();
  if (!(link.packet_length > 0.0)) throw std::invalid_argument("packet_length must be positive");
  if (!(link.inst_threshold > 0.0)) throw std::invalid_argument("inst_threshold must be positive");
  if (!(link.max_power > 0.0)) throw std::invalid_argument("max_power must be positive");
  if (!(avg_threshold > 0.0)) throw std::invalid_argument("avg_threshold must be positive");
  if (!(v >= 0.0)) throw std::invalid_argument("V must be non-negative");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  if (grid_points < 2) throw std::invalid_argument("grid_points must be at least 2");
  if (!(power_floor > 0.0 && power_floor <= link.max_power)) {
    throw std::invalid_argument("power_floor must lie in (0, max_power]");
  }
  if (horizon < 1) throw std::invalid_argument("horizon must be at least one slot");
}

double max_delay_ratio(const Metrics& m, std::span<const UserProfile> users) {
  double worst = 0.0;
  for (std::size_t i = 0; i < users.size() && i < m.delay.size(); ++i) {
    if (m.delay[i] && users[i].delay_bound > 0.0) worst = std::max(worst, *m.delay[i] / users[i].delay_bound);
  }
  return worst;
}

std::shared_ptr<const ServiceTable> build_table(const SimConfig& config) {
  return std::make_shared<const ServiceTable>(
      ServiceTable::build(config.users, config.link, config.grid(), config.table));
}

Metrics run(const SimConfig& config, const RunOptions& options) {
  config.validate();
  const std::size_t n = config.users.size();
  std::shared_ptr<const ServiceTable> table = options.table;
  if (!table || !table_fits(*table, config)) table = build_table(config);

  Metrics header;
  header.policy = config.policy;
  header.seed = config.seed;

  // Admission control and the load-feasible power floor.
  std::vector<double> lambda(n);
  for (std::size_t i = 0; i < n; ++i) lambda[i] = config.users[i].lambda;
  const std::size_t top = table->grid().size() - 1;
  std::vector<double> rate_max(n);
  for (std::size_t i = 0; i < n; ++i) rate_max[i] = table->at_max(i).service_rate();
  for (double r : rate_max) {
    if (!(r > 0.0)) throw InfeasibleError("a user cannot be served even at P_max");
  }
  if (total_load(*table, lambda, top) >= 1.0) {
    lambda = admission_scale(lambda, rate_max, config.epsilon);
    header.admission_scaled = true;
  }
  header.lambda = lambda;
  header.pmin_index = find_pmin(*table, lambda, config.epsilon);
  header.pmin = table->grid()[header.pmin_index];
  std::vector<double> rate_pmin(n);
  for (std::size_t i = 0; i < n; ++i) rate_pmin[i] = table->at(i, header.pmin_index).service_rate();

  std::shared_ptr<const std::vector<std::vector<double>>> shadow = options.shadow_powers;
  if (config.policy == Policy::csma && !shadow) {
    SimConfig twin = config;
    twin.policy = Policy::doac;
    auto powers = std::make_shared<std::vector<std::vector<double>>>();
    RunOptions twin_options;
    twin_options.table = table;
    twin_options.plan_powers = powers.get();
    run(twin, twin_options);
    shadow = powers;
  }

  std::optional<PsiModel> psi_model;
  if (config.policy == Policy::doac) {
    const std::vector<double> zeros(n, 0.0);
    // Powers stay in [P_min, P_max]; below P_min a zero-weight user parked at the
    // back of the order can push the frame load toward one and stall the frame.
    psi_model = PsiModel::from_table(*table, config.users, lambda, zeros, 0.0, header.pmin_index);
  }

  std::vector<double> delay_bound(n);
  for (std::size_t i = 0; i < n; ++i) delay_bound[i] = config.users[i].delay_bound;
  Ledger ledger(lambda, delay_bound, config.v, config.avg_threshold, config.link.inst_threshold,
                config.stability_eps);

  std::vector<UserQueue> queues(n, UserQueue(config.link.packet_length));
  auto streams = make_streams(config.seed, n);
  Engine scheduler_rng = make_stream(config.seed, StreamPurpose::scheduler, 0);

  std::ostream* trace = options.slot_trace;
  if (trace) write_trace_header(*trace, config, header);
  std::ostream* flog = options.frame_log;
  if (flog) *flog << "frame,start,idle,busy,priority,power,y,x,r,fallback\n";

  const double pmax = config.link.max_power;
  FramePlan plan;
  std::vector<double> plan_y(n, 0.0);
  double plan_x = 0.0;
  std::size_t frame_index = 0;
  std::size_t fallbacks = 0;
  std::vector<int> arrived(n, 0);
  std::vector<ChannelRealization> truth(n), used(n);
  std::vector<std::size_t> backlog(n, 0);
  std::vector<double> mw_rates(n, 0.0);
  std::vector<double> weights(n, 0.0);

  for (Slot t = 0; t < config.horizon; ++t) {
    const std::size_t backlog_before = total_backlog(queues);
    bool any_arrival = false;
    for (std::size_t i = 0; i < n; ++i) {
      arrived[i] = arrive(queues[i], lambda[i], t, streams[i].arrivals);
      any_arrival = any_arrival || arrived[i];
    }
    // Every user's channel advances every slot, scheduled or not, so two
    // policies with one seed see the same fading sample paths.
    for (std::size_t i = 0; i < n; ++i) {
      truth[i].gamma = sample_gain(config.users[i].direct, streams[i].gamma);
      truth[i].g = sample_gain(config.users[i].interference, streams[i].g);
      used[i] = apply_csi_error(truth[i], config.link.csi, streams[i].csi_gamma, streams[i].csi_g);
    }

    if (ledger.at_frame_start()) {
      ledger.open_frame();
      const auto& vq = ledger.vq();
      plan_y = vq.y;
      plan_x = vq.x;
      switch (config.policy) {
        case Policy::doic:
          plan = doic_plan(vq.y, rate_max, pmax);
          break;
        case Policy::doac: {
          for (std::size_t i = 0; i < n; ++i) weights[i] = vq.y[i] * lambda[i];
          psi_model->reweight(weights, vq.x);
          auto sol = doac_opt(*psi_model, config.max_dp_users);
          if (sol.feasible) {
            plan = std::move(sol.plan);
          } else {
            plan = doic_plan(vq.y, rate_max, pmax);
            plan.power.assign(n, header.pmin);
            plan.tag = Policy::doac;
            plan.fallback = true;
            ++fallbacks;
          }
          break;
        }
        case Policy::subopt:
          plan = subopt_plan(vq.y, vq.x, rate_pmin, rate_max, header.pmin, pmax);
          break;
        case Policy::csma: {
          std::vector<double> powers(n, pmax);
          if (shadow && !shadow->empty()) powers = (*shadow)[std::min(frame_index, shadow->size() - 1)];
          plan = csma_plan(powers);
          break;
        }
        case Policy::maxweight:
          plan = maxweight_plan(n, pmax);
          break;
      }
      if (options.plan_powers) options.plan_powers->push_back(plan.power);
    }

    const SlotPhase phase = ledger.begin_slot(t, backlog_before, arrived);

    std::optional<std::size_t> who;
    double power = 0.0, rate = 0.0;
    UserQueue::ServeResult served;
    if (phase == SlotPhase::busy) {
      for (std::size_t i = 0; i < n; ++i) backlog[i] = queues[i].size();
      if (plan.mode == SchedulingMode::max_weight) {
        for (std::size_t i = 0; i < n; ++i) {
          mw_rates[i] = transmission_rate(capped_power(pmax, used[i].g, config.link.inst_threshold), used[i].gamma);
        }
        who = maxweight_select(backlog, mw_rates);
      } else {
        who = schedule_slot(plan, backlog, &scheduler_rng);
      }
      if (who) {
        const std::size_t u = *who;
        power = capped_power(plan.power[u], used[u].g, config.link.inst_threshold);
        rate = transmission_rate(power, used[u].gamma);
        served = queues[u].serve(rate, t);
        ledger.transmit(power, truth[u].g);
        if (served.completed) ledger.depart(u, packet_delay(served.departed));
      }
      ledger.count_transmitters(who ? 1 : 0);
    }

    if (trace && (any_arrival || who)) {
      std::string bits(n, '0');
      for (std::size_t i = 0; i < n; ++i) bits[i] = arrived[i] ? '1' : '0';
      auto& out = *trace;
      out << t << ',' << bits << ',';
      if (who) {
        const std::size_t u = *who;
        out << u << ',' << fmt(truth[u].gamma) << ',' << fmt(truth[u].g) << ',' << fmt(used[u].gamma) << ','
            << fmt(used[u].g) << ',' << fmt(power) << ',' << fmt(rate) << ',' << fmt(served.sent) << ','
            << (served.completed ? 1 : 0) << ',' << fmt(power * truth[u].g) << '\n';
      } else {
        out << "-1,0,0,0,0,0,0,0,0,0\n";
      }
    }

    if (auto frame = ledger.end_slot(total_backlog(queues))) {
      if (flog) {
        std::vector<std::size_t> prio = plan.priority;
        *flog << frame->index << ',' << frame->start_slot << ',' << frame->idle_len << ',' << frame->busy_len
              << ',' << (plan.mode == SchedulingMode::priority ? join(prio, ' ') : std::string("-")) << ','
              << join(plan.power, ' ') << ',' << join(plan_y, ' ') << ',' << fmt(plan_x) << ','
              << join(ledger.vq().r, ' ') << ',' << (plan.fallback ? 1 : 0) << '\n';
      }
      ++frame_index;
    }
  }

  Metrics m = ledger.finish(config.horizon, queues);
  m.policy = header.policy;
  m.seed = header.seed;
  m.admission_scaled = header.admission_scaled;
  m.pmin_index = header.pmin_index;
  m.pmin = header.pmin;
  m.fallback_frames = fallbacks;
  if (trace) *trace << "# fallback_frames=" << fallbacks << "\n";
  return m;
}

Metrics replay_trace(std::istream& in) {
  std::map<std::string, std::string> meta;
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) meta[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (line.rfind("slot,", 0) == 0) continue;
    rows.push_back(line);
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw std::runtime_error("trace is missing '" + key + "'");
    return it->second;
  };

  const std::size_t n = std::stoul(need("users"));
  const auto policy = parse_policy(need("policy"));
  if (!policy) throw std::runtime_error("trace names an unknown policy");
  const Slot horizon = std::stoll(need("horizon"));
  const double inst = std::stod(need("inst_threshold"));
  Ledger ledger(split_doubles(need("lambda"), ';'), split_doubles(need("delay_bound"), ';'), std::stod(need("V")),
                std::stod(need("avg_threshold")), inst, std::stod(need("stability_eps")));
  std::vector<UserQueue> queues(n, UserQueue(std::stod(need("packet_length"))));

  std::size_t next = 0;
  std::vector<int> arrived(n, 0);
  std::vector<std::string> cells;
  for (Slot t = 0; t < horizon; ++t) {
    cells.clear();
    bool has_row = false;
    if (next < rows.size()) {
      const std::string& row = rows[next];
      Slot slot = 0;
      std::from_chars(row.data(), row.data() + row.size(), slot);
      if (slot == t) {
        has_row = true;
        std::stringstream ss(row);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 12 || cells[1].size() != n) throw std::runtime_error("malformed trace row: " + row);
        ++next;
      } else if (slot < t) {
        throw std::runtime_error("trace rows out of order at slot " + std::to_string(slot));
      }
    }
    const std::size_t backlog_before = total_backlog(queues);
    for (std::size_t i = 0; i < n; ++i) {
      arrived[i] = has_row && cells[1][i] == '1';
      if (arrived[i]) queues[i].push(t);
    }
    if (ledger.at_frame_start()) ledger.open_frame();
    ledger.begin_slot(t, backlog_before, arrived);
    std::size_t transmitters = 0;
    // A repeated slot number would mean two transmitters in one slot.
    while (next < rows.size() && rows[next].rfind(std::to_string(t) + ",", 0) == 0) {
      ++next;
      ++transmitters;
    }
    if (has_row && cells[2] != "-1") {
      const std::size_t u = std::stoul(cells[2]);
      const double g_true = std::stod(cells[4]);
      const double power = std::stod(cells[7]);
      const double rate = std::stod(cells[8]);
      auto served = queues[u].serve(rate, t);
      ledger.transmit(power, g_true);
      if (served.completed) ledger.depart(u, packet_delay(served.departed));
      ++transmitters;
    }
    ledger.count_transmitters(transmitters);
    ledger.end_slot(total_backlog(queues));
  }

  Metrics m = ledger.finish(horizon, queues);
  m.policy = *policy;
  m.seed = std::stoull(need("seed"));
  m.admission_scaled = need("admission_scaled") == "1";
  m.pmin_index = std::stoul(need("pmin_index"));
  m.pmin = std::stod(need("pmin"));
  m.fallback_frames = std::stoul(need("fallback_frames"));
  return m;
}

bool StabilityReport::all_stable() const {
  return x_stable && std::all_of(y_stable.begin(), y_stable.end(), [](bool b) { return b; });
}

StabilityReport stability_monitor(const Metrics& metrics, double threshold) {
  StabilityReport r;
  r.threshold = threshold;
  r.y_ratio = metrics.y_ratio;
  r.x_ratio = metrics.x_ratio;
  r.y_stable.resize(r.y_ratio.size());
  for (std::size_t i = 0; i < r.y_ratio.size(); ++i) r.y_stable[i] = r.y_ratio[i] < threshold;
  r.x_stable = r.x_ratio < threshold;
  r.y_settle_frame = metrics.y_settle_frame;
  r.x_settle_frame = metrics.x_settle_frame;
  return r;
}

void write_metrics_header(std::ostream& out, std::size_t users) {
  out << "label,policy,lambda,seed,slots,frames";
  for (std::size_t i = 1; i <= users; ++i) out << ",delay_" << i;
  out << ",sum_delay,avg_interference,max_slot_interference";
  for (std::size_t i = 1; i <= users; ++i) out << ",y_ratio_" << i;
  out << ",x_ratio,y_settle_frame,x_settle_frame,admission_scaled,pmin,fallback_frames,inst_violations,"
         "single_violations\n";
}

void write_metrics_row(std::ostream& out, const std::string& label, double lambda, const Metrics& m) {
  out << label << ',' << to_string(m.policy) << ',' << fmt(lambda) << ',' << m.seed << ',' << m.slots << ','
      << m.frames;
  for (const auto& d : m.delay) out << ',' << (d ? fmt(*d) : std::string());
  out << ',' << fmt(m.sum_delay) << ',' << fmt(m.avg_interference) << ',' << fmt(m.max_slot_interference);
  for (double y : m.y_ratio) out << ',' << fmt(y);
  out << ',' << fmt(m.x_ratio) << ',' << m.y_settle_frame << ',' << m.x_settle_frame << ','
      << (m.admission_scaled ? 1 : 0) << ',' << fmt(m.pmin) << ',' << m.fallback_frames << ','
      << m.inst_violations << ',' << m.single_violations << '\n';
}

}  // namespace cogsched
