#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cogsched/scenario.hpp"
#include "cogsched/simulator.hpp"
#include "cogsched/validation.hpp"

namespace py = pybind11;
using namespace cogsched;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Uplink cognitive-radio scheduling simulator";

  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);

  py::enum_<Policy>(m, "Policy")
      .value("doic", Policy::doic)
      .value("doac", Policy::doac)
      .value("subopt", Policy::subopt)
      .value("csma", Policy::csma)
      .value("maxweight", Policy::maxweight);

  py::class_<GainDistribution>(m, "GainDistribution")
      .def(py::init<>())
      .def(py::init([](double mean, double max_gain) { return GainDistribution{mean, max_gain}; }), py::arg("mean"),
           py::arg("max_gain"))
      .def_readwrite("mean", &GainDistribution::mean)
      .def_readwrite("max_gain", &GainDistribution::max_gain)
      .def("cdf", &GainDistribution::cdf)
      .def("quantile", &GainDistribution::quantile)
      .def("truncated_mean", &GainDistribution::truncated_mean);

  py::class_<UserProfile>(m, "UserProfile")
      .def(py::init<>())
      .def_readwrite("lambda_", &UserProfile::lambda)
      .def_readwrite("delay_bound", &UserProfile::delay_bound)
      .def_readwrite("direct", &UserProfile::direct)
      .def_readwrite("interference", &UserProfile::interference);

  py::class_<LinkParams>(m, "LinkParams")
      .def(py::init<>())
      .def_readwrite("packet_length", &LinkParams::packet_length)
      .def_readwrite("inst_threshold", &LinkParams::inst_threshold)
      .def_readwrite("max_power", &LinkParams::max_power)
      .def_property(
          "alpha", [](const LinkParams& l) { return l.csi.alpha; },
          [](LinkParams& l, double a) { l.csi.alpha = a; });

  m.def("transmission_rate", &transmission_rate, py::arg("power"), py::arg("gamma"));
  m.def("capped_power", &capped_power, py::arg("power_param"), py::arg("g"), py::arg("inst_threshold"));
  m.def("waiting_time", &waiting_time, py::arg("mu"), py::arg("rho"), py::arg("rho_bar_prev"), py::arg("residual"));
  m.def("waiting_time_upper", &waiting_time_upper, py::arg("mu"), py::arg("rho"), py::arg("rho_bar_max_prev"),
        py::arg("residual"));
  m.def(
      "residual_time",
      [](const std::vector<std::pair<double, double>>& terms) {
        std::vector<LoadTerm> t;
        for (auto [l, s2] : terms) t.push_back({l, s2});
        return residual_time(t);
      },
      py::arg("terms"), "terms: list of (lambda, E[s^2])");
  m.def("choose_r", &choose_r, py::arg("y"), py::arg("lambda_"), py::arg("v"), py::arg("d"));
  m.def("update_y", &update_y, py::arg("y"), py::arg("delay_sum"), py::arg("arrivals"), py::arg("r"));
  m.def("update_x", &update_x, py::arg("x"), py::arg("energy"), py::arg("i_avg"), py::arg("frame_len"));

  py::class_<FramePlan>(m, "FramePlan")
      .def_readonly("priority", &FramePlan::priority)
      .def_readonly("power", &FramePlan::power)
      .def_readonly("fallback", &FramePlan::fallback);
  m.def(
      "doic_plan",
      [](const std::vector<double>& y, const std::vector<double>& rate, double pmax) { return doic_plan(y, rate, pmax); },
      py::arg("y"), py::arg("rate_at_pmax"), py::arg("max_power"));
  m.def(
      "subopt_plan",
      [](const std::vector<double>& y, double x, const std::vector<double>& rmin, const std::vector<double>& rmax,
         double pmin, double pmax) { return subopt_plan(y, x, rmin, rmax, pmin, pmax); },
      py::arg("y"), py::arg("x"), py::arg("rate_at_pmin"), py::arg("rate_at_pmax"), py::arg("pmin"), py::arg("pmax"));

  py::class_<ServiceTable, std::shared_ptr<ServiceTable>>(m, "ServiceTable")
      .def_property_readonly("users", &ServiceTable::users)
      .def_property_readonly("powers",
                             [](const ServiceTable& t) {
                               auto v = t.grid().values();
                               return std::vector<double>(v.begin(), v.end());
                             })
      .def("at",
           [](const ServiceTable& t, std::size_t user, std::size_t m) {
             const auto& s = t.at(user, m);
             return py::dict(py::arg("P") = s.power, py::arg("mu") = s.mu, py::arg("es") = s.es,
                             py::arg("es2") = s.es2);
           })
      .def("to_csv",
           [](const ServiceTable& t) {
             std::ostringstream out;
             t.write_csv(out);
             return out.str();
           })
      .def_static("from_csv", [](const std::string& text) {
        std::istringstream in(text);
        return std::make_shared<ServiceTable>(ServiceTable::read_csv(in));
      });

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("users", &SimConfig::users)
      .def_readwrite("link", &SimConfig::link)
      .def_readwrite("avg_threshold", &SimConfig::avg_threshold)
      .def_readwrite("v", &SimConfig::v)
      .def_readwrite("epsilon", &SimConfig::epsilon)
      .def_readwrite("policy", &SimConfig::policy)
      .def_readwrite("grid_points", &SimConfig::grid_points)
      .def_readwrite("power_floor", &SimConfig::power_floor)
      .def_readwrite("horizon", &SimConfig::horizon)
      .def_readwrite("seed", &SimConfig::seed)
      .def("validate", &SimConfig::validate);

  py::class_<Metrics>(m, "Metrics")
      .def_readonly("policy", &Metrics::policy)
      .def_readonly("seed", &Metrics::seed)
      .def_readonly("slots", &Metrics::slots)
      .def_readonly("frames", &Metrics::frames)
      .def_readonly("lambda_", &Metrics::lambda)
      .def_readonly("admission_scaled", &Metrics::admission_scaled)
      .def_readonly("pmin", &Metrics::pmin)
      .def_readonly("delay", &Metrics::delay)
      .def_readonly("sum_delay", &Metrics::sum_delay)
      .def_readonly("avg_interference", &Metrics::avg_interference)
      .def_readonly("max_slot_interference", &Metrics::max_slot_interference)
      .def_readonly("y", &Metrics::y)
      .def_readonly("x", &Metrics::x)
      .def_readonly("y_ratio", &Metrics::y_ratio)
      .def_readonly("x_ratio", &Metrics::x_ratio)
      .def_readonly("inst_violations", &Metrics::inst_violations)
      .def_readonly("single_violations", &Metrics::single_violations)
      .def_readonly("fallback_frames", &Metrics::fallback_frames)
      .def_readonly("arrivals", &Metrics::arrivals)
      .def_readonly("departures", &Metrics::departures)
      .def(py::self == py::self);

  m.def("build_table", [](const SimConfig& c) { return std::const_pointer_cast<ServiceTable>(build_table(c)); });
  m.def(
      "run",
      [](const SimConfig& c, std::shared_ptr<ServiceTable> table, bool trace) {
        RunOptions ro;
        ro.table = table;
        std::ostringstream out;
        if (trace) ro.slot_trace = &out;
        Metrics metrics;
        {
          py::gil_scoped_release release;
          metrics = run(c, ro);
        }
        return py::make_tuple(metrics, trace ? py::object(py::str(out.str())) : py::object(py::none()));
      },
      py::arg("config"), py::arg("table") = nullptr, py::arg("trace") = false,
      "Returns (metrics, trace_csv or None).");
  m.def(
      "replay_trace",
      [](const std::string& text) {
        std::istringstream in(text);
        return replay_trace(in);
      },
      py::arg("trace_csv"));

  py::class_<Scenario>(m, "Scenario")
      .def_static("load", &Scenario::load)
      .def_static("parse",
                  [](const std::string& text) {
                    std::istringstream in(text);
                    return Scenario::from_settings(KeyValues::parse(in));
                  })
      .def("apply", &Scenario::apply)
      .def_readwrite("lambdas", &Scenario::lambdas)
      .def_readwrite("seeds", &Scenario::seeds)
      .def_readwrite("horizon", &Scenario::horizon)
      .def_property_readonly("variants",
                             [](const Scenario& s) {
                               std::vector<std::string> names;
                               for (const auto& v : s.variants) names.push_back(v.name);
                               return names;
                             })
      .def(
          "config",
          [](const Scenario& s, const std::string& name, double lambda, std::uint64_t seed) {
            for (const auto& v : s.variants) {
              if (v.name == name) return s.config(v, lambda, seed);
            }
            auto p = parse_policy(name);
            if (!p) throw std::invalid_argument("unknown policy or variant '" + name + "'");
            return s.config(*p, lambda, seed);
          },
          py::arg("name"), py::arg("lambda_"), py::arg("seed") = 1);

  m.def(
      "sweep",
      [](const Scenario& s, std::size_t jobs) {
        SweepOptions so;
        so.jobs = jobs;
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = sweep(s, so);
        }
        py::list out;
        for (const auto& r : rows) {
          out.append(py::dict(py::arg("variant") = r.variant, py::arg("lambda_") = r.lambda, py::arg("seed") = r.seed,
                              py::arg("metrics") = r.metrics, py::arg("error") = r.error));
        }
        return out;
      },
      py::arg("scenario"), py::arg("jobs") = 1);

  m.def(
      "validate",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& r : validation::run_all(seed)) out.append(py::make_tuple(r.name, r.passed, r.detail));
        return out;
      },
      py::arg("seed") = 1);
}
