#include "hmpc/report_io.hpp"
#include "hmpc/scenario.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace hmpc;

namespace {

py::dict kpi_dict(const KpiReport& k) {
  py::dict d;
  d["hours"] = k.hours;
  d["energy_cost"] = k.energy_cost;
  d["pm_cost"] = k.pm_cost;
  d["total_cost"] = k.total_cost;
  d["units_delivered"] = k.units_delivered;
  d["cost_per_unit"] = k.cost_per_unit ? py::object(py::float_(*k.cost_per_unit)) : py::none();
  d["avg_health"] = k.avg_health;
  d["pm_hours"] = k.pm_hours;
  return d;
}

KpiReport kpi_from(const py::dict& d) {
  KpiReport k;
  k.hours = d["hours"].cast<int>();
  k.energy_cost = d["energy_cost"].cast<double>();
  k.pm_cost = d["pm_cost"].cast<double>();
  k.total_cost = d["total_cost"].cast<double>();
  k.units_delivered = d["units_delivered"].cast<double>();
  if (d.contains("cost_per_unit") && !d["cost_per_unit"].is_none()) {
    k.cost_per_unit = d["cost_per_unit"].cast<double>();
  }
  k.avg_health = d["avg_health"].cast<double>();
  k.pm_hours = d["pm_hours"].cast<double>();
  return k;
}

qp::SparseMatrix sparse(const Eigen::MatrixXd& m) { return m.sparseView(); }

}  // namespace

PYBIND11_MODULE(_hmpc, m) {
  m.doc() = "Hierarchical PM planning and L-MPC production scheduling";

  py::register_exception<ScenarioError>(m, "ScenarioError", PyExc_ValueError);
  py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);

  py::class_<PlantModel>(m, "PlantModel")
      .def_property_readonly("n_buffers", &PlantModel::n_buffers)
      .def_property_readonly("n_machines", &PlantModel::n_machines)
      .def_property_readonly("n_products", &PlantModel::n_products)
      .def_readonly("inflow_matrix", &PlantModel::inflow_matrix)
      .def_readonly("demand_matrix", &PlantModel::demand_matrix)
      .def_readonly("outflow_matrix", &PlantModel::outflow_matrix)
      .def_readonly("as_new_capacity", &PlantModel::as_new_capacity)
      .def_readonly("pm_cost_per_hour", &PlantModel::pm_cost_per_hour)
      .def("step_inventory", [](const PlantModel& p, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& u, const Eigen::VectorXd& d) {
        return step_inventory(x, u, d, p);
      }, py::arg("x"), py::arg("u"), py::arg("d"))
      .def("step_health", [](const PlantModel& p, const Eigen::VectorXd& h,
                             const Eigen::VectorXd& u, const Eigen::VectorXd& pm) {
        return step_health(h, u, pm, p);
      }, py::arg("h"), py::arg("u"), py::arg("m"))
      .def("effective_capacity", [](const PlantModel& p, const Eigen::VectorXd& h) {
        return effective_capacity(h, p);
      }, py::arg("h"))
      .def("energy_intensity", [](const PlantModel& p, const Eigen::VectorXd& h) {
        return energy_intensity(h, p);
      }, py::arg("h"))
      .def("step_energy", [](const PlantModel& p, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& h) { return step_energy(u, h, p); },
           py::arg("u"), py::arg("h"));

  py::class_<ScenarioConfig>(m, "Scenario")
      .def_readwrite("name", &ScenarioConfig::name)
      .def_readwrite("days", &ScenarioConfig::days)
      .def_readonly("hours_per_day", &ScenarioConfig::hours_per_day)
      .def_readonly("plant", &ScenarioConfig::plant)
      .def_property("controller",
                    [](const ScenarioConfig& s) { return std::string(to_string(s.controller)); },
                    [](ScenarioConfig& s, const std::string& c) { s.controller = parse_controller(c); })
      .def_property("gbd_tolerance", [](const ScenarioConfig& s) { return s.gbd.tolerance; },
                    [](ScenarioConfig& s, double t) { s.gbd.tolerance = t; })
      .def_property("daily_demand", [](const ScenarioConfig& s) { return s.daily_demand; },
                    [](ScenarioConfig& s, const Eigen::VectorXd& d) { s.daily_demand = d; })
      .def("validate", &ScenarioConfig::validate)
      .def("to_json", &scenario_to_json)
      .def("__repr__", [](const ScenarioConfig& s) {
        return "<Scenario '" + s.name + "' " + std::to_string(s.days) + " days, " +
               to_string(s.controller) + ">";
      });

  m.def("load_scenario", &load_scenario, py::arg("path"));
  m.def("parse_scenario", &parse_scenario, py::arg("text"), py::arg("source") = "<scenario>");
  m.def("save_scenario", &save_scenario, py::arg("scenario"), py::arg("path"));
  m.def("battery_line_scenario", &battery_line_scenario);

  py::class_<SimResult>(m, "SimResult")
      .def_readonly("scenario", &SimResult::scenario)
      .def_property_readonly("controller",
                             [](const SimResult& r) { return std::string(to_string(r.controller)); })
      .def_readonly("x", &SimResult::x)
      .def_readonly("h", &SimResult::h)
      .def_readonly("u", &SimResult::u)
      .def_readonly("d", &SimResult::d)
      .def_readonly("m", &SimResult::m)
      .def_readonly("price_est", &SimResult::price_est)
      .def_readonly("price_act", &SimResult::price_act)
      .def_readonly("energy", &SimResult::energy)
      .def_readonly("solve_seconds", &SimResult::solve_seconds)
      .def_property_readonly("hours", &SimResult::hours)
      .def_property_readonly("shipped", [](const SimResult& r) {
        std::vector<Eigen::VectorXd> out;
        for (const DayRecord& d : r.days) out.push_back(d.shipped);
        return out;
      })
      .def_property_readonly("plans", [](const SimResult& r) {
        std::vector<Eigen::MatrixXd> out;
        for (const DayRecord& d : r.days) out.push_back(d.plan);
        return out;
      })
      .def("kpis", [](const SimResult& r) { return kpi_dict(compute_kpis(r)); })
      .def("system_intensity", &system_intensity)
      .def("write_bundle", &write_sim_bundle, py::arg("directory"));

  m.def("run_closed_loop",
        [](const ScenarioConfig& s, const std::filesystem::path& base_dir) {
          s.validate();
          const PricePair prices =
              materialize_prices(s.prices, static_cast<std::size_t>(s.total_hours()), base_dir);
          py::gil_scoped_release release;
          return run_closed_loop(s, prices);
        },
        py::arg("scenario"), py::arg("base_dir") = std::filesystem::path());

  m.def("plan_day",
        [](const ScenarioConfig& s, const std::filesystem::path& base_dir) {
          s.validate();
          const int T = s.hours_per_day;
          const PricePair prices =
              materialize_prices(s.prices, static_cast<std::size_t>(T), base_dir);
          LmpcConfig cfg = s.lmpc;
          cfg.horizon = T;
          cfg.terminal_health_floor = s.health_floor;
          cfg.previous_input = Eigen::VectorXd::Zero(s.plant.n_machines());
          PmPlanResult r;
          {
            py::gil_scoped_release release;
            r = plan_pm(s.initial, prices.estimate, s.daily_target(T), cfg, s.planning(), s.gbd,
                        s.plant);
          }
          py::dict d;
          d["plan"] = r.plan;
          d["objective"] = r.objective;
          d["subproblem_value"] = r.subproblem_value;
          d["stop"] = std::string(to_string(r.trace.stop));
          std::vector<double> lower, upper;
          for (const GbdIteration& it : r.trace.iterations) {
            lower.push_back(it.lower_bound);
            upper.push_back(it.upper_bound);
          }
          d["lower_bounds"] = lower;
          d["upper_bounds"] = upper;
          d["json"] = plan_to_json(r, s.name);
          return d;
        },
        py::arg("scenario"), py::arg("base_dir") = std::filesystem::path(),
        "GBD plan for the first day of the scenario.");

  m.def("compare_reports",
        [](const py::dict& a, const py::dict& b) {
          py::list rows;
          for (const MetricDiff& r : compare_reports(kpi_from(a), kpi_from(b))) {
            rows.append(py::make_tuple(r.metric, r.a, r.b,
                                       r.percent ? py::object(py::float_(*r.percent)) : py::none()));
          }
          return rows;
        },
        py::arg("a"), py::arg("b"));

  m.def("synth_prices",
        [](std::size_t hours, double base, double peak, const std::set<int>& peak_hours,
           std::uint64_t seed) { return synth_profile(hours, base, peak, peak_hours, seed).prices(); },
        py::arg("hours"), py::arg("base"), py::arg("peak"), py::arg("peak_hours"),
        py::arg("seed"));

  m.def("solve_qp",
        [](const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& A_eq,
           const Eigen::VectorXd& b_eq, const Eigen::MatrixXd& A_in, const Eigen::VectorXd& lower,
           const Eigen::VectorXd& upper, std::optional<Eigen::VectorXd> var_lower,
           std::optional<Eigen::VectorXd> var_upper, double tol) {
          const Eigen::Index n = q.size();
          qp::QuadraticProgram prob;
          prob.P = sparse(P);
          prob.q = q;
          prob.A_eq = sparse(A_eq.size() ? A_eq : Eigen::MatrixXd(0, n));
          prob.b_eq = b_eq;
          prob.A_in = sparse(A_in.size() ? A_in : Eigen::MatrixXd(0, n));
          prob.lower = lower;
          prob.upper = upper;
          prob.var_lower = var_lower.value_or(Eigen::VectorXd::Constant(n, -qp::kInf));
          prob.var_upper = var_upper.value_or(Eigen::VectorXd::Constant(n, qp::kInf));
          qp::QPSolution sol;
          {
            py::gil_scoped_release release;
            sol = qp::solve(prob, tol);
          }
          py::dict d;
          d["status"] = std::string(qp::to_string(sol.status));
          d["x"] = sol.primal;
          d["objective"] = sol.objective;
          d["duals_eq"] = sol.duals_eq;
          d["duals_in_lower"] = sol.duals_in_lower;
          d["duals_in_upper"] = sol.duals_in_upper;
          d["duals_var_lower"] = sol.duals_var_lower;
          d["duals_var_upper"] = sol.duals_var_upper;
          d["iterations"] = sol.iterations;
          return d;
        },
        py::arg("P"), py::arg("q"), py::arg("A_eq"), py::arg("b_eq"), py::arg("A_in"),
        py::arg("lower"), py::arg("upper"), py::arg("var_lower") = py::none(),
        py::arg("var_upper") = py::none(), py::arg("tol") = 1e-8,
        "minimize 1/2 x'Px + q'x s.t. A_eq x = b_eq, lower <= A_in x <= upper, box bounds.");
}
