#include "hmpc/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace hmpc {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kNegligibleRate = 1e-7;  // units/hour

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

std::string describe(const Eigen::VectorXd& v) {
  std::ostringstream out;
  out << std::setprecision(10) << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
  out << ']';
  return out.str();
}

// Cumulative target for the remaining hours of the day, net of what has
// already been shipped.
ProductionTarget remaining_target(const ProductionTarget& day, int hour,
                                  const Eigen::VectorXd& shipped) {
  const int remaining = day.horizon() - hour;
  ProductionTarget t;
  t.cumulative = day.cumulative.rightCols(remaining);
  for (Eigen::Index p = 0; p < t.cumulative.rows(); ++p) {
    t.cumulative.row(p).array() = (t.cumulative.row(p).array() - shipped[p]).max(0.0);
  }
  return t;
}

}  // namespace

const char* to_string(Controller controller) {
  return controller == Controller::hierarchical ? "hierarchical" : "baseline";
}

Controller parse_controller(const std::string& text) {
  if (text == "hierarchical") return Controller::hierarchical;
  if (text == "baseline") return Controller::baseline;
  throw std::invalid_argument("unknown controller '" + text + "'");
}

const char* to_string(TargetShape shape) {
  return shape == TargetShape::end_of_day ? "end_of_day" : "linear_ramp";
}

TargetShape parse_target_shape(const std::string& text) {
  if (text == "end_of_day") return TargetShape::end_of_day;
  if (text == "linear_ramp") return TargetShape::linear_ramp;
  throw std::invalid_argument("unknown target shape '" + text + "'");
}

PlanningConfig ScenarioConfig::planning() const {
  PlanningConfig cfg;
  cfg.window.assign(static_cast<std::size_t>(hours_per_day), 0);
  cfg.crew_limit.assign(static_cast<std::size_t>(hours_per_day), crew_limit);
  for (int t = window_start; t < window_end; ++t) cfg.window[static_cast<std::size_t>(t)] = 1;
  cfg.price_weight = price_weight;
  cfg.cost_weight = cost_weight;
  cfg.health_pruning = health_pruning;
  return cfg;
}

MatrixXd ScenarioConfig::baseline_plan() const {
  MatrixXd m = MatrixXd::Zero(plant.n_machines(), hours_per_day);
  for (const auto& slot : baseline_pm) m(slot.machine, slot.hour) = 1.0;
  return m;
}

ProductionTarget ScenarioConfig::daily_target(int horizon) const {
  return target_shape == TargetShape::end_of_day
             ? ProductionTarget::end_of_horizon(daily_demand, horizon)
             : ProductionTarget::linear_ramp(daily_demand, horizon);
}

void ScenarioConfig::validate() const {
  plant.validate();
  const int nu = plant.n_machines();
  require(days >= 1, "days must be at least 1");
  require(hours_per_day >= 1, "hours_per_day must be at least 1");
  require(daily_demand.size() == plant.n_products(), "daily_demand needs one entry per product");
  require((daily_demand.array() >= 0.0).all(), "daily_demand must be nonnegative");
  require(0 <= window_start && window_start <= window_end && window_end <= hours_per_day,
          "maintenance window must satisfy 0 <= start <= end <= hours_per_day");
  require(crew_limit >= 0, "crew_limit must be nonnegative");
  require(health_floor.size() == nu, "health_floor needs one entry per machine");
  require((health_floor.array() >= 0.0).all() && (health_floor.array() <= 1.0).all(),
          "health_floor must lie in [0,1]");
  require(initial.inventory.size() == plant.n_buffers(), "initial inventory needs n_x entries");
  require(initial.health.size() == nu, "initial health needs n_u entries");
  require((initial.health.array() >= 0.0).all() && (initial.health.array() <= 1.0).all(),
          "initial health must lie in [0,1]");
  require((initial.inventory.array() >= plant.buffer_min.array()).all() &&
              (initial.inventory.array() <= plant.buffer_max.array()).all(),
          "initial inventory must lie within the buffer bounds");
  std::vector<int> per_hour(static_cast<std::size_t>(hours_per_day), 0);
  for (const auto& slot : baseline_pm) {
    require(slot.machine >= 0 && slot.machine < nu, "baseline PM names an unknown machine");
    require(slot.hour >= window_start && slot.hour < window_end,
            "baseline PM hour lies outside the maintenance window");
    require(++per_hour[static_cast<std::size_t>(slot.hour)] <= crew_limit,
            "baseline PM exceeds the crew limit");
  }
  require(price_weight >= 0.0 && cost_weight >= 0.0, "planning weights must be nonnegative");
  require(gbd.tolerance > 0.0 && gbd.max_iterations >= 1, "invalid GBD settings");
  LmpcConfig check = lmpc;
  check.horizon = hours_per_day;
  check.terminal_health_floor = health_floor;
  check.previous_input = Eigen::VectorXd::Zero(nu);
  check.validate(plant);
}

PricePair materialize_prices(const PriceSpec& spec, std::size_t hours,
                             const std::filesystem::path& base_dir) {
  if (spec.actual_deviation < 0.0 || spec.actual_deviation >= 1.0) {
    throw std::invalid_argument("actual_deviation must lie in [0,1)");
  }
  if (spec.source == PriceSpec::Source::synthetic) {
    SynthProfile profile = spec.profile;
    profile.hours = hours;
    PriceSeries est = synth_profile(profile, PriceKind::day_ahead);
    PriceSeries act = spec.actual_deviation > 0.0
                          ? perturb_prices(est, spec.actual_deviation, spec.deviation_seed)
                          : est.as(PriceKind::actual);
    return {std::move(est), std::move(act)};
  }
  std::filesystem::path path = spec.csv_path;
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  const PriceSeries full = load_price_csv(path, spec.csv_unit, PriceKind::actual);
  if (full.size() < hours) {
    throw std::invalid_argument("price file has " + std::to_string(full.size()) +
                                " hours, scenario needs " + std::to_string(hours));
  }
  PriceSeries act(full.start(),
                  std::vector<double>(full.prices().begin(),
                                      full.prices().begin() + static_cast<std::ptrdiff_t>(hours)),
                  PriceKind::actual);
  PriceSeries est = spec.actual_deviation > 0.0
                        ? perturb_prices(act, spec.actual_deviation, spec.deviation_seed,
                                         PriceKind::day_ahead)
                        : act.as(PriceKind::day_ahead);
  return {std::move(est), std::move(act)};
}

SimResult run_closed_loop(const ScenarioConfig& sc) {
  sc.validate();
  return run_closed_loop(sc, materialize_prices(sc.prices, static_cast<std::size_t>(sc.total_hours())));
}

SimResult run_closed_loop(const ScenarioConfig& sc, const PricePair& prices) {
  sc.validate();
  prices.estimate.require_kind(PriceKind::day_ahead, "day-ahead planning");
  prices.actual.require_kind(PriceKind::actual, "closed-loop cost accounting");
  const PlantModel& plant = sc.plant;
  const int T = sc.hours_per_day;
  const int K = sc.total_hours();
  require(prices.estimate.size() >= static_cast<std::size_t>(K) &&
              prices.actual.size() >= static_cast<std::size_t>(K),
          "price series shorter than the simulated horizon");
  const int nu = plant.n_machines();

  SimResult r;
  r.scenario = sc.name;
  r.controller = sc.controller;
  r.hours_per_day = T;
  r.step_hours = plant.step_hours;
  r.pm_cost_per_hour = plant.pm_cost_per_hour;
  r.daily_demand = sc.daily_demand;
  r.x = MatrixXd::Zero(plant.n_buffers(), K + 1);
  r.h = MatrixXd::Zero(nu, K + 1);
  r.u = MatrixXd::Zero(nu, K);
  r.d = MatrixXd::Zero(plant.n_products(), K);
  r.m = MatrixXd::Zero(nu, K);
  r.x.col(0) = sc.initial.inventory;
  r.h.col(0) = sc.initial.health;

  const PlanningConfig planning = sc.planning();
  const ProductionTarget day_target = sc.daily_target(T);
  Eigen::VectorXd last_input = Eigen::VectorXd::Zero(nu);

  for (int day = 0; day < sc.days; ++day) {
    const int first = day * T;
    const PlantState start{r.x.col(first), r.h.col(first)};
    const PriceSeries est_day(prices.estimate.start(),
                              std::vector<double>(prices.estimate.prices().begin() + first,
                                                  prices.estimate.prices().begin() + first + T),
                              PriceKind::day_ahead);

    DayRecord rec;
    rec.day = day;
    LmpcConfig offline = sc.lmpc;
    offline.horizon = T;
    offline.terminal_health_floor = sc.health_floor;
    offline.previous_input = Eigen::VectorXd::Zero(nu);
    const auto plan_start = Clock::now();
    if (sc.controller == Controller::hierarchical) {
      PmPlanResult planned = plan_pm(start, est_day, day_target, offline, planning, sc.gbd, plant);
      rec.plan = planned.plan;
      rec.planned_objective = planned.objective;
      rec.trace = std::move(planned.trace);
    } else {
      rec.plan = sc.baseline_plan();
      rec.planned_objective = qp::kInf;
    }
    // Health the committed plan is expected to reach at day end.
    const ScheduleSolution preview =
        solve_lmpc(start, rec.plan, est_day.window(0, static_cast<std::size_t>(T)), day_target,
                   offline, plant);
    rec.planned_end_health = preview.h.col(T);
    if (sc.controller == Controller::baseline) {
      rec.planned_objective = ub_candidate(preview.objective, rec.plan,
                                           est_day.window(0, static_cast<std::size_t>(T)),
                                           planning, plant);
    }
    rec.planning_seconds = std::chrono::duration<double>(Clock::now() - plan_start).count();

    Eigen::VectorXd shipped = Eigen::VectorXd::Zero(plant.n_products());
    for (int hour = 0; hour < T; ++hour) {
      const int k = first + hour;
      const int horizon = T - hour;
      const PlantState now{r.x.col(k), r.h.col(k)};
      LmpcConfig online = sc.lmpc;
      online.horizon = horizon;
      online.terminal_health_floor = sc.health_floor;
      online.previous_input = last_input;
      const MatrixXd pm = rec.plan.rightCols(horizon);
      const auto act = prices.actual.window(static_cast<std::size_t>(k),
                                            static_cast<std::size_t>(horizon));
      const ProductionTarget target = remaining_target(day_target, hour, shipped);
      const ScheduleSolution sol = solve_lmpc(now, pm, act, target, online, plant);
      if (!sol.optimal()) {
        std::ostringstream msg;
        msg << "L-MPC failed at hour " << k << " (day " << day << ", hour " << hour
            << "): status " << qp::to_string(sol.status) << ", inventory "
            << describe(now.inventory) << ", health " << describe(now.health)
            << ", remaining target " << describe(target.cumulative.col(horizon - 1))
            << ", maintenance this hour " << describe(pm.col(0));
        throw SimulationError(msg.str());
      }

      // Strip solver roundoff so the applied input is physically admissible.
      const Eigen::VectorXd cap = effective_capacity(now.health, plant);
      Eigen::VectorXd u = sol.u.col(0).cwiseMax(0.0).cwiseMin(cap);
      for (int j = 0; j < nu; ++j) {
        if (pm(j, 0) > 0.5) u[j] = 0.0;
      }
      Eigen::VectorXd d = sol.d.col(0).cwiseMax(0.0);
      // Interior-point iterates leave ~1e-9 activity on idle variables.
      u = (u.array() < kNegligibleRate).select(0.0, u);
      d = (d.array() < kNegligibleRate).select(0.0, d);
      const Eigen::VectorXd m = pm.col(0);

      r.u.col(k) = u;
      r.d.col(k) = d;
      r.m.col(k) = m;
      r.x.col(k + 1) = step_inventory(now.inventory, u, d, plant);
      r.h.col(k + 1) = step_health(now.health, u, m, plant);
      r.energy.push_back(step_energy(u, now.health, plant));
      r.price_est.push_back(prices.estimate[static_cast<std::size_t>(k)]);
      r.price_act.push_back(prices.actual[static_cast<std::size_t>(k)]);
      r.solve_seconds.push_back(sol.solve_seconds);
      r.mccormick_gap.push_back(mccormick_gap(sol));
      shipped += d;
      last_input = u;
    }
    rec.shipped = shipped;
    rec.shortfall = (sc.daily_demand - shipped).cwiseMax(0.0);
    r.days.push_back(std::move(rec));
  }
  return r;
}

KpiReport compute_kpis(const SimResult& r) {
  KpiReport k;
  k.hours = r.hours();
  for (int t = 0; t < r.hours(); ++t) {
    k.energy_cost += energy_cost(r.price_act[static_cast<std::size_t>(t)],
                                 r.energy[static_cast<std::size_t>(t)]);
  }
  k.pm_hours = r.m.sum();
  k.pm_cost = r.pm_cost_per_hour * k.pm_hours;
  k.total_cost = k.energy_cost + k.pm_cost;
  k.units_delivered = r.d.sum();
  if (k.units_delivered > 0.0) k.cost_per_unit = k.total_cost / k.units_delivered;
  if (r.hours() > 0 && r.h.rows() > 0) k.avg_health = r.h.leftCols(r.hours()).mean();
  return k;
}

std::vector<double> system_intensity(const SimResult& r) {
  std::vector<double> out(static_cast<std::size_t>(r.hours()));
  for (int t = 0; t < r.hours(); ++t) {
    out[static_cast<std::size_t>(t)] = r.step_hours * r.u.col(t).sum();
  }
  return out;
}

std::vector<MetricDiff> compare_reports(const KpiReport& a, const KpiReport& b) {
  if (a.hours != b.hours) {
    throw std::invalid_argument("reports cover different horizons (" + std::to_string(a.hours) +
                                " vs " + std::to_string(b.hours) + " hours)");
  }
  auto row = [](const char* name, std::optional<double> x, std::optional<double> y) {
    MetricDiff diff;
    diff.metric = name;
    diff.a = x.value_or(std::nan(""));
    diff.b = y.value_or(std::nan(""));
    if (x && y && *x != 0.0) diff.percent = (*y - *x) / *x * 100.0;
    return diff;
  };
  return {
      row("Energy Cost ($)", a.energy_cost, b.energy_cost),
      row("PM Cost ($)", a.pm_cost, b.pm_cost),
      row("Total Cost ($)", a.total_cost, b.total_cost),
      row("Cost/Unit ($/Unit)", a.cost_per_unit, b.cost_per_unit),
      row("Avg. Health", a.avg_health, b.avg_health),
      row("PM (Hours)", a.pm_hours, b.pm_hours),
  };
}

std::string format_comparison(const std::vector<MetricDiff>& rows, const std::string& a_label,
                              const std::string& b_label) {
  std::ostringstream out;
  out << std::left << std::setw(20) << "Metric" << std::right << std::setw(14) << a_label
      << std::setw(14) << b_label << std::setw(11) << "Diff (%)" << '\n';
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    out << std::left << std::setw(20) << r.metric << std::right;
    if (std::isnan(r.a)) out << std::setw(14) << "n/a"; else out << std::setw(14) << r.a;
    if (std::isnan(r.b)) out << std::setw(14) << "n/a"; else out << std::setw(14) << r.b;
    if (r.percent) {
      // Avoid printing "-0.00" for a change that rounds to zero.
      const double p = std::abs(*r.percent) < 0.005 ? 0.0 : *r.percent;
      out << std::setw(11) << std::showpos << p << std::noshowpos;
    } else {
      out << std::setw(11) << "n/a";
    }
    out << '\n';
  }
  return out.str();
}

double replay_deviation(const SimResult& r, const PlantModel& model) {
  double worst = 0.0;
  Eigen::VectorXd x = r.x.col(0);
  Eigen::VectorXd h = r.h.col(0);
  for (int t = 0; t < r.hours(); ++t) {
    x = step_inventory(x, r.u.col(t), r.d.col(t), model);
    h = step_health(h, r.u.col(t), r.m.col(t), model);
    worst = std::max({worst, (x - r.x.col(t + 1)).cwiseAbs().maxCoeff(),
                      (h - r.h.col(t + 1)).cwiseAbs().maxCoeff()});
  }
  return worst;
}

}  // namespace hmpc
