#include "hmpc/gbd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace hmpc {

namespace {

using Clock = std::chrono::steady_clock;

double relative_gap(double upper, double lower) {
  return (upper - lower) / std::max(1.0, std::abs(upper));
}

}  // namespace

PlanningConfig PlanningConfig::daily_window(int slots, int first_hour, int last_hour, int crew) {
  PlanningConfig cfg;
  cfg.window.assign(static_cast<std::size_t>(slots), 0);
  cfg.crew_limit.assign(static_cast<std::size_t>(slots), crew);
  for (int t = 0; t < slots; ++t) {
    const int hour = t % 24;
    if (hour >= first_hour && hour < last_hour) cfg.window[static_cast<std::size_t>(t)] = 1;
  }
  return cfg;
}

void PlanningConfig::validate(int slots) const {
  if (window.size() != static_cast<std::size_t>(slots) ||
      crew_limit.size() != static_cast<std::size_t>(slots)) {
    throw std::invalid_argument("window and crew limit need one entry per slot");
  }
  if (price_weight < 0.0 || cost_weight < 0.0) {
    throw std::invalid_argument("planning weights must be nonnegative");
  }
}

const char* to_string(GbdStop stop) {
  switch (stop) {
    case GbdStop::converged: return "converged";
    case GbdStop::iteration_cap: return "iteration_cap";
    case GbdStop::repeated_plan: return "repeated_plan";
  }
  return "unknown";
}

Cut build_cut(const ScheduleSolution& sol, const MatrixXd& anchor, const PlantModel& model) {
  const int nu = model.n_machines();
  const int horizon = sol.horizon();
  if (!sol.optimal()) throw std::invalid_argument("cut needs an optimal subproblem solution");
  if (sol.capacity_duals.rows() != nu || sol.capacity_duals.cols() != horizon ||
      sol.health_duals.rows() != nu || sol.health_duals.cols() != horizon ||
      sol.cut_capacity.rows() != nu || sol.cut_capacity.cols() != horizon) {
    throw std::invalid_argument("subproblem solution is missing its multipliers");
  }
  if (anchor.rows() != nu || anchor.cols() < horizon) {
    throw std::invalid_argument("anchor plan does not cover the subproblem horizon");
  }
  Cut cut;
  cut.anchor_plan = anchor;
  cut.anchor_value = sol.objective;
  cut.slope = MatrixXd::Zero(nu, anchor.cols());
  for (int k = 0; k < horizon; ++k) {
    for (int j = 0; j < nu; ++j) {
      cut.slope(j, k) = sol.cut_capacity(j, k) * sol.capacity_duals(j, k) -
                        model.restoration_rates[j] * sol.health_duals(j, k);
    }
  }
  return cut;
}

double ub_candidate(double subproblem_value, const MatrixXd& plan,
                    std::span<const double> prices_est, const PlanningConfig& planning,
                    const PlantModel& model) {
  if (static_cast<Eigen::Index>(prices_est.size()) < plan.cols()) {
    throw std::invalid_argument("price series shorter than the plan");
  }
  double value = subproblem_value;
  for (Eigen::Index t = 0; t < plan.cols(); ++t) {
    const double hours = plan.col(t).sum();
    value += (-planning.price_weight * prices_est[static_cast<std::size_t>(t)] +
              planning.cost_weight * model.pm_cost_per_hour) *
             hours;
  }
  return value;
}

MasterProblem make_master(const PlantState& state0, std::span<const double> prices_est,
                          const LmpcConfig& lmpc, const PlanningConfig& planning,
                          const PlantModel& model) {
  const int slots = lmpc.horizon;
  planning.validate(slots);
  if (static_cast<int>(prices_est.size()) < slots) {
    throw std::invalid_argument("day-ahead prices do not cover the planning horizon");
  }
  MasterProblem p;
  p.machines = model.n_machines();
  p.slots = slots;
  p.window = planning.window;
  p.crew_limit = planning.crew_limit;
  p.price_est.assign(prices_est.begin(), prices_est.begin() + slots);
  p.price_weight = planning.price_weight;
  p.cost_weight = planning.cost_weight;
  p.pm_cost_per_hour = model.pm_cost_per_hour;
  p.theta_lower_bound = planning.theta_lower_bound;
  if (planning.health_pruning && lmpc.terminal_health_floor.size() == p.machines) {
    // h0 - b C dt N + w * hours >= h_min, with every hour at full capacity.
    HealthPruning pruning;
    pruning.min_pm_hours = Eigen::VectorXd::Zero(p.machines);
    for (int j = 0; j < p.machines; ++j) {
      const double floor = lmpc.terminal_health_floor[j];
      if (floor <= 0.0 || model.restoration_rates[j] <= 0.0) continue;
      const double wear = model.degradation_rates[j] * model.as_new_capacity[j] *
                          model.step_hours * slots;
      const double deficit = floor - state0.health[j] + wear;
      pruning.min_pm_hours[j] = std::max(0.0, deficit / model.restoration_rates[j]);
    }
    p.pruning = pruning;
  }
  return p;
}

PmPlanResult plan_pm(const PlantState& state0, const PriceSeries& prices_est,
                     const ProductionTarget& target, const LmpcConfig& lmpc,
                     const PlanningConfig& planning, const GbdConfig& gbd,
                     const PlantModel& model) {
  prices_est.require_kind(PriceKind::day_ahead, "PM planning");
  if (!(gbd.tolerance > 0.0)) throw std::invalid_argument("GBD tolerance must be positive");
  if (gbd.max_iterations < 1) throw std::invalid_argument("GBD needs at least one iteration");
  const auto prices = prices_est.window(0, static_cast<std::size_t>(lmpc.horizon));
  MasterProblem master = make_master(state0, prices, lmpc, planning, model);

  PmPlanResult out;
  double lower = -qp::kInf;
  double upper = qp::kInf;
  std::vector<MatrixXd> visited;

  for (int it = 1; it <= gbd.max_iterations; ++it) {
    const auto start = Clock::now();
    const MasterSolution ms = solve_master(master, gbd.master_gap);
    if (ms.status == MasterStatus::infeasible) {
      throw std::runtime_error("PM master infeasible: " + ms.infeasible_family + " constraints");
    }
    if (ms.status != MasterStatus::optimal) {
      throw std::runtime_error("PM master hit its node limit");
    }
    lower = std::max(lower, ms.lower_bound);

    const ScheduleSolution sub = solve_lmpc(state0, ms.m, prices, target, lmpc, model);
    if (!sub.optimal()) {
      throw std::runtime_error(std::string("L-MPC subproblem not optimal: ") +
                               qp::to_string(sub.status));
    }
    const double candidate = ub_candidate(sub.objective, ms.m, prices, planning, model);
    if (candidate < upper) {
      upper = candidate;
      out.plan = ms.m;
      out.objective = candidate;
      out.subproblem_value = sub.objective;
    }
    const bool repeated =
        std::any_of(visited.begin(), visited.end(), [&](const MatrixXd& v) { return v == ms.m; });
    visited.push_back(ms.m);
    Cut cut = build_cut(sub, ms.m, model);
    master.cuts.push_back(cut);
    out.trace.cuts.push_back(std::move(cut));

    GbdIteration rec;
    rec.iteration = it;
    rec.plan = ms.m;
    rec.theta = ms.theta;
    rec.lower_bound = lower;
    rec.upper_bound = upper;
    rec.subproblem_value = sub.objective;
    rec.master_nodes = ms.node_count;
    rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    out.trace.iterations.push_back(std::move(rec));

    if (relative_gap(upper, lower) <= gbd.tolerance) {
      out.trace.stop = GbdStop::converged;
      return out;
    }
    // The master returned a plan it has already seen: its cut is tight there,
    // so the remaining gap is numerical and cannot close further.
    if (repeated) {
      out.trace.stop = GbdStop::repeated_plan;
      return out;
    }
  }
  out.trace.stop = GbdStop::iteration_cap;
  return out;
}

std::vector<double> replay_lower_bounds(const MasterProblem& base, const GbdTrace& trace,
                                        double master_gap) {
  MasterProblem master = base;
  master.cuts.clear();
  std::vector<double> bounds;
  double lower = -qp::kInf;
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const MasterSolution ms = solve_master(master, master_gap);
    lower = std::max(lower, ms.lower_bound);
    bounds.push_back(lower);
    if (i < trace.cuts.size()) master.cuts.push_back(trace.cuts[i]);
  }
  return bounds;
}

}  // namespace hmpc
