#pragma once

#include "hmpc/lmpc.hpp"
#include "hmpc/milp_master.hpp"
#include "hmpc/price.hpp"

#include <span>
#include <vector>

namespace hmpc {

struct GbdConfig {
  double tolerance = 1e-4;  // relative: (UB - LB) / max(1, |UB|)
  int max_iterations = 200;
  double master_gap = 1e-7;
};

/// Master-side settings of the day-ahead PM problem.
struct PlanningConfig {
  std::vector<int> window;      // per slot, 1 where PM is allowed
  std::vector<int> crew_limit;  // per slot
  double price_weight = 1.5;
  double cost_weight = 10.0;
  double theta_lower_bound = 0.0;
  // Adds the conservative day-end health condition to the master. Off by
  // default; the subproblem enforces the floor with a penalized slack.
  bool health_pruning = false;

  /// Window [first_hour, last_hour) open every day, same crew limit throughout.
  static PlanningConfig daily_window(int slots, int first_hour, int last_hour, int crew);
  void validate(int slots) const;
};

struct GbdIteration {
  int iteration = 0;
  MatrixXd plan;
  double theta = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double subproblem_value = 0.0;  // J_L at `plan`
  long master_nodes = 0;
  double seconds = 0.0;
};

enum class GbdStop { converged, iteration_cap, repeated_plan };
const char* to_string(GbdStop stop);

struct GbdTrace {
  std::vector<GbdIteration> iterations;
  std::vector<Cut> cuts;
  GbdStop stop = GbdStop::iteration_cap;

  bool converged() const { return stop == GbdStop::converged; }
  double lower_bound() const { return iterations.empty() ? 0.0 : iterations.back().lower_bound; }
  double upper_bound() const { return iterations.empty() ? 0.0 : iterations.back().upper_bound; }
};

struct PmPlanResult {
  MatrixXd plan;           // incumbent, n_u x T
  double objective = 0.0;  // upper bound at the incumbent
  double subproblem_value = 0.0;
  GbdTrace trace;
};

/// Subgradient cut of the L-MPC value at `anchor`. Step k of the schedule
/// maps to slot k of the day (hourly steps, full-day horizon).
Cut build_cut(const ScheduleSolution& sol, const MatrixXd& anchor, const PlantModel& model);

/// J_L(m) plus the master-side PM terms at m.
double ub_candidate(double subproblem_value, const MatrixXd& plan,
                    std::span<const double> prices_est, const PlanningConfig& planning,
                    const PlantModel& model);

/// Master problem for the day without cuts.
MasterProblem make_master(const PlantState& state0, std::span<const double> prices_est,
                          const LmpcConfig& lmpc, const PlanningConfig& planning,
                          const PlantModel& model);

/// Generalized Benders loop over the day's PM plan. `prices_est` must be a
/// day-ahead series covering the L-MPC horizon.
PmPlanResult plan_pm(const PlantState& state0, const PriceSeries& prices_est,
                     const ProductionTarget& target, const LmpcConfig& lmpc,
                     const PlanningConfig& planning, const GbdConfig& gbd,
                     const PlantModel& model);

/// Re-solves the master with the trace's cuts added one at a time and
/// returns the lower bounds it reaches; used to check that a stored trace
/// reproduces.
std::vector<double> replay_lower_bounds(const MasterProblem& base, const GbdTrace& trace,
                                        double master_gap = 1e-7);

}  // namespace hmpc
