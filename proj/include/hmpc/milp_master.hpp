#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace hmpc {

using Eigen::MatrixXd;

/// Optimality cut  theta >= anchor_value + <slope, m - anchor_plan>.
struct Cut {
  MatrixXd anchor_plan;  // n_u x T, binary
  double anchor_value = 0.0;
  MatrixXd slope;        // n_u x T

  double rhs_at(const MatrixXd& m) const;
  void validate(int machines, int slots) const;
};

/// Conservative day-end health condition expressed as a minimum number of
/// maintenance hours per machine.
struct HealthPruning {
  Eigen::VectorXd min_pm_hours;  // n_u, may be fractional; 0 disables a machine
};

/// Binary PM master over machines x day slots with accumulated cuts.
struct MasterProblem {
  int machines = 0;
  int slots = 0;
  std::vector<int> window;       // 1 where maintenance is allowed, per slot
  std::vector<int> crew_limit;   // concurrent PM activities, per slot
  std::vector<double> price_est; // $/kWh, per slot
  double price_weight = 1.5;     // reward for PM in expensive hours
  double cost_weight = 10.0;     // weight on the PM bill
  double pm_cost_per_hour = 100.0;
  std::vector<Cut> cuts;
  double theta_lower_bound = 0.0;
  std::optional<HealthPruning> pruning;

  /// Master cost of one PM hour in slot t: -price_weight * price + cost_weight * phi.
  double slot_cost(int t) const;
  /// Sum of slot costs over the plan (the master objective without theta).
  double plan_cost(const MatrixXd& m) const;
  /// Smallest theta allowed by the cuts and the lower bound at plan m.
  double theta_at(const MatrixXd& m) const;
  double objective_at(const MatrixXd& m) const { return theta_at(m) + plan_cost(m); }
  /// Binary, inside the window, within crew limits and pruning.
  bool admissible(const MatrixXd& m) const;

  void validate() const;
};

enum class MasterStatus { optimal, infeasible, node_limit };
const char* to_string(MasterStatus status);

struct MasterSolution {
  MasterStatus status = MasterStatus::infeasible;
  MatrixXd m;
  double theta = 0.0;
  double objective = 0.0;    // at the incumbent
  double lower_bound = 0.0;  // best remaining LP bound, <= objective
  long node_count = 0;
  std::string infeasible_family;  // "window", "crew" or "health pruning"
};

/// Partial assignment of the binaries: -1 free, 0 or 1 fixed. Indexed
/// machine-major, entry j * slots + t.
using Assignment = std::vector<signed char>;

struct Relaxation {
  bool feasible = false;
  double value = 0.0;
  MatrixXd m;  // relaxed values in [0,1]
  double theta = 0.0;
};

Relaxation solve_lp_relaxation(const MasterProblem& problem, const Assignment& fixed,
                               double tol = 1e-6);

struct BranchChoice {
  int machine = 0;
  int slot = 0;
};

/// Most fractional free entry, ties broken by lowest (machine, slot); empty
/// when every entry is within `integrality_tol` of 0 or 1.
std::optional<BranchChoice> select_branch(const MatrixXd& values, double integrality_tol = 1e-6);

/// Best-first branch and bound. Stops when the best open bound is within
/// gap_tol * max(1, |incumbent|) of the incumbent.
MasterSolution solve_master(const MasterProblem& problem, double gap_tol = 1e-7,
                            long node_limit = 1'000'000);

/// All admissible plans, for brute-force checks on small instances.
std::vector<MatrixXd> enumerate_plans(const MasterProblem& problem, std::size_t limit = 1u << 20);

}  // namespace hmpc
