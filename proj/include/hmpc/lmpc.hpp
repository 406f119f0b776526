#pragma once

#include "hmpc/convex_qp.hpp"
#include "hmpc/plant_model.hpp"

#include <span>

namespace hmpc {

/// How maintenance enters the machine capacity limit.
///
/// `split` writes u <= C(h) and u <= Cbar (1 - m) as two rows; for binary m
/// this is the same feasible set as the product form, but m then only enters
/// right-hand sides, so the optimal value is convex in relaxed m and every
/// dual-based cut is globally valid. `combined` keeps the single product row
/// u <= C(h) (1 - m), which is bilinear in (h, m).
enum class CapacityCoupling { split, combined };

struct LmpcConfig {
  int horizon = 24;
  VectorXd inventory_weight;  // diagonal of Q, size n_x
  VectorXd safe_inventory;    // x_g, size n_x
  double energy_weight = 1.0;
  double smoothing_weight = 1.5;
  double slack_weight = 1e5;
  VectorXd terminal_health_floor;  // size n_u; zero entries are not enforced
  double terminal_slack_penalty = 1e6;
  VectorXd previous_input;  // u(-1), size n_u
  // Cost per unit of health discarded when maintenance would push h above 1.
  double health_disposal_penalty = 1e-4;
  CapacityCoupling coupling = CapacityCoupling::split;
  double tol = 1e-8;
  int max_iter = 200;

  /// Defaults sized for `model`: zero weights and targets, zero previous
  /// input, no terminal floor.
  static LmpcConfig defaults_for(const PlantModel& model, int horizon);
  void validate(const PlantModel& model) const;
};

/// Cumulative shipment targets sigma(k), one column per step of the horizon.
struct ProductionTarget {
  MatrixXd cumulative;  // n_p x N, nondecreasing along each row

  /// Zero until the last step, which carries the whole amount.
  static ProductionTarget end_of_horizon(const VectorXd& amount, int horizon);
  /// Evenly rising checkpoints reaching `amount` at the last step.
  static ProductionTarget linear_ramp(const VectorXd& amount, int horizon);

  int horizon() const { return static_cast<int>(cumulative.cols()); }
  void validate() const;
};

/// Positions of decision variables and constraint rows in the stacked QP.
///
/// Variables are grouped per step k = 0..N-1 as
///   [u(k) | d(k) | w(k) | xi(k) | v(k) | x(k+1) | h(k+1)]
/// followed by the terminal-health slack (n_u entries, only when a floor is
/// set). v(k) is the health discarded above 1. The total is
///   N * (4 n_u + 2 n_p + n_x) + (floor ? n_u : 0).
struct LmpcIndex {
  int n_x = 0, n_u = 0, n_p = 0, horizon = 0;
  bool terminal_slack = false;

  static int count_variables(int n_x, int n_u, int n_p, int horizon, bool terminal_slack);

  int block() const { return 4 * n_u + 2 * n_p + n_x; }
  int num_variables() const;
  int u(int k, int j) const { return k * block() + j; }
  int d(int k, int p) const { return k * block() + n_u + p; }
  int w(int k, int j) const { return k * block() + n_u + n_p + j; }
  int xi(int k, int p) const { return k * block() + 2 * n_u + n_p + p; }
  int v(int k, int j) const { return k * block() + 2 * n_u + 2 * n_p + j; }
  int x(int k, int i) const { return (k - 1) * block() + 3 * n_u + 2 * n_p + i; }  // k >= 1
  int h(int k, int j) const { return (k - 1) * block() + 3 * n_u + 2 * n_p + n_x + j; }
  int slack(int j) const { return horizon * block() + j; }

  // Row positions, filled by the builder (n_u x N, row-major by machine).
  Eigen::MatrixXi health_row;  // equality rows of the health dynamics
  Eigen::MatrixXi pm_row;      // inequality rows carrying the maintenance shutdown
};

struct LmpcProblem {
  qp::QuadraticProgram qp;
  LmpcIndex index;
  MatrixXd pm;  // plan slice actually used, n_u x N
  CapacityCoupling coupling = CapacityCoupling::split;
};

/// Optimal schedule over one horizon with the multipliers needed for cuts.
struct ScheduleSolution {
  qp::Status status = qp::Status::max_iter;
  double objective = 0.0;  // J_L
  MatrixXd u;   // n_u x N
  MatrixXd d;   // n_p x N
  MatrixXd x;   // n_x x (N+1), column 0 is the initial inventory
  MatrixXd h;   // n_u x (N+1), column 0 is the initial health
  MatrixXd w;   // n_u x N, McCormick auxiliaries
  MatrixXd xi;  // n_p x N, target slack
  MatrixXd disposal;        // n_u x N
  VectorXd terminal_slack;  // n_u
  MatrixXd pm;              // n_u x N, plan used
  MatrixXd capacity_duals;  // mu, n_u x N, >= 0
  MatrixXd health_duals;    // lambda^h, n_u x N
  MatrixXd cut_capacity;    // C_j(k) paired with mu in the subgradient
  double relaxed_energy_cost = 0.0;  // sum rho dt [(E+g)'u - g'w]
  int iterations = 0;
  double solve_seconds = 0.0;

  int horizon() const { return static_cast<int>(u.cols()); }
  bool optimal() const { return status == qp::Status::optimal; }
};

/// Whether the maintenance slice must be binary (the default) or may hold
/// relaxed values in [0,1] (sensitivity studies).
enum class PmValues { binary, relaxed };

LmpcProblem build_lmpc_qp(const PlantState& state0, const MatrixXd& pm,
                          std::span<const double> prices, const ProductionTarget& target,
                          const LmpcConfig& cfg, const PlantModel& model,
                          PmValues values = PmValues::binary);

ScheduleSolution solve_lmpc(const PlantState& state0, const MatrixXd& pm,
                            std::span<const double> prices, const ProductionTarget& target,
                            const LmpcConfig& cfg, const PlantModel& model,
                            PmValues values = PmValues::binary);

/// Largest |w_j(k) - h_j(k) u_j(k)| over the horizon.
double mccormick_gap(const ScheduleSolution& sol);

/// Energy cost of the solved trajectory under the exact bilinear intensity.
double evaluate_true_cost(const ScheduleSolution& sol, std::span<const double> prices,
                          const PlantModel& model);

}  // namespace hmpc
