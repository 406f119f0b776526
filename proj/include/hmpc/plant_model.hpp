#pragma once

#include <Eigen/Dense>

namespace hmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Discrete-time model of a multi-stage line: buffers, machines, products.
///
/// Inventory evolves as x(k+1) = x(k) + B_s u(k) + W_s d(k) and machine health
/// as h(k+1) = h(k) - B_h u(k) + W_h m(k). Both state-transition matrices are
/// the identity and are therefore not stored.
struct PlantModel {
  MatrixXd inflow_matrix;   // B_s, n_x x n_u, entries in {-1, 0, 1}
  MatrixXd demand_matrix;   // W_s, n_x x n_p, entries in {-1, 0}
  MatrixXd outflow_matrix;  // B_o, derived from B_s

  VectorXd degradation_rates;  // diag(B_h), health loss per unit processed
  VectorXd restoration_rates;  // diag(W_h), health gain per maintenance step
  VectorXd capacity_loss_fraction;      // kappa in [0,1]
  VectorXd as_new_capacity;             // units/hour
  VectorXd as_new_energy_intensity;     // kWh/unit
  VectorXd energy_degradation_penalty;  // gamma >= 0

  VectorXd buffer_min;
  VectorXd buffer_max;

  double pm_cost_per_hour = 0.0;
  double step_hours = 1.0;

  int n_buffers() const { return static_cast<int>(inflow_matrix.rows()); }
  int n_machines() const { return static_cast<int>(inflow_matrix.cols()); }
  int n_products() const { return static_cast<int>(demand_matrix.cols()); }

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

struct PlantState {
  VectorXd inventory;
  VectorXd health;
};

/// Builds a model from topology and parameters, deriving B_o and validating.
PlantModel make_plant_model(MatrixXd inflow, MatrixXd demand,
                            VectorXd degradation, VectorXd restoration,
                            VectorXd kappa, VectorXd capacity,
                            VectorXd energy_intensity, VectorXd gamma,
                            VectorXd buffer_min, VectorXd buffer_max,
                            double pm_cost_per_hour, double step_hours);

MatrixXd derive_outflow_matrix(const MatrixXd& inflow);

VectorXd step_inventory(const VectorXd& x, const VectorXd& u,
                        const VectorXd& d, const PlantModel& model);

/// Health after one step, clamped to [0,1].
VectorXd step_health(const VectorXd& h, const VectorXd& u, const VectorXd& m,
                     const PlantModel& model);

/// Health after one step without clamping; affine in (h, u, m).
VectorXd step_health_unclamped(const VectorXd& h, const VectorXd& u,
                               const VectorXd& m, const PlantModel& model);

VectorXd effective_capacity(const VectorXd& h, const PlantModel& model);

VectorXd energy_intensity(const VectorXd& h, const PlantModel& model);

/// kWh consumed over one step at rates u and health h.
double step_energy(const VectorXd& u, const VectorXd& h, const PlantModel& model);

double maintenance_cost(const VectorXd& m, const PlantModel& model);

}  // namespace hmpc
