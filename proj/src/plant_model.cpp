#include "hmpc/plant_model.hpp"

#include <stdexcept>
#include <string>

namespace hmpc {

namespace {

void require_size(const VectorXd& v, int n, const char* what) {
  if (v.size() != n) {
    throw std::invalid_argument(std::string(what) + ": expected size " +
                                std::to_string(n) + ", got " +
                                std::to_string(v.size()));
  }
}

void require_nonnegative(const VectorXd& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0)) {
      throw std::invalid_argument(std::string(what) + "[" + std::to_string(i) +
                                  "] must be nonnegative");
    }
  }
}

}  // namespace

void PlantModel::validate() const {
  const int nx = n_buffers();
  const int nu = n_machines();
  if (demand_matrix.rows() != nx) {
    throw std::invalid_argument("demand_matrix must have one row per buffer");
  }
  if (outflow_matrix.rows() != nx || outflow_matrix.cols() != nu) {
    throw std::invalid_argument("outflow_matrix shape does not match inflow_matrix");
  }
  for (int j = 0; j < nu; ++j) {
    int plus = 0;
    int minus = 0;
    for (int i = 0; i < nx; ++i) {
      const double b = inflow_matrix(i, j);
      if (b != 0.0 && b != 1.0 && b != -1.0) {
        throw std::invalid_argument("inflow_matrix entries must be in {-1,0,1}");
      }
      plus += b > 0.0;
      minus += b < 0.0;
      const double expected = b < 0.0 ? -1.0 : 0.0;
      if (outflow_matrix(i, j) != expected) {
        throw std::invalid_argument("outflow_matrix is inconsistent with inflow_matrix");
      }
    }
    if (plus > 1 || minus > 1) {
      throw std::invalid_argument("machine " + std::to_string(j + 1) +
                                  " feeds or draws from more than one buffer");
    }
  }
  for (Eigen::Index i = 0; i < demand_matrix.size(); ++i) {
    const double w = demand_matrix.data()[i];
    if (w != 0.0 && w != -1.0) {
      throw std::invalid_argument("demand_matrix entries must be in {-1,0}");
    }
  }
  require_size(degradation_rates, nu, "degradation_rates");
  require_size(restoration_rates, nu, "restoration_rates");
  require_size(capacity_loss_fraction, nu, "capacity_loss_fraction");
  require_size(as_new_capacity, nu, "as_new_capacity");
  require_size(as_new_energy_intensity, nu, "as_new_energy_intensity");
  require_size(energy_degradation_penalty, nu, "energy_degradation_penalty");
  require_size(buffer_min, nx, "buffer_min");
  require_size(buffer_max, nx, "buffer_max");
  require_nonnegative(degradation_rates, "degradation_rates");
  require_nonnegative(restoration_rates, "restoration_rates");
  require_nonnegative(capacity_loss_fraction, "capacity_loss_fraction");
  require_nonnegative(as_new_capacity, "as_new_capacity");
  require_nonnegative(as_new_energy_intensity, "as_new_energy_intensity");
  require_nonnegative(energy_degradation_penalty, "energy_degradation_penalty");
  require_nonnegative(buffer_min, "buffer_min");
  if ((capacity_loss_fraction.array() > 1.0).any()) {
    throw std::invalid_argument("capacity_loss_fraction must lie in [0,1]");
  }
  if ((buffer_min.array() > buffer_max.array()).any()) {
    throw std::invalid_argument("buffer_min must not exceed buffer_max");
  }
  if (!(pm_cost_per_hour >= 0.0)) {
    throw std::invalid_argument("pm_cost_per_hour must be nonnegative");
  }
  if (!(step_hours > 0.0)) {
    throw std::invalid_argument("step_hours must be positive");
  }
}

PlantModel make_plant_model(MatrixXd inflow, MatrixXd demand,
                            VectorXd degradation, VectorXd restoration,
                            VectorXd kappa, VectorXd capacity,
                            VectorXd energy_intensity, VectorXd gamma,
                            VectorXd buffer_min, VectorXd buffer_max,
                            double pm_cost_per_hour, double step_hours) {
  PlantModel model;
  model.outflow_matrix = derive_outflow_matrix(inflow);
  model.inflow_matrix = std::move(inflow);
  model.demand_matrix = std::move(demand);
  model.degradation_rates = std::move(degradation);
  model.restoration_rates = std::move(restoration);
  model.capacity_loss_fraction = std::move(kappa);
  model.as_new_capacity = std::move(capacity);
  model.as_new_energy_intensity = std::move(energy_intensity);
  model.energy_degradation_penalty = std::move(gamma);
  model.buffer_min = std::move(buffer_min);
  model.buffer_max = std::move(buffer_max);
  model.pm_cost_per_hour = pm_cost_per_hour;
  model.step_hours = step_hours;
  model.validate();
  return model;
}

MatrixXd derive_outflow_matrix(const MatrixXd& inflow) {
  return (inflow.array() < 0.0).select(MatrixXd::Constant(inflow.rows(), inflow.cols(), -1.0),
                                       MatrixXd::Zero(inflow.rows(), inflow.cols()));
}

VectorXd step_inventory(const VectorXd& x, const VectorXd& u, const VectorXd& d,
                        const PlantModel& model) {
  require_size(x, model.n_buffers(), "inventory");
  require_size(u, model.n_machines(), "rates");
  require_size(d, model.n_products(), "shipments");
  return x + model.inflow_matrix * u + model.demand_matrix * d;
}

VectorXd step_health_unclamped(const VectorXd& h, const VectorXd& u,
                               const VectorXd& m, const PlantModel& model) {
  const int nu = model.n_machines();
  require_size(h, nu, "health");
  require_size(u, nu, "rates");
  require_size(m, nu, "maintenance");
  return h.array() - model.degradation_rates.array() * u.array() +
         model.restoration_rates.array() * m.array();
}

VectorXd step_health(const VectorXd& h, const VectorXd& u, const VectorXd& m,
                     const PlantModel& model) {
  return step_health_unclamped(h, u, m, model).cwiseMax(0.0).cwiseMin(1.0);
}

VectorXd effective_capacity(const VectorXd& h, const PlantModel& model) {
  require_size(h, model.n_machines(), "health");
  return model.as_new_capacity.array() *
         (1.0 - model.capacity_loss_fraction.array() * (1.0 - h.array()));
}

VectorXd energy_intensity(const VectorXd& h, const PlantModel& model) {
  require_size(h, model.n_machines(), "health");
  return model.as_new_energy_intensity.array() *
         (1.0 + model.energy_degradation_penalty.array() * (1.0 - h.array()));
}

double step_energy(const VectorXd& u, const VectorXd& h, const PlantModel& model) {
  require_size(u, model.n_machines(), "rates");
  return model.step_hours * energy_intensity(h, model).dot(u);
}

double maintenance_cost(const VectorXd& m, const PlantModel& model) {
  require_size(m, model.n_machines(), "maintenance");
  return model.pm_cost_per_hour * m.cwiseAbs().sum();
}

}  // namespace hmpc
