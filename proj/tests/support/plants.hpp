#pragma once

// Small hand-built lines shared by the unit tests.

#include "hmpc/plant_model.hpp"

namespace hmpc::testing {

// One machine filling one shipping buffer.
inline PlantModel single_machine(double capacity = 40.0, double energy = 1.0,
                                 double gamma = 0.0) {
  return make_plant_model(Eigen::MatrixXd::Constant(1, 1, 1.0),
                          Eigen::MatrixXd::Constant(1, 1, -1.0),
                          Eigen::VectorXd::Constant(1, 5e-4),
                          Eigen::VectorXd::Constant(1, 0.15),
                          Eigen::VectorXd::Constant(1, 1.0),
                          Eigen::VectorXd::Constant(1, capacity),
                          Eigen::VectorXd::Constant(1, energy),
                          Eigen::VectorXd::Constant(1, gamma),
                          Eigen::VectorXd::Zero(1),
                          Eigen::VectorXd::Constant(1, 200.0), 100.0, 1.0);
}

// Two machines in series: M1 raw -> x1, M2 x1 -> x2, product shipped from x2.
inline PlantModel two_stage(double wear = 5e-3) {
  Eigen::MatrixXd inflow(2, 2);
  inflow << 1, -1,
            0, 1;
  Eigen::MatrixXd demand(2, 1);
  demand << 0, -1;
  return make_plant_model(inflow, demand, Eigen::Vector2d(wear, wear),
                          Eigen::Vector2d(0.15, 0.20), Eigen::Vector2d(1.0, 1.0),
                          Eigen::Vector2d(12.0, 10.0), Eigen::Vector2d(0.8, 1.6),
                          Eigen::Vector2d(0.5, 0.9), Eigen::Vector2d::Zero(),
                          Eigen::Vector2d(60.0, 60.0), 100.0, 1.0);
}

}  // namespace hmpc::testing
