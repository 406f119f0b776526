#pragma once

// Two-machine day of four slots used by the planning tests and the
// acceptance suite. The floor is reachable only with maintenance on the
// second machine, so the optimum is not the empty plan.

#include "hmpc/gbd.hpp"
#include "plants.hpp"

namespace hmpc::testing {

struct PlanningCase {
  PlantModel model;
  LmpcConfig lmpc;
  PlantState state0;
  PriceSeries prices{"2024-05-01T00:00", {0.04, 0.12, 0.03, 0.09}, PriceKind::day_ahead};
  ProductionTarget target;
  PlanningConfig planning;
};

inline PlanningCase tiny_planning_case() {
  PlanningCase c;
  c.model = two_stage(5e-3);
  c.lmpc = LmpcConfig::defaults_for(c.model, 4);
  c.lmpc.inventory_weight = Eigen::Vector2d(0.05, 0.1);
  c.lmpc.smoothing_weight = 0.1;
  c.lmpc.terminal_health_floor = Eigen::Vector2d(0.65, 0.65);
  c.state0 = {Eigen::Vector2d(4.0, 2.0), Eigen::Vector2d(0.72, 0.70)};
  c.target = ProductionTarget::end_of_horizon(Eigen::VectorXd::Constant(1, 16.0), 4);
  c.planning = PlanningConfig::daily_window(4, 0, 4, 1);
  c.planning.cost_weight = 1.0;
  return c;
}

}  // namespace hmpc::testing
