#include "doctest.h"

#include "hmpc/lmpc.hpp"
#include "../support/plants.hpp"

#include <vector>

using namespace hmpc;

namespace {

PlantState state_of(const PlantModel& model, double health = 1.0) {
  return {VectorXd::Zero(model.n_buffers()), VectorXd::Constant(model.n_machines(), health)};
}

MatrixXd no_pm(const PlantModel& model, int n) { return MatrixXd::Zero(model.n_machines(), n); }

LmpcConfig plain_config(const PlantModel& model, int n) {
  auto cfg = LmpcConfig::defaults_for(model, n);
  cfg.smoothing_weight = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("maintenance shuts the machine down") {
  const auto model = testing::single_machine();
  const auto cfg = plain_config(model, 1);
  const std::vector<double> prices{0.05};
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Constant(1, 10.0), 1);
  const auto sol = solve_lmpc(state_of(model), MatrixXd::Ones(1, 1), prices, target, cfg, model);
  REQUIRE(sol.optimal());
  CHECK(std::abs(sol.u(0, 0)) <= 1e-7);
  CHECK(sol.xi(0, 0) == doctest::Approx(10.0).epsilon(1e-8));
}

TEST_CASE("the envelope is exact at full health") {
  auto model = testing::single_machine(40.0, 1.0, 0.3);
  auto cfg = plain_config(model, 2);
  const std::vector<double> prices{0.05, 0.05};
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Constant(1, 10.0), 2);
  const auto sol = solve_lmpc(state_of(model), no_pm(model, 2), prices, target, cfg, model);
  REQUIRE(sol.optimal());
  CHECK(sol.u(0, 0) == doctest::Approx(10.0).epsilon(1e-7));
  CHECK(sol.w(0, 0) == doctest::Approx(sol.u(0, 0)).epsilon(1e-7));
  CHECK(mccormick_gap(sol) <= 1e-6);
}

TEST_CASE("variable count follows the stacking rule") {
  CHECK(LmpcIndex::count_variables(6, 7, 1, 24, true) == 871);
  CHECK(LmpcIndex::count_variables(6, 7, 1, 24, false) == 864);

  const auto model = testing::two_stage();
  auto cfg = plain_config(model, 5);
  cfg.terminal_health_floor = VectorXd::Constant(2, 0.6);
  const std::vector<double> prices(5, 0.04);
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Constant(1, 3.0), 5);
  const auto prob = build_lmpc_qp(state_of(model), no_pm(model, 5), prices, target, cfg, model);
  CHECK(prob.qp.num_variables() == LmpcIndex::count_variables(2, 2, 1, 5, true));
  CHECK(prob.index.num_variables() == prob.qp.num_variables());
}

TEST_CASE("idle plant with no target costs nothing") {
  const auto model = testing::two_stage();
  auto cfg = LmpcConfig::defaults_for(model, 6);
  cfg.inventory_weight = VectorXd::Constant(2, 0.1);
  const std::vector<double> prices(6, 0.05);
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Zero(1), 6);
  const auto sol = solve_lmpc(state_of(model), no_pm(model, 6), prices, target, cfg, model);
  REQUIRE(sol.optimal());
  CHECK(sol.u.cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(sol.d.cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(std::abs(sol.objective) <= 1e-7);
  CHECK(mccormick_gap(sol) <= 1e-7);
  CHECK(evaluate_true_cost(sol, prices, model) == doctest::Approx(0.0));
}

TEST_CASE("a capacity-feasible target is met without slack") {
  const auto model = testing::single_machine();
  const auto cfg = plain_config(model, 4);
  const std::vector<double> prices(4, 0.05);
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Constant(1, 10.0), 4);
  const auto sol = solve_lmpc(state_of(model), no_pm(model, 4), prices, target, cfg, model);
  REQUIRE(sol.optimal());
  CHECK(sol.d.sum() == doctest::Approx(10.0).epsilon(1e-7));
  CHECK(sol.xi.cwiseAbs().maxCoeff() <= 1e-7);
  // Shipments only draw on stock produced in earlier hours.
  for (int k = 0; k < 4; ++k) CHECK(sol.d(0, k) <= sol.x(0, k) + 1e-7);
}

TEST_CASE("production moves to the cheap hour") {
  const auto model = testing::single_machine();
  auto cfg = plain_config(model, 3);
  cfg.energy_weight = 100.0;
  const std::vector<double> prices{0.20, 0.02, 0.20};
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Constant(1, 10.0), 3);
  const auto sol = solve_lmpc(state_of(model), no_pm(model, 3), prices, target, cfg, model);
  REQUIRE(sol.optimal());
  CHECK(sol.u(0, 1) >= sol.u(0, 0));
  CHECK(sol.u(0, 1) == doctest::Approx(10.0).epsilon(1e-6));
}

TEST_CASE("linear ramp targets are tracked at each checkpoint") {
  const auto model = testing::two_stage();
  const auto cfg = plain_config(model, 6);
  const std::vector<double> prices(6, 0.05);
  const auto target = ProductionTarget::linear_ramp(VectorXd::Constant(1, 12.0), 6);
  CHECK(target.cumulative(0, 2) == doctest::Approx(6.0));
  const auto sol = solve_lmpc(state_of(model), no_pm(model, 6), prices, target, cfg, model);
  REQUIRE(sol.optimal());
  double shipped = 0.0;
  for (int k = 0; k < 6; ++k) {
    shipped += sol.d(0, k);
    CHECK(shipped + sol.xi(0, k) >= target.cumulative(0, k) - 1e-6);
  }
}

TEST_CASE("constraints hold at the optimum") {
  const auto model = testing::two_stage(0.02);
  auto cfg = LmpcConfig::defaults_for(model, 8);
  cfg.inventory_weight = Eigen::Vector2d(0.04, 0.1);
  cfg.terminal_health_floor = VectorXd::Constant(2, 0.5);
  const std::vector<double> prices{0.03, 0.03, 0.08, 0.12, 0.12, 0.05, 0.03, 0.03};
  MatrixXd pm = no_pm(model, 8);
  pm(0, 3) = 1.0;
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Constant(1, 30.0), 8);
  const PlantState s0{Eigen::Vector2d(5.0, 2.0), Eigen::Vector2d(0.7, 0.8)};
  const auto sol = solve_lmpc(s0, pm, prices, target, cfg, model);
  REQUIRE(sol.optimal());
  const double tol = 1e-6;
  for (int k = 0; k < 8; ++k) {
    VectorXd h = sol.h.col(k);
    VectorXd step_x = step_inventory(sol.x.col(k), sol.u.col(k), sol.d.col(k), model);
    CHECK((step_x - sol.x.col(k + 1)).cwiseAbs().maxCoeff() <= tol);
    VectorXd step_h = step_health_unclamped(h, sol.u.col(k), pm.col(k), model) - sol.disposal.col(k);
    CHECK((step_h - sol.h.col(k + 1)).cwiseAbs().maxCoeff() <= tol);
    const VectorXd cap = effective_capacity(h, model);
    for (int j = 0; j < 2; ++j) {
      CHECK(sol.u(j, k) <= cap[j] * (1.0 - pm(j, k)) + tol);
      const double cbar = model.as_new_capacity[j];
      CHECK(sol.w(j, k) <= sol.u(j, k) + tol);
      CHECK(sol.w(j, k) <= cbar * h[j] + tol);
      CHECK(sol.w(j, k) >= sol.u(j, k) - cbar * (1.0 - h[j]) - tol);
      CHECK(sol.w(j, k) >= -tol);
      CHECK(sol.capacity_duals(j, k) >= -tol);
    }
    CHECK(sol.h.col(k + 1).minCoeff() >= -tol);
    CHECK(sol.h.col(k + 1).maxCoeff() <= 1.0 + tol);
  }
  // The relaxed cost never exceeds the bilinear cost: the envelope's upper rows
  // bound w from above and w enters with a negative coefficient.
  CHECK(evaluate_true_cost(sol, prices, model) >= sol.relaxed_energy_cost - 1e-6);
}

TEST_CASE("maintenance above full health is discarded") {
  const auto model = testing::single_machine();
  const auto cfg = plain_config(model, 1);
  const std::vector<double> prices{0.05};
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Zero(1), 1);
  const auto sol =
      solve_lmpc(state_of(model, 0.95), MatrixXd::Ones(1, 1), prices, target, cfg, model);
  REQUIRE(sol.optimal());
  CHECK(sol.h(0, 1) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.disposal(0, 0) == doctest::Approx(0.10).epsilon(1e-6));
}

TEST_CASE("unreachable terminal health floor is absorbed by its slack") {
  const auto model = testing::single_machine();
  auto cfg = plain_config(model, 2);
  cfg.terminal_health_floor = VectorXd::Constant(1, 0.9);
  const std::vector<double> prices(2, 0.05);
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Zero(1), 2);
  const auto sol = solve_lmpc(state_of(model, 0.5), no_pm(model, 2), prices, target, cfg, model);
  REQUIRE(sol.optimal());
  CHECK(sol.terminal_slack[0] == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("split and combined coupling agree on binary plans") {
  const auto model = testing::two_stage(0.01);
  auto cfg = plain_config(model, 6);
  cfg.smoothing_weight = 0.5;
  const std::vector<double> prices{0.05, 0.09, 0.02, 0.02, 0.07, 0.04};
  MatrixXd pm = no_pm(model, 6);
  pm(1, 2) = 1.0;
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Constant(1, 20.0), 6);
  const PlantState s0{Eigen::Vector2d(4.0, 4.0), Eigen::Vector2d(0.8, 0.7)};
  const auto a = solve_lmpc(s0, pm, prices, target, cfg, model);
  cfg.coupling = CapacityCoupling::combined;
  const auto b = solve_lmpc(s0, pm, prices, target, cfg, model);
  REQUIRE(a.optimal());
  REQUIRE(b.optimal());
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-6));
}

TEST_CASE("without the energy term the schedule ignores the price level") {
  const auto model = testing::two_stage();
  auto cfg = LmpcConfig::defaults_for(model, 6);
  cfg.energy_weight = 0.0;
  cfg.inventory_weight = VectorXd::Constant(2, 0.05);
  const std::vector<double> prices{0.05, 0.09, 0.02, 0.02, 0.07, 0.04};
  std::vector<double> scaled;
  for (double p : prices) scaled.push_back(7.5 * p);
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Constant(1, 15.0), 6);
  const auto a = solve_lmpc(state_of(model), no_pm(model, 6), prices, target, cfg, model);
  const auto b = solve_lmpc(state_of(model), no_pm(model, 6), scaled, target, cfg, model);
  CHECK((a.u - b.u).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((a.d - b.d).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("multipliers predict the effect of relaxed maintenance") {
  const auto model = testing::two_stage(0.02);
  auto cfg = plain_config(model, 5);
  cfg.smoothing_weight = 0.3;
  cfg.terminal_health_floor = VectorXd::Constant(2, 0.75);
  const std::vector<double> prices{0.05, 0.06, 0.03, 0.08, 0.04};
  const PlantState s0{Eigen::Vector2d(10.0, 6.0), Eigen::Vector2d(0.7, 0.75)};
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Constant(1, 25.0), 5);
  MatrixXd pm = no_pm(model, 5);
  pm(0, 1) = 1.0;
  const auto base = solve_lmpc(s0, pm, prices, target, cfg, model);
  REQUIRE(base.optimal());

  const double delta = 1e-3;
  int compared = 0;
  for (int j = 0; j < 2; ++j) {
    for (int k = 0; k < 5; ++k) {
      MatrixXd moved = pm;
      moved(j, k) += pm(j, k) > 0.5 ? -delta : delta;
      const auto pert = solve_lmpc(s0, moved, prices, target, cfg, model, PmValues::relaxed);
      REQUIRE(pert.optimal());
      const double g = base.cut_capacity(j, k) * base.capacity_duals(j, k) -
                       model.restoration_rates[j] * base.health_duals(j, k);
      const double predicted = g * (moved(j, k) - pm(j, k));
      const double observed = pert.objective - base.objective;
      CAPTURE(j);
      CAPTURE(k);
      if (pm(j, k) > 0.5) {
        // Shutdown rows sit at a degenerate vertex (u = 0 is pinched from both
        // sides), so only the subgradient inequality is guaranteed.
        CHECK(observed >= predicted - 1e-7);
      } else {
        CHECK(std::abs(observed - predicted) <= 0.05 * std::abs(predicted) + 1e-7);
      }
      ++compared;
    }
  }
  CHECK(compared == 10);
}

TEST_CASE("malformed inputs are rejected") {
  const auto model = testing::single_machine();
  const auto cfg = plain_config(model, 3);
  const auto target = ProductionTarget::end_of_horizon(VectorXd::Constant(1, 5.0), 3);
  const std::vector<double> short_prices{0.05, 0.05};
  const std::vector<double> prices(3, 0.05);
  CHECK_THROWS_AS(solve_lmpc(state_of(model), no_pm(model, 3), short_prices, target, cfg, model),
                  std::invalid_argument);
  MatrixXd half = no_pm(model, 3);
  half(0, 1) = 0.5;
  CHECK_THROWS_AS(solve_lmpc(state_of(model), half, prices, target, cfg, model),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_lmpc(state_of(model), no_pm(model, 2), prices, target, cfg, model),
                  std::invalid_argument);
  MatrixXd decreasing(1, 2);
  decreasing << 3.0, 1.0;
  CHECK_THROWS_AS(ProductionTarget{decreasing}.validate(), std::invalid_argument);
}
