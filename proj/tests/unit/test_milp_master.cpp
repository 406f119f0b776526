#include "doctest.h"

#include "hmpc/milp_master.hpp"

#include <limits>
#include <random>

using namespace hmpc;

namespace {

MasterProblem open_master(int machines, int slots, int crew) {
  MasterProblem p;
  p.machines = machines;
  p.slots = slots;
  p.window.assign(static_cast<std::size_t>(slots), 1);
  p.crew_limit.assign(static_cast<std::size_t>(slots), crew);
  p.price_est.assign(static_cast<std::size_t>(slots), 0.05);
  return p;
}

Cut flat_cut(int machines, int slots, double value) {
  return Cut{MatrixXd::Zero(machines, slots), value, MatrixXd::Zero(machines, slots)};
}

// Random small master with a mix of cheap and expensive slots and cuts
// anchored at admissible plans.
MasterProblem random_master(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> small(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int machines = small(rng) == 1 ? 2 : 3;
  const int slots = machines == 2 ? 4 + small(rng) % 3 : 4;  // <= 12 binaries
  auto p = open_master(machines, slots, 1 + small(rng) % 2);
  p.window[static_cast<std::size_t>(small(rng) % slots)] = 0;
  p.price_weight = 1.0;
  p.cost_weight = 1.0;
  p.pm_cost_per_hour = 30.0;
  for (auto& price : p.price_est) price = 60.0 * unit(rng);
  std::uniform_real_distribution<double> slope(-80.0, 40.0);
  const int cuts = small(rng) + 1;
  for (int c = 0; c < cuts; ++c) {
    Cut cut;
    cut.anchor_plan = MatrixXd::Zero(machines, slots);
    for (int j = 0; j < machines; ++j) {
      const int t = static_cast<int>(rng() % static_cast<std::uint64_t>(slots));
      if (p.window[static_cast<std::size_t>(t)] && unit(rng) < 0.4) cut.anchor_plan(j, t) = 1.0;
    }
    if (!p.admissible(cut.anchor_plan)) cut.anchor_plan.setZero();
    cut.anchor_value = 200.0 + 100.0 * unit(rng);
    cut.slope = MatrixXd::NullaryExpr(machines, slots, [&]() { return slope(rng); });
    p.cuts.push_back(cut);
  }
  return p;
}

double enumerated_optimum(const MasterProblem& p, MatrixXd* argmin = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : enumerate_plans(p)) {
    const double v = p.objective_at(m);
    if (v < best) {
      best = v;
      if (argmin) *argmin = m;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("without cuts an expensive PM hour is never chosen") {
  auto p = open_master(2, 24, 2);
  p.price_est.assign(24, 0.30);  // lambda_m phi = 1000 > 1.5 * 0.30
  const auto sol = solve_master(p);
  REQUIRE(sol.status == MasterStatus::optimal);
  CHECK(sol.m.isZero());
  CHECK(sol.theta == 0.0);
  CHECK(sol.objective == 0.0);
}

TEST_CASE("a closed window admits only the empty plan") {
  auto p = open_master(2, 6, 2);
  p.window.assign(6, 0);
  p.price_weight = 1e6;  // would make PM profitable if it were allowed
  const auto plans = enumerate_plans(p);
  REQUIRE(plans.size() == 1);
  CHECK(plans[0].isZero());
  const auto sol = solve_master(p);
  REQUIRE(sol.status == MasterStatus::optimal);
  CHECK(sol.m.isZero());
}

TEST_CASE("a single cut rewarding one entry selects it") {
  auto p = open_master(2, 24, 2);
  p.price_weight = 0.0;
  p.cost_weight = 0.0;
  Cut cut = flat_cut(2, 24, 100.0);
  cut.slope(0, 9) = -50.0;  // theta >= 100 - 50 m(0,9)
  p.cuts.push_back(cut);
  const auto sol = solve_master(p);
  REQUIRE(sol.status == MasterStatus::optimal);
  CHECK(sol.m(0, 9) == 1.0);
  CHECK(sol.theta == doctest::Approx(50.0));
  CHECK(sol.objective == doctest::Approx(50.0));
}

TEST_CASE("branching picks the most fractional entry") {
  MatrixXd values = MatrixXd::Zero(2, 4);
  SUBCASE("closest to one half wins") {
    values(0, 1) = 0.9;
    values(1, 3) = 0.5;
    const auto choice = select_branch(values);
    REQUIRE(choice);
    CHECK(choice->machine == 1);
    CHECK(choice->slot == 3);
  }
  SUBCASE("ties go to the lowest machine, then slot") {
    values(0, 2) = 0.5;
    values(1, 0) = 0.5;
    const auto choice = select_branch(values);
    REQUIRE(choice);
    CHECK(choice->machine == 0);
    CHECK(choice->slot == 2);
  }
  SUBCASE("integral values do not branch") {
    values(0, 0) = 1.0;
    values(1, 1) = 1.0 - 1e-9;
    CHECK_FALSE(select_branch(values));
  }
}

TEST_CASE("LP relaxation") {
  SUBCASE("fully fixed node equals the MILP objective at that plan") {
    auto p = random_master(3);
    MatrixXd m = MatrixXd::Zero(p.machines, p.slots);
    for (int t = 0; t < p.slots; ++t) {
      if (p.window[static_cast<std::size_t>(t)]) {
        m(0, t) = 1.0;
        break;
      }
    }
    Assignment fixed;
    for (int j = 0; j < p.machines; ++j) {
      for (int t = 0; t < p.slots; ++t) fixed.push_back(static_cast<signed char>(m(j, t)));
    }
    const auto relax = solve_lp_relaxation(p, fixed);
    REQUIRE(relax.feasible);
    CHECK(relax.value == doctest::Approx(p.objective_at(m)).epsilon(1e-6));
  }
  SUBCASE("symmetric reward under a crew limit of one can split") {
    auto p = open_master(2, 1, 1);
    p.price_weight = 0.0;
    p.cost_weight = 0.0;
    Cut cut = flat_cut(2, 1, 10.0);
    cut.slope.setConstant(-4.0);
    p.cuts.push_back(cut);
    const auto relax = solve_lp_relaxation(p, Assignment(2, -1));
    REQUIRE(relax.feasible);
    CHECK(relax.m.sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(relax.value == doctest::Approx(6.0).epsilon(1e-6));
    const auto sol = solve_master(p);
    CHECK(sol.m.sum() == 1.0);
    CHECK(sol.objective == doctest::Approx(6.0));
  }
  SUBCASE("relaxation bounds every completion") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto p = random_master(seed);
      const auto relax = solve_lp_relaxation(p, Assignment(static_cast<std::size_t>(p.machines * p.slots), -1));
      REQUIRE(relax.feasible);
      CHECK(relax.value <= enumerated_optimum(p) + 1e-6);
    }
  }
  SUBCASE("crew overflow among fixed entries is infeasible") {
    auto p = open_master(2, 1, 1);
    CHECK_FALSE(solve_lp_relaxation(p, Assignment{1, 1}).feasible);
  }
}

TEST_CASE("branch and bound matches enumeration on small instances") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    CAPTURE(seed);
    const auto p = random_master(seed);
    const auto sol = solve_master(p, 1e-9);
    REQUIRE(sol.status == MasterStatus::optimal);
    CHECK(p.admissible(sol.m));
    const double best = enumerated_optimum(p);
    CHECK(sol.objective == doctest::Approx(best).epsilon(1e-9));
    CHECK(sol.lower_bound <= sol.objective + 1e-9);
    CHECK(sol.theta >= p.theta_lower_bound);
    for (const auto& cut : p.cuts) CHECK(sol.theta >= cut.rhs_at(sol.m) - 1e-9);
  }
}

TEST_CASE("adding a cut never lowers the master optimum") {
  for (std::uint64_t seed = 50; seed < 70; ++seed) {
    auto p = random_master(seed);
    const Cut extra = p.cuts.back();
    p.cuts.pop_back();
    const double before = solve_master(p).objective;
    p.cuts.push_back(extra);
    const double after = solve_master(p).objective;
    CHECK(after >= before - 1e-9);
  }
}

TEST_CASE("solving is deterministic") {
  const auto p = random_master(11);
  const auto a = solve_master(p);
  const auto b = solve_master(p);
  CHECK(a.m == b.m);
  CHECK(a.objective == b.objective);
  CHECK(a.node_count == b.node_count);
}

TEST_CASE("health pruning forces maintenance and reports conflicts") {
  auto p = open_master(2, 4, 1);
  p.pruning = HealthPruning{Eigen::Vector2d(1.0, 0.0)};
  auto sol = solve_master(p);
  REQUIRE(sol.status == MasterStatus::optimal);
  CHECK(sol.m.row(0).sum() == 1.0);
  CHECK(sol.m.row(1).sum() == 0.0);

  p.window = {1, 0, 0, 0};
  p.pruning = HealthPruning{Eigen::Vector2d(2.0, 0.0)};
  sol = solve_master(p);
  CHECK(sol.status == MasterStatus::infeasible);
  CHECK(sol.infeasible_family == "window");

  p.window = {1, 1, 0, 0};
  p.pruning = HealthPruning{Eigen::Vector2d(2.0, 1.0)};
  sol = solve_master(p);
  CHECK(sol.status == MasterStatus::infeasible);
  CHECK(sol.infeasible_family == "crew");
}

TEST_CASE("node limit is reported rather than hidden") {
  const auto p = random_master(5);
  const auto sol = solve_master(p, 1e-9, 1);
  if (sol.status == MasterStatus::node_limit) {
    CHECK(sol.lower_bound <= enumerated_optimum(p) + 1e-6);
  } else {
    CHECK(sol.status == MasterStatus::optimal);
  }
}

TEST_CASE("malformed masters are rejected") {
  auto p = open_master(2, 3, 1);
  p.window.pop_back();
  CHECK_THROWS_AS(solve_master(p), std::invalid_argument);
  p = open_master(2, 3, 1);
  p.cuts.push_back(flat_cut(3, 3, 1.0));
  CHECK_THROWS_AS(solve_master(p), std::invalid_argument);
  p = open_master(2, 3, 1);
  CHECK_THROWS_AS(solve_lp_relaxation(p, Assignment(5, -1)), std::invalid_argument);
}
