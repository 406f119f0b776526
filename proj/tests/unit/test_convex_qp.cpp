#include "doctest.h"

#include "hmpc/convex_qp.hpp"
#include "../support/qp_fixtures.hpp"

#include <fstream>
#include <sstream>

using namespace hmpc;
using qp::kInf;

namespace {

qp::QuadraticProgram square_above_one() {
  auto prog = qp::QuadraticProgram::with_variables(1);
  prog.P.insert(0, 0) = 2.0;  // 1/2 * 2 x^2 = x^2
  prog.A_in.resize(1, 1);
  prog.A_in.insert(0, 0) = 1.0;
  prog.lower = Eigen::VectorXd::Constant(1, 1.0);
  prog.upper = Eigen::VectorXd::Constant(1, kInf);
  return prog;
}

}  // namespace

TEST_CASE("x^2 subject to x >= 1") {
  const auto prog = square_above_one();
  const auto sol = qp::solve(prog);
  REQUIRE(sol.status == qp::Status::optimal);
  CHECK(sol.primal[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sol.duals_in_lower[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(sol.duals_in_upper[0] == 0.0);

  const auto res = qp::kkt_residuals(prog, sol);
  CHECK(res.max() <= 1e-8);

  auto perturbed = sol;
  perturbed.primal[0] += 0.1;
  CHECK(qp::kkt_residuals(prog, perturbed).stationarity == doctest::Approx(0.2).epsilon(1e-8));
}

TEST_CASE("feasibility problem with a single equality") {
  auto prog = qp::QuadraticProgram::with_variables(1);
  prog.A_eq.resize(1, 1);
  prog.A_eq.insert(0, 0) = 1.0;
  prog.b_eq = Eigen::VectorXd::Constant(1, 3.0);
  const auto sol = qp::solve(prog);
  REQUIRE(sol.status == qp::Status::optimal);
  CHECK(sol.primal[0] == doctest::Approx(3.0));
  CHECK(std::abs(sol.duals_eq[0]) <= 1e-10);
}

TEST_CASE("contradictory rows are reported infeasible with a Farkas certificate") {
  auto prog = qp::QuadraticProgram::with_variables(1);
  prog.q[0] = 1.0;
  prog.A_in.resize(2, 1);
  prog.A_in.insert(0, 0) = 1.0;
  prog.A_in.insert(1, 0) = 1.0;
  prog.lower = Eigen::Vector2d(-kInf, 0.0);
  prog.upper = Eigen::Vector2d(-1.0, kInf);
  const auto sol = qp::solve(prog);
  REQUIRE(sol.status == qp::Status::infeasible);
  REQUIRE(sol.certificate.has_value());
  CHECK(sol.certificate->stationarity(prog) <= 1e-7);
  CHECK(sol.certificate->margin(prog) > 1e-3);
}

TEST_CASE("infeasible box against an equality keeps the box hard") {
  auto prog = qp::QuadraticProgram::with_variables(2);
  prog.A_eq.resize(1, 2);
  prog.A_eq.insert(0, 0) = 1.0;
  prog.A_eq.insert(0, 1) = 1.0;
  prog.b_eq = Eigen::VectorXd::Constant(1, 5.0);
  prog.var_lower.setZero();
  prog.var_upper.setOnes();
  const auto sol = qp::solve(prog);
  REQUIRE(sol.status == qp::Status::infeasible);
  CHECK(sol.certificate->stationarity(prog) <= 1e-7);
  CHECK(sol.certificate->margin(prog) > 1e-3);
}

TEST_CASE("zero-variable program") {
  auto prog = qp::QuadraticProgram::with_variables(0);
  prog.objective_offset = 4.0;
  const auto sol = qp::solve(prog);
  CHECK(sol.status == qp::Status::optimal);
  CHECK(sol.objective == 4.0);
  const auto res = qp::kkt_residuals(prog, sol);
  CHECK(res.max() == 0.0);
}

TEST_CASE("validation rejects malformed programs") {
  SUBCASE("indefinite P") {
    auto prog = qp::QuadraticProgram::with_variables(2);
    prog.P.insert(0, 0) = 1.0;
    prog.P.insert(1, 1) = -0.5;
    CHECK_THROWS_AS(qp::solve(prog), std::invalid_argument);
  }
  SUBCASE("asymmetric P") {
    auto prog = qp::QuadraticProgram::with_variables(2);
    prog.P.insert(0, 0) = 1.0;
    prog.P.insert(1, 1) = 1.0;
    prog.P.insert(0, 1) = 0.5;
    CHECK_THROWS_AS(qp::solve(prog), std::invalid_argument);
  }
  SUBCASE("lower above upper") {
    auto prog = qp::QuadraticProgram::with_variables(1);
    prog.var_lower[0] = 1.0;
    prog.var_upper[0] = 0.0;
    CHECK_THROWS_AS(qp::solve(prog), std::invalid_argument);
  }
}

TEST_CASE("linear program with a degenerate vertex") {
  // max x + y  s.t. x + y <= 1, x <= 1, y <= 1, x,y >= 0
  auto prog = qp::QuadraticProgram::with_variables(2);
  prog.q = Eigen::Vector2d(-1.0, -1.0);
  prog.A_in.resize(1, 2);
  prog.A_in.insert(0, 0) = 1.0;
  prog.A_in.insert(0, 1) = 1.0;
  prog.lower = Eigen::VectorXd::Constant(1, -kInf);
  prog.upper = Eigen::VectorXd::Constant(1, 1.0);
  prog.var_lower.setZero();
  prog.var_upper.setOnes();
  const auto sol = qp::solve(prog, 1e-6);
  REQUIRE(sol.status == qp::Status::optimal);
  CHECK(sol.objective == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(sol.duals_in_upper[0] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("random programs: strong duality, KKT and determinism") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    CAPTURE(seed);
    const auto known = testing::random_known_qp(seed);
    const auto sol = qp::solve(known.program);
    REQUIRE(sol.status == qp::Status::optimal);
    CHECK(sol.duality_gap() <= 10 * 1e-8 * (1.0 + std::abs(sol.objective)));
    CHECK((sol.primal - known.x).cwiseAbs().maxCoeff() <= 1e-6);
    const auto again = qp::solve(known.program);
    CHECK(again.primal == sol.primal);
    CHECK(again.duals_in_lower == sol.duals_in_lower);
  }
}

TEST_CASE("multipliers predict the response to right-hand-side perturbations") {
  // Finite differences with delta = 1e-4 on binding rows.
  const double delta = 1e-4;
  int checked = 0;
  for (std::uint64_t seed = 100; seed < 140; ++seed) {
    const auto known = testing::random_known_qp(seed);
    const auto base = qp::solve(known.program);
    REQUIRE(base.status == qp::Status::optimal);
    for (int i = 0; i < known.program.num_inequalities(); ++i) {
      if (known.z_lower[i] > 0.0) {
        auto moved = known.program;
        moved.lower[i] += delta;
        if (moved.upper[i] < moved.lower[i]) continue;
        const auto pert = qp::solve(moved);
        REQUIRE(pert.status == qp::Status::optimal);
        const double predicted = base.duals_in_lower[i] * delta;
        const double observed = pert.objective - base.objective;
        CAPTURE(seed);
        CHECK(std::abs(observed - predicted) <= 1e-3 * std::abs(predicted) + 1e-9);
        ++checked;
      }
    }
    for (int i = 0; i < known.program.num_equalities(); ++i) {
      auto moved = known.program;
      moved.b_eq[i] += delta;
      const auto pert = qp::solve(moved);
      const double predicted = base.duals_eq[i] * delta;
      const double observed = pert.objective - base.objective;
      CHECK(std::abs(observed - predicted) <= 1e-3 * std::abs(predicted) + 1e-9);
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("text dump round-trips") {
  const auto known = testing::random_known_qp(7, 6);
  std::stringstream buf;
  qp::write_text(known.program, buf);
  const auto back = qp::read_text(buf);
  CHECK(back.num_variables() == known.program.num_variables());
  CHECK(Eigen::MatrixXd(back.P).isApprox(Eigen::MatrixXd(known.program.P), 0.0));
  CHECK(back.q == known.program.q);
  CHECK(back.lower == known.program.lower);
  CHECK(back.upper == known.program.upper);
  CHECK(back.var_lower == known.program.var_lower);
}

TEST_CASE("large multipliers on bounds that share a variable") {
  // Scheduling program with a binding terminal health floor: the disposal
  // bounds and the floor row carry multipliers near 1e6. An independent
  // interior-point code (cvxopt) stalls here too; its feasible point and its
  // dual bound bracket the optimum.
  std::ifstream in(std::string(HMPC_SOURCE_DIR) + "/tests/data/pinched_floor.qp");
  REQUIRE(in.good());
  const auto prog = qp::read_text(in);
  const auto sol = qp::solve(prog);
  REQUIRE(sol.status == qp::Status::optimal);
  CHECK(sol.objective >= 63.329466376089);
  CHECK(sol.objective <= 63.329546365430);
  CHECK(qp::kkt_residuals(prog, sol).primal <= 1e-7);
}
