#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>

namespace hmpc::qp {

using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// minimize    1/2 x'Px + q'x + objective_offset
/// subject to  A_eq x = b_eq
///             lower <= A_in x <= upper
///             var_lower <= x <= var_upper
///
/// One-sided rows use +/-infinity on the open side. P is stored in full
/// (both triangles) and must be symmetric positive semidefinite.
struct QuadraticProgram {
  SparseMatrix P;
  VectorXd q;
  SparseMatrix A_eq;
  VectorXd b_eq;
  SparseMatrix A_in;
  VectorXd lower;
  VectorXd upper;
  VectorXd var_lower;
  VectorXd var_upper;
  double objective_offset = 0.0;

  /// Unconstrained program with zero objective over n variables.
  static QuadraticProgram with_variables(int n);

  int num_variables() const { return static_cast<int>(q.size()); }
  int num_equalities() const { return static_cast<int>(b_eq.size()); }
  int num_inequalities() const { return static_cast<int>(lower.size()); }

  double objective(const VectorXd& x) const;

  /// Throws std::invalid_argument on inconsistent shapes, lower > upper,
  /// an asymmetric P or a P with an eigenvalue below -1e-8 * scale.
  void validate() const;
};

enum class Status { optimal, infeasible, max_iter };
const char* to_string(Status status);

/// Farkas certificate of primal infeasibility. Multipliers are nonnegative
/// (equality multipliers are free) and satisfy
///   A_eq' y + A_in' (z_l - z_u) + (v_l - v_u) = 0,
///   b_eq' y + lower' z_l - upper' z_u + var_lower' v_l - var_upper' v_u > 0.
struct InfeasibilityCertificate {
  VectorXd eq;
  VectorXd in_lower;
  VectorXd in_upper;
  VectorXd var_lower;
  VectorXd var_upper;

  /// Left-hand side residual (infinity norm) and the certificate margin.
  double stationarity(const QuadraticProgram& qp) const;
  double margin(const QuadraticProgram& qp) const;
};

/// Multipliers follow the sensitivity convention: duals_eq[i] is
/// dJ*/db_eq[i]; inequality multipliers are nonnegative on the side they act
/// on, so dJ*/dlower[i] = duals_in_lower[i] and dJ*/dupper[i] = -duals_in_upper[i].
struct QPSolution {
  Status status = Status::max_iter;
  VectorXd primal;
  VectorXd duals_eq;
  VectorXd duals_in_lower;
  VectorXd duals_in_upper;
  VectorXd duals_var_lower;
  VectorXd duals_var_upper;
  double objective = 0.0;
  double dual_objective = 0.0;
  int iterations = 0;
  bool polished = false;
  std::optional<InfeasibilityCertificate> certificate;

  /// Signed multiplier of inequality row i: positive when the lower side
  /// binds, negative when the upper side binds.
  double dual_in(int i) const { return duals_in_lower[i] - duals_in_upper[i]; }
  double duality_gap() const { return objective - dual_objective; }
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const;
};

/// Absolute (infinity-norm) KKT residuals of a candidate primal-dual pair.
KktResiduals kkt_residuals(const QuadraticProgram& qp, const QPSolution& sol);

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 200;
  bool polish = true;
};

/// Primal-dual interior-point method (Mehrotra predictor-corrector) on the
/// regularized quasi-definite KKT system, followed by an active-set polish.
/// Termination uses residuals scaled by the magnitude of the problem data;
/// an unconverged run triggers an elastic phase-one solve that either proves
/// infeasibility (with certificate) or reports max_iter.
QPSolution solve(const QuadraticProgram& qp, const SolverOptions& options);
QPSolution solve(const QuadraticProgram& qp, double tol = 1e-8, int max_iter = 200);

/// Plain-text dense dump, see `write_text` implementation for the layout.
void write_text(const QuadraticProgram& qp, std::ostream& out);
void write_text(const QuadraticProgram& qp, const std::filesystem::path& path);
QuadraticProgram read_text(std::istream& in);

}  // namespace hmpc::qp
