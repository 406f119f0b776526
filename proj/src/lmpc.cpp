#include "hmpc/lmpc.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmpc {

namespace {

using qp::kInf;
using qp::Triplet;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

// Accumulates the stacked program row by row.
class QpAssembler {
 public:
  explicit QpAssembler(int n) : n_(n), q_(VectorXd::Zero(n)) {
    var_lower_ = VectorXd::Constant(n, -kInf);
    var_upper_ = VectorXd::Constant(n, kInf);
  }

  void quad(int i, int j, double value) { p_.emplace_back(i, j, value); }
  void linear(int i, double value) { q_[i] += value; }
  void offset(double value) { offset_ += value; }
  void bounds(int i, double lo, double hi) {
    var_lower_[i] = lo;
    var_upper_[i] = hi;
  }

  int equality(std::initializer_list<std::pair<int, double>> terms, double rhs) {
    const int row = static_cast<int>(b_.size());
    for (const auto& [col, val] : terms) eq_.emplace_back(row, col, val);
    b_.push_back(rhs);
    return row;
  }

  int inequality(std::initializer_list<std::pair<int, double>> terms, double lo, double hi) {
    const int row = static_cast<int>(lo_.size());
    for (const auto& [col, val] : terms) {
      if (val != 0.0) in_.emplace_back(row, col, val);
    }
    lo_.push_back(lo);
    hi_.push_back(hi);
    return row;
  }

  int inequality(const std::vector<std::pair<int, double>>& terms, double lo, double hi) {
    const int row = static_cast<int>(lo_.size());
    for (const auto& [col, val] : terms) {
      if (val != 0.0) in_.emplace_back(row, col, val);
    }
    lo_.push_back(lo);
    hi_.push_back(hi);
    return row;
  }

  int equality(const std::vector<std::pair<int, double>>& terms, double rhs) {
    const int row = static_cast<int>(b_.size());
    for (const auto& [col, val] : terms) {
      if (val != 0.0) eq_.emplace_back(row, col, val);
    }
    b_.push_back(rhs);
    return row;
  }

  qp::QuadraticProgram finish() {
    qp::QuadraticProgram out;
    out.P.resize(n_, n_);
    out.P.setFromTriplets(p_.begin(), p_.end());
    out.q = q_;
    out.A_eq.resize(static_cast<int>(b_.size()), n_);
    out.A_eq.setFromTriplets(eq_.begin(), eq_.end());
    out.b_eq = Eigen::Map<VectorXd>(b_.data(), static_cast<Eigen::Index>(b_.size()));
    out.A_in.resize(static_cast<int>(lo_.size()), n_);
    out.A_in.setFromTriplets(in_.begin(), in_.end());
    out.lower = Eigen::Map<VectorXd>(lo_.data(), static_cast<Eigen::Index>(lo_.size()));
    out.upper = Eigen::Map<VectorXd>(hi_.data(), static_cast<Eigen::Index>(hi_.size()));
    out.var_lower = var_lower_;
    out.var_upper = var_upper_;
    out.objective_offset = offset_;
    return out;
  }

 private:
  int n_;
  std::vector<Triplet> p_, eq_, in_;
  VectorXd q_;
  std::vector<double> b_, lo_, hi_;
  VectorXd var_lower_, var_upper_;
  double offset_ = 0.0;
};

}  // namespace

LmpcConfig LmpcConfig::defaults_for(const PlantModel& model, int horizon) {
  LmpcConfig cfg;
  cfg.horizon = horizon;
  cfg.inventory_weight = VectorXd::Zero(model.n_buffers());
  cfg.safe_inventory = VectorXd::Zero(model.n_buffers());
  cfg.terminal_health_floor = VectorXd::Zero(model.n_machines());
  cfg.previous_input = VectorXd::Zero(model.n_machines());
  return cfg;
}

void LmpcConfig::validate(const PlantModel& model) const {
  require(horizon >= 1, "L-MPC horizon must be at least 1");
  require(inventory_weight.size() == model.n_buffers(), "inventory_weight must have n_x entries");
  require(safe_inventory.size() == model.n_buffers(), "safe_inventory must have n_x entries");
  require(terminal_health_floor.size() == model.n_machines(),
          "terminal_health_floor must have n_u entries");
  require(previous_input.size() == model.n_machines(), "previous_input must have n_u entries");
  require((inventory_weight.array() >= 0.0).all(), "inventory weights must be nonnegative");
  require(energy_weight >= 0.0 && smoothing_weight >= 0.0 && slack_weight >= 0.0,
          "L-MPC weights must be nonnegative");
  require(terminal_slack_penalty >= 0.0 && health_disposal_penalty >= 0.0,
          "penalties must be nonnegative");
  require((terminal_health_floor.array() >= 0.0).all() &&
              (terminal_health_floor.array() <= 1.0).all(),
          "terminal health floor must lie in [0,1]");
}

ProductionTarget ProductionTarget::end_of_horizon(const VectorXd& amount, int horizon) {
  require(horizon >= 1, "target horizon must be at least 1");
  ProductionTarget t;
  t.cumulative = MatrixXd::Zero(amount.size(), horizon);
  t.cumulative.col(horizon - 1) = amount;
  t.validate();
  return t;
}

ProductionTarget ProductionTarget::linear_ramp(const VectorXd& amount, int horizon) {
  require(horizon >= 1, "target horizon must be at least 1");
  ProductionTarget t;
  t.cumulative.resize(amount.size(), horizon);
  for (int k = 0; k < horizon; ++k) {
    t.cumulative.col(k) = amount * (static_cast<double>(k + 1) / horizon);
  }
  t.validate();
  return t;
}

void ProductionTarget::validate() const {
  for (int p = 0; p < cumulative.rows(); ++p) {
    require(cumulative.cols() == 0 || cumulative(p, 0) >= 0.0, "targets must be nonnegative");
    for (int k = 1; k < cumulative.cols(); ++k) {
      require(cumulative(p, k) >= cumulative(p, k - 1), "cumulative targets must be nondecreasing");
    }
  }
}

int LmpcIndex::count_variables(int n_x, int n_u, int n_p, int horizon, bool terminal_slack) {
  return horizon * (4 * n_u + 2 * n_p + n_x) + (terminal_slack ? n_u : 0);
}

int LmpcIndex::num_variables() const {
  return count_variables(n_x, n_u, n_p, horizon, terminal_slack);
}

LmpcProblem build_lmpc_qp(const PlantState& state0, const MatrixXd& pm,
                          std::span<const double> prices, const ProductionTarget& target,
                          const LmpcConfig& cfg, const PlantModel& model, PmValues values) {
  cfg.validate(model);
  target.validate();
  const int N = cfg.horizon;
  const int nx = model.n_buffers();
  const int nu = model.n_machines();
  const int np = model.n_products();
  require(static_cast<int>(prices.size()) >= N,
          "price window has " + std::to_string(prices.size()) + " hours, horizon needs " +
              std::to_string(N));
  require(pm.rows() == nu && pm.cols() >= N, "maintenance plan must be n_u x N or longer");
  require(target.cumulative.rows() == np && target.horizon() == N,
          "production target must be n_p x N");
  require(state0.inventory.size() == nx && state0.health.size() == nu,
          "initial state dimensions do not match the plant");
  for (int k = 0; k < N; ++k) {
    require(prices[static_cast<std::size_t>(k)] >= 0.0, "prices must be nonnegative");
    for (int j = 0; j < nu; ++j) {
      const double m = pm(j, k);
      if (values == PmValues::binary) {
        require(m == 0.0 || m == 1.0, "maintenance plan entries must be binary");
      } else {
        require(m >= 0.0 && m <= 1.0, "relaxed maintenance entries must lie in [0,1]");
      }
    }
  }
  require((state0.health.array() >= 0.0).all() && (state0.health.array() <= 1.0).all(),
          "initial health must lie in [0,1]");

  LmpcIndex idx;
  idx.n_x = nx;
  idx.n_u = nu;
  idx.n_p = np;
  idx.horizon = N;
  idx.terminal_slack = (cfg.terminal_health_floor.array() > 0.0).any();
  idx.health_row.resize(nu, N);
  idx.pm_row.resize(nu, N);

  const VectorXd& x0 = state0.inventory;
  const VectorXd& h0 = state0.health;
  const VectorXd& cbar = model.as_new_capacity;
  const VectorXd& kappa = model.capacity_loss_fraction;
  const double dt = model.step_hours;
  const bool split = cfg.coupling == CapacityCoupling::split;

  QpAssembler a(idx.num_variables());

  // An initial inventory marginally outside its box stays representable.
  const VectorXd x_lo = model.buffer_min.cwiseMin(x0);
  const VectorXd x_hi = model.buffer_max.cwiseMax(x0);

  // Objective: inventory regulation over k = 0..N-1 (x(0) is data).
  const VectorXd& Q = cfg.inventory_weight;
  const VectorXd& xg = cfg.safe_inventory;
  a.offset((x0 - xg).cwiseProduct(Q).dot(x0 - xg));
  for (int k = 1; k < N; ++k) {
    for (int i = 0; i < nx; ++i) {
      if (Q[i] == 0.0) continue;
      a.quad(idx.x(k, i), idx.x(k, i), 2.0 * Q[i]);
      a.linear(idx.x(k, i), -2.0 * Q[i] * xg[i]);
      a.offset(Q[i] * xg[i] * xg[i]);
    }
  }

  // Smoothing relative to the previous input.
  const double lu = cfg.smoothing_weight;
  if (lu > 0.0) {
    for (int j = 0; j < nu; ++j) {
      const double up = cfg.previous_input[j];
      a.quad(idx.u(0, j), idx.u(0, j), 2.0 * lu);
      a.linear(idx.u(0, j), -2.0 * lu * up);
      a.offset(lu * up * up);
      for (int k = 1; k < N; ++k) {
        a.quad(idx.u(k, j), idx.u(k, j), 2.0 * lu);
        a.quad(idx.u(k - 1, j), idx.u(k - 1, j), 2.0 * lu);
        a.quad(idx.u(k, j), idx.u(k - 1, j), -2.0 * lu);
        a.quad(idx.u(k - 1, j), idx.u(k, j), -2.0 * lu);
      }
    }
  }

  // Relaxed energy cost and the remaining linear terms.
  for (int k = 0; k < N; ++k) {
    const double rho = prices[static_cast<std::size_t>(k)];
    for (int j = 0; j < nu; ++j) {
      const double e = model.as_new_energy_intensity[j];
      const double g = model.energy_degradation_penalty[j] * e;
      // E = dt [ (Ebar + Ebar*gamma)'u - (Ebar*gamma)'w ]  with gamma scaled by Ebar
      a.linear(idx.u(k, j), cfg.energy_weight * rho * dt * (e + g));
      a.linear(idx.w(k, j), -cfg.energy_weight * rho * dt * g);
      a.linear(idx.v(k, j), cfg.health_disposal_penalty);
    }
    for (int p = 0; p < np; ++p) a.linear(idx.xi(k, p), cfg.slack_weight);
  }
  if (idx.terminal_slack) {
    for (int j = 0; j < nu; ++j) a.linear(idx.slack(j), cfg.terminal_slack_penalty);
  }

  // Variable bounds.
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < nu; ++j) {
      a.bounds(idx.u(k, j), 0.0, split ? kInf : cbar[j]);
      a.bounds(idx.w(k, j), 0.0, kInf);
      a.bounds(idx.v(k, j), 0.0, kInf);
      a.bounds(idx.h(k + 1, j), 0.0, 1.0);
    }
    for (int p = 0; p < np; ++p) {
      a.bounds(idx.d(k, p), 0.0, kInf);
      a.bounds(idx.xi(k, p), 0.0, kInf);
    }
    for (int i = 0; i < nx; ++i) a.bounds(idx.x(k + 1, i), x_lo[i], x_hi[i]);
  }
  if (idx.terminal_slack) {
    for (int j = 0; j < nu; ++j) a.bounds(idx.slack(j), 0.0, kInf);
  }

  std::vector<std::pair<int, double>> terms;
  for (int k = 0; k < N; ++k) {
    // Inventory dynamics: x(k+1) - x(k) - B_s u(k) - W_s d(k) = 0.
    for (int i = 0; i < nx; ++i) {
      terms.clear();
      terms.emplace_back(idx.x(k + 1, i), 1.0);
      double rhs = 0.0;
      if (k == 0) {
        rhs = x0[i];
      } else {
        terms.emplace_back(idx.x(k, i), -1.0);
      }
      for (int j = 0; j < nu; ++j) terms.emplace_back(idx.u(k, j), -model.inflow_matrix(i, j));
      for (int p = 0; p < np; ++p) terms.emplace_back(idx.d(k, p), -model.demand_matrix(i, p));
      a.equality(terms, rhs);
    }

    // Health dynamics: h(k+1) - h(k) + B_h u(k) + v(k) = W_h m(k).
    for (int j = 0; j < nu; ++j) {
      terms.clear();
      terms.emplace_back(idx.h(k + 1, j), 1.0);
      double rhs = model.restoration_rates[j] * pm(j, k);
      if (k == 0) {
        rhs += h0[j];
      } else {
        terms.emplace_back(idx.h(k, j), -1.0);
      }
      terms.emplace_back(idx.u(k, j), model.degradation_rates[j]);
      terms.emplace_back(idx.v(k, j), 1.0);
      idx.health_row(j, k) = a.equality(terms, rhs);
    }

    for (int j = 0; j < nu; ++j) {
      const int uj = idx.u(k, j);
      const int wj = idx.w(k, j);
      const double m = pm(j, k);
      // Capacity coupling, with C(h) = Cbar (1 - kappa) + Cbar kappa h.
      if (split) {
        if (k == 0) {
          a.inequality({{uj, 1.0}}, -kInf, cbar[j] * (1.0 - kappa[j] * (1.0 - h0[j])));
        } else {
          a.inequality({{uj, 1.0}, {idx.h(k, j), -cbar[j] * kappa[j]}}, -kInf,
                       cbar[j] * (1.0 - kappa[j]));
        }
        idx.pm_row(j, k) = a.inequality({{uj, 1.0}}, -kInf, cbar[j] * (1.0 - m));
      } else if (k == 0) {
        idx.pm_row(j, k) = a.inequality(
            {{uj, 1.0}}, -kInf, cbar[j] * (1.0 - kappa[j] * (1.0 - h0[j])) * (1.0 - m));
      } else {
        idx.pm_row(j, k) =
            a.inequality({{uj, 1.0}, {idx.h(k, j), -cbar[j] * kappa[j] * (1.0 - m)}}, -kInf,
                         cbar[j] * (1.0 - kappa[j]) * (1.0 - m));
      }

      // McCormick envelope of w = h u over 0 <= h <= 1, 0 <= u <= Cbar.
      a.inequality({{wj, 1.0}, {uj, -1.0}}, -kInf, 0.0);
      if (k == 0) {
        a.inequality({{wj, 1.0}}, -kInf, cbar[j] * h0[j]);
        a.inequality({{wj, 1.0}, {uj, -1.0}}, -cbar[j] * (1.0 - h0[j]), kInf);
      } else {
        a.inequality({{wj, 1.0}, {idx.h(k, j), -cbar[j]}}, -kInf, 0.0);
        a.inequality({{wj, 1.0}, {uj, -1.0}, {idx.h(k, j), -cbar[j]}}, -cbar[j], kInf);
      }
    }

    // No shortage: x(k) + B_o u(k) + W_s d(k) >= 0 on buffers that are drawn from.
    for (int i = 0; i < nx; ++i) {
      const bool drawn = (model.outflow_matrix.row(i).array() != 0.0).any() ||
                         (model.demand_matrix.row(i).array() != 0.0).any();
      if (!drawn) continue;
      terms.clear();
      double lo = 0.0;
      if (k == 0) {
        lo = -x0[i];
      } else {
        terms.emplace_back(idx.x(k, i), 1.0);
      }
      for (int j = 0; j < nu; ++j) terms.emplace_back(idx.u(k, j), model.outflow_matrix(i, j));
      for (int p = 0; p < np; ++p) terms.emplace_back(idx.d(k, p), model.demand_matrix(i, p));
      a.inequality(terms, lo, kInf);
    }

    // Cumulative shipments: sum_{t<=k} d(t) + xi(k) >= sigma(k).
    for (int p = 0; p < np; ++p) {
      const double sigma = target.cumulative(p, k);
      if (sigma <= 0.0) continue;
      terms.clear();
      for (int t = 0; t <= k; ++t) terms.emplace_back(idx.d(t, p), 1.0);
      terms.emplace_back(idx.xi(k, p), 1.0);
      a.inequality(terms, sigma, kInf);
    }
  }

  if (idx.terminal_slack) {
    for (int j = 0; j < nu; ++j) {
      const double floor = cfg.terminal_health_floor[j];
      if (floor <= 0.0) continue;
      a.inequality({{idx.h(N, j), 1.0}, {idx.slack(j), 1.0}}, floor, kInf);
    }
  }

  LmpcProblem out;
  out.qp = a.finish();
  out.index = std::move(idx);
  out.pm = pm.leftCols(N);
  out.coupling = cfg.coupling;
  return out;
}

ScheduleSolution solve_lmpc(const PlantState& state0, const MatrixXd& pm,
                            std::span<const double> prices, const ProductionTarget& target,
                            const LmpcConfig& cfg, const PlantModel& model, PmValues values) {
  const auto started = std::chrono::steady_clock::now();
  const LmpcProblem prob = build_lmpc_qp(state0, pm, prices, target, cfg, model, values);
  qp::SolverOptions options;
  options.tol = cfg.tol;
  options.max_iter = cfg.max_iter;
  const qp::QPSolution qs = qp::solve(prob.qp, options);

  const LmpcIndex& idx = prob.index;
  const int N = idx.horizon;
  const int nx = idx.n_x, nu = idx.n_u, np = idx.n_p;

  ScheduleSolution sol;
  sol.status = qs.status;
  sol.iterations = qs.iterations;
  sol.pm = prob.pm;
  sol.u.resize(nu, N);
  sol.d.resize(np, N);
  sol.w.resize(nu, N);
  sol.xi.resize(np, N);
  sol.disposal.resize(nu, N);
  sol.x.resize(nx, N + 1);
  sol.h.resize(nu, N + 1);
  sol.capacity_duals.resize(nu, N);
  sol.health_duals.resize(nu, N);
  sol.cut_capacity.resize(nu, N);
  sol.terminal_slack = VectorXd::Zero(nu);
  sol.x.col(0) = state0.inventory;
  sol.h.col(0) = state0.health;

  const VectorXd& z = qs.primal;
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < nu; ++j) {
      sol.u(j, k) = z[idx.u(k, j)];
      sol.w(j, k) = z[idx.w(k, j)];
      sol.disposal(j, k) = z[idx.v(k, j)];
      sol.h(j, k + 1) = z[idx.h(k + 1, j)];
    }
    for (int p = 0; p < np; ++p) {
      sol.d(p, k) = z[idx.d(k, p)];
      sol.xi(p, k) = z[idx.xi(k, p)];
    }
    for (int i = 0; i < nx; ++i) sol.x(i, k + 1) = z[idx.x(k + 1, i)];
  }
  if (idx.terminal_slack) {
    for (int j = 0; j < nu; ++j) sol.terminal_slack[j] = z[idx.slack(j)];
  }

  // Multipliers in the sign convention of the subgradient: mu >= 0 on the
  // shutdown row, lambda^h on h(k+1) - h(k) + B_h u(k) - W_h m(k) = 0.
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < nu; ++j) {
      double mu = qs.duals_in_upper[idx.pm_row(j, k)];
      if (prob.coupling == CapacityCoupling::split && prob.pm(j, k) == 1.0) {
        // With the machine shut down, u = 0 is held both by this row and by
        // its own lower bound and the split between the two multipliers is
        // arbitrary. Moving it onto the bound keeps the dual optimal and
        // gives the smallest valid slope.
        mu -= std::min(mu, qs.duals_var_lower[idx.u(k, j)]);
      }
      sol.capacity_duals(j, k) = mu;
      sol.health_duals(j, k) = -qs.duals_eq[idx.health_row(j, k)];
      const double cbar = model.as_new_capacity[j];
      sol.cut_capacity(j, k) =
          prob.coupling == CapacityCoupling::split
              ? cbar
              : cbar * (1.0 - model.capacity_loss_fraction[j] * (1.0 - sol.h(j, k)));
    }
  }

  sol.objective = qs.objective;
  double relaxed = 0.0;
  for (int k = 0; k < N; ++k) {
    const double rho = prices[static_cast<std::size_t>(k)];
    for (int j = 0; j < nu; ++j) {
      const double e = model.as_new_energy_intensity[j];
      const double g = e * model.energy_degradation_penalty[j];
      relaxed += rho * model.step_hours * ((e + g) * sol.u(j, k) - g * sol.w(j, k));
    }
  }
  sol.relaxed_energy_cost = relaxed;
  sol.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return sol;
}

double mccormick_gap(const ScheduleSolution& sol) {
  double gap = 0.0;
  for (int k = 0; k < sol.horizon(); ++k) {
    for (int j = 0; j < sol.u.rows(); ++j) {
      gap = std::max(gap, std::abs(sol.w(j, k) - sol.h(j, k) * sol.u(j, k)));
    }
  }
  return gap;
}

double evaluate_true_cost(const ScheduleSolution& sol, std::span<const double> prices,
                          const PlantModel& model) {
  require(static_cast<int>(prices.size()) >= sol.horizon(), "price window shorter than schedule");
  double cost = 0.0;
  for (int k = 0; k < sol.horizon(); ++k) {
    cost += prices[static_cast<std::size_t>(k)] *
            step_energy(sol.u.col(k), sol.h.col(k), model);
  }
  return cost;
}

}  // namespace hmpc
