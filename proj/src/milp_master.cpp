#include "hmpc/milp_master.hpp"

#include "hmpc/convex_qp.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace hmpc {

namespace {

using qp::kInf;

struct Node {
  Assignment fixed;
  Relaxation relax;
  long order = 0;
};

struct WorseBound {
  bool operator()(const Node& a, const Node& b) const {
    if (a.relax.value != b.relax.value) return a.relax.value > b.relax.value;
    return a.order > b.order;
  }
};

MatrixXd rounded(const MatrixXd& m) {
  return m.unaryExpr([](double v) { return v >= 0.5 ? 1.0 : 0.0; });
}

int open_slots(const MasterProblem& p) {
  return static_cast<int>(std::count(p.window.begin(), p.window.end(), 1));
}

std::string infeasible_family(const MasterProblem& p) {
  if (!p.pruning) return "crew";
  const auto& need = p.pruning->min_pm_hours;
  for (int j = 0; j < p.machines; ++j) {
    if (std::ceil(need[j] - 1e-9) > open_slots(p)) return "window";
  }
  double total = 0.0;
  for (int j = 0; j < p.machines; ++j) total += std::max(0.0, std::ceil(need[j] - 1e-9));
  double crew = 0.0;
  for (int t = 0; t < p.slots; ++t) {
    if (p.window[t]) crew += std::min(p.crew_limit[t], p.machines);
  }
  if (total > crew) return "crew";
  return "health pruning";
}

}  // namespace

double Cut::rhs_at(const MatrixXd& m) const {
  return anchor_value + (slope.array() * (m - anchor_plan).array()).sum();
}

void Cut::validate(int machines, int slots) const {
  if (anchor_plan.rows() != machines || anchor_plan.cols() != slots ||
      slope.rows() != machines || slope.cols() != slots) {
    throw std::invalid_argument("cut dimensions do not match the master problem");
  }
  if (!std::isfinite(anchor_value) || !slope.allFinite() || !anchor_plan.allFinite()) {
    throw std::invalid_argument("cut has non-finite entries");
  }
}

double MasterProblem::slot_cost(int t) const {
  return -price_weight * price_est[t] + cost_weight * pm_cost_per_hour;
}

double MasterProblem::plan_cost(const MatrixXd& m) const {
  double total = 0.0;
  for (int t = 0; t < slots; ++t) total += slot_cost(t) * m.col(t).sum();
  return total;
}

double MasterProblem::theta_at(const MatrixXd& m) const {
  double theta = theta_lower_bound;
  for (const auto& cut : cuts) theta = std::max(theta, cut.rhs_at(m));
  return theta;
}

bool MasterProblem::admissible(const MatrixXd& m) const {
  if (m.rows() != machines || m.cols() != slots) return false;
  for (int t = 0; t < slots; ++t) {
    int active = 0;
    for (int j = 0; j < machines; ++j) {
      const double v = m(j, t);
      if (v != 0.0 && v != 1.0) return false;
      if (v == 1.0 && !window[t]) return false;
      active += v == 1.0;
    }
    if (active > crew_limit[t]) return false;
  }
  if (pruning) {
    for (int j = 0; j < machines; ++j) {
      if (m.row(j).sum() < pruning->min_pm_hours[j] - 1e-9) return false;
    }
  }
  return true;
}

void MasterProblem::validate() const {
  if (machines < 0 || slots < 1) throw std::invalid_argument("master needs at least one slot");
  const auto n = static_cast<std::size_t>(slots);
  if (window.size() != n || crew_limit.size() != n || price_est.size() != n) {
    throw std::invalid_argument("window, crew_limit and price_est must have one entry per slot");
  }
  for (int t = 0; t < slots; ++t) {
    if (window[t] != 0 && window[t] != 1) throw std::invalid_argument("window entries must be 0 or 1");
    if (crew_limit[t] < 0) throw std::invalid_argument("crew limit must be nonnegative");
    if (!std::isfinite(price_est[t])) throw std::invalid_argument("price_est must be finite");
  }
  if (!std::isfinite(theta_lower_bound)) {
    throw std::invalid_argument("theta lower bound must be finite");
  }
  for (const auto& cut : cuts) cut.validate(machines, slots);
  if (pruning && pruning->min_pm_hours.size() != machines) {
    throw std::invalid_argument("pruning needs one entry per machine");
  }
}

const char* to_string(MasterStatus status) {
  switch (status) {
    case MasterStatus::optimal: return "optimal";
    case MasterStatus::infeasible: return "infeasible";
    case MasterStatus::node_limit: return "node_limit";
  }
  return "unknown";
}

Relaxation solve_lp_relaxation(const MasterProblem& p, const Assignment& fixed, double tol) {
  const int nb = p.machines * p.slots;
  if (static_cast<int>(fixed.size()) != nb) {
    throw std::invalid_argument("assignment size does not match the master problem");
  }
  Relaxation out;
  out.m = MatrixXd::Zero(p.machines, p.slots);

  for (int j = 0; j < p.machines; ++j) {
    for (int t = 0; t < p.slots; ++t) {
      if (fixed[j * p.slots + t] != 1) continue;
      if (!p.window[t]) return out;
      out.m(j, t) = 1.0;
    }
  }
  // Only open, unfixed entries in slots with crew to spare become LP
  // columns; the rest are constants.
  std::vector<int> column(nb, -1);
  std::vector<int> entries;
  for (int j = 0; j < p.machines; ++j) {
    for (int t = 0; t < p.slots; ++t) {
      const int e = j * p.slots + t;
      if (fixed[e] == -1 && p.window[t] && out.m.col(t).sum() < p.crew_limit[t]) {
        column[e] = static_cast<int>(entries.size());
        entries.push_back(e);
      }
    }
  }
  const int nf = static_cast<int>(entries.size());
  const int theta = nf;

  std::vector<qp::Triplet> trip;
  std::vector<double> lower, upper;
  for (int t = 0; t < p.slots; ++t) {
    double used = 0.0;
    bool any = false;
    for (int j = 0; j < p.machines; ++j) {
      const int e = j * p.slots + t;
      used += out.m(j, t);
      if (column[e] >= 0) {
        trip.emplace_back(static_cast<int>(lower.size()), column[e], 1.0);
        any = true;
      }
    }
    const double room = p.crew_limit[t] - used;
    if (room < 0.0) return out;
    if (any) {
      lower.push_back(-kInf);
      upper.push_back(room);
    }
  }
  if (p.pruning) {
    for (int j = 0; j < p.machines; ++j) {
      const double need = p.pruning->min_pm_hours[j] - out.m.row(j).sum();
      if (need <= 0.0) continue;
      int free_count = 0;
      for (int t = 0; t < p.slots; ++t) {
        const int c = column[j * p.slots + t];
        if (c >= 0) {
          trip.emplace_back(static_cast<int>(lower.size()), c, 1.0);
          ++free_count;
        }
      }
      if (free_count < need - 1e-9) return out;
      lower.push_back(need);
      upper.push_back(kInf);
    }
  }
  for (const auto& cut : p.cuts) {
    // theta - <g, m_free> >= J - <g, m_hat> + <g, m_fixed>
    const int row = static_cast<int>(lower.size());
    trip.emplace_back(row, theta, 1.0);
    double rhs = cut.anchor_value - (cut.slope.array() * cut.anchor_plan.array()).sum();
    rhs += (cut.slope.array() * out.m.array()).sum();
    for (int c = 0; c < nf; ++c) {
      const int j = entries[c] / p.slots;
      const int t = entries[c] % p.slots;
      if (cut.slope(j, t) != 0.0) trip.emplace_back(row, c, -cut.slope(j, t));
    }
    lower.push_back(rhs);
    upper.push_back(kInf);
  }

  auto prog = qp::QuadraticProgram::with_variables(nf + 1);
  for (int c = 0; c < nf; ++c) {
    prog.q[c] = p.slot_cost(entries[c] % p.slots);
    prog.var_lower[c] = 0.0;
    prog.var_upper[c] = 1.0;
  }
  prog.q[theta] = 1.0;
  prog.var_lower[theta] = p.theta_lower_bound;
  prog.objective_offset = p.plan_cost(out.m);
  const int rows = static_cast<int>(lower.size());
  prog.A_in.resize(rows, nf + 1);
  prog.A_in.setFromTriplets(trip.begin(), trip.end());
  prog.lower = Eigen::Map<Eigen::VectorXd>(lower.data(), rows);
  prog.upper = Eigen::Map<Eigen::VectorXd>(upper.data(), rows);

  const auto sol = qp::solve(prog, tol, 200);
  if (sol.status == qp::Status::infeasible) return out;
  if (sol.status != qp::Status::optimal) {
    throw std::runtime_error("master LP relaxation did not converge");
  }
  for (int c = 0; c < nf; ++c) {
    out.m(entries[c] / p.slots, entries[c] % p.slots) = std::clamp(sol.primal[c], 0.0, 1.0);
  }
  out.theta = sol.primal[theta];
  out.value = sol.objective;
  out.feasible = true;
  return out;
}

std::optional<BranchChoice> select_branch(const MatrixXd& values, double integrality_tol) {
  std::optional<BranchChoice> best;
  double best_distance = kInf;
  for (int j = 0; j < values.rows(); ++j) {
    for (int t = 0; t < values.cols(); ++t) {
      const double v = values(j, t);
      if (std::min(v, 1.0 - v) <= integrality_tol) continue;
      const double distance = std::abs(v - 0.5);
      if (distance < best_distance) {
        best_distance = distance;
        best = BranchChoice{j, t};
      }
    }
  }
  return best;
}

MasterSolution solve_master(const MasterProblem& p, double gap_tol, long node_limit) {
  p.validate();
  MasterSolution out;
  const int nb = p.machines * p.slots;

  bool have_incumbent = false;
  auto offer = [&](const MatrixXd& m) {
    if (!p.admissible(m)) return;
    const double value = p.objective_at(m);
    if (!have_incumbent || value < out.objective) {
      have_incumbent = true;
      out.m = m;
      out.theta = p.theta_at(m);
      out.objective = value;
    }
  };

  std::priority_queue<Node, std::vector<Node>, WorseBound> open;
  long order = 0;
  auto visit = [&](Assignment fixed) {
    Node node;
    node.fixed = std::move(fixed);
    node.relax = solve_lp_relaxation(p, node.fixed);
    ++out.node_count;
    if (!node.relax.feasible) return;
    offer(rounded(node.relax.m));
    if (have_incumbent && node.relax.value >= out.objective) return;
    node.order = order++;
    open.push(std::move(node));
  };

  visit(Assignment(static_cast<std::size_t>(nb), -1));
  if (open.empty() && !have_incumbent) {
    out.status = MasterStatus::infeasible;
    out.infeasible_family = infeasible_family(p);
    return out;
  }

  while (!open.empty()) {
    const double gap = gap_tol * std::max(1.0, std::abs(out.objective));
    if (have_incumbent && open.top().relax.value >= out.objective - gap) break;
    if (out.node_count >= node_limit) {
      out.status = MasterStatus::node_limit;
      out.lower_bound = open.top().relax.value;
      return out;
    }
    Node node = open.top();
    open.pop();
    const auto choice = select_branch(node.relax.m);
    if (!choice) {
      offer(rounded(node.relax.m));
      continue;
    }
    const int e = choice->machine * p.slots + choice->slot;
    for (signed char value : {0, 1}) {
      Assignment child = node.fixed;
      child[e] = value;
      visit(std::move(child));
    }
  }

  if (!have_incumbent) {
    out.status = MasterStatus::infeasible;
    out.infeasible_family = infeasible_family(p);
    return out;
  }
  out.status = MasterStatus::optimal;
  out.lower_bound = open.empty() ? out.objective : std::min(out.objective, open.top().relax.value);
  return out;
}

std::vector<MatrixXd> enumerate_plans(const MasterProblem& p, std::size_t limit) {
  p.validate();
  std::vector<MatrixXd> plans;
  MatrixXd m = MatrixXd::Zero(p.machines, p.slots);
  std::vector<int> crew_used(static_cast<std::size_t>(p.slots), 0);
  const int nb = p.machines * p.slots;

  auto recurse = [&](auto&& self, int e) -> void {
    if (plans.size() >= limit) throw std::length_error("too many plans to enumerate");
    if (e == nb) {
      if (p.admissible(m)) plans.push_back(m);
      return;
    }
    const int j = e / p.slots;
    const int t = e % p.slots;
    self(self, e + 1);
    if (p.window[t] && crew_used[t] < p.crew_limit[t]) {
      m(j, t) = 1.0;
      ++crew_used[t];
      self(self, e + 1);
      --crew_used[t];
      m(j, t) = 0.0;
    }
  };
  recurse(recurse, 0);
  return plans;
}

}  // namespace hmpc
