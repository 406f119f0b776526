#include "hmpc/convex_qp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmpc::qp {

namespace {

using RowMajorSparse = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

double inf_norm(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Where an internal row came from, so multipliers can be mapped back.
enum class Origin { eq, in_fixed, var_fixed, in_lower, in_upper, var_lower, var_upper };

struct RowOrigin {
  Origin kind;
  int index;
};

// Internal standard form: min 1/2 x'Px + q'x  s.t.  E x = b,  C x >= c.
struct StandardForm {
  int n = 0;
  SparseMatrix P;
  VectorXd q;
  SparseMatrix E;
  VectorXd b;
  SparseMatrix C;
  VectorXd c;
  std::vector<RowOrigin> eq_origin;
  std::vector<RowOrigin> ineq_origin;
  // P and q have been divided by this; multipliers are in the same units.
  double cost_scale = 1.0;
};

StandardForm to_standard_form(const QuadraticProgram& qp) {
  StandardForm sf;
  sf.n = qp.num_variables();
  sf.P = qp.P;
  sf.q = qp.q;

  std::vector<Triplet> e_trip;
  std::vector<Triplet> c_trip;
  std::vector<double> b;
  std::vector<double> c;

  const RowMajorSparse a_eq = qp.A_eq;
  for (int i = 0; i < a_eq.rows(); ++i) {
    const int row = static_cast<int>(b.size());
    for (RowMajorSparse::InnerIterator it(a_eq, i); it; ++it) {
      e_trip.emplace_back(row, static_cast<int>(it.col()), it.value());
    }
    b.push_back(qp.b_eq[i]);
    sf.eq_origin.push_back({Origin::eq, i});
  }

  const RowMajorSparse a_in = qp.A_in;
  for (int i = 0; i < a_in.rows(); ++i) {
    const double lo = qp.lower[i];
    const double hi = qp.upper[i];
    if (lo == hi) {
      const int row = static_cast<int>(b.size());
      for (RowMajorSparse::InnerIterator it(a_in, i); it; ++it) {
        e_trip.emplace_back(row, static_cast<int>(it.col()), it.value());
      }
      b.push_back(lo);
      sf.eq_origin.push_back({Origin::in_fixed, i});
      continue;
    }
    if (std::isfinite(lo)) {
      const int row = static_cast<int>(c.size());
      for (RowMajorSparse::InnerIterator it(a_in, i); it; ++it) {
        c_trip.emplace_back(row, static_cast<int>(it.col()), it.value());
      }
      c.push_back(lo);
      sf.ineq_origin.push_back({Origin::in_lower, i});
    }
    if (std::isfinite(hi)) {
      const int row = static_cast<int>(c.size());
      for (RowMajorSparse::InnerIterator it(a_in, i); it; ++it) {
        c_trip.emplace_back(row, static_cast<int>(it.col()), -it.value());
      }
      c.push_back(-hi);
      sf.ineq_origin.push_back({Origin::in_upper, i});
    }
  }

  for (int j = 0; j < sf.n; ++j) {
    const double lo = qp.var_lower[j];
    const double hi = qp.var_upper[j];
    if (lo == hi) {
      e_trip.emplace_back(static_cast<int>(b.size()), j, 1.0);
      b.push_back(lo);
      sf.eq_origin.push_back({Origin::var_fixed, j});
      continue;
    }
    if (std::isfinite(lo)) {
      c_trip.emplace_back(static_cast<int>(c.size()), j, 1.0);
      c.push_back(lo);
      sf.ineq_origin.push_back({Origin::var_lower, j});
    }
    if (std::isfinite(hi)) {
      c_trip.emplace_back(static_cast<int>(c.size()), j, -1.0);
      c.push_back(-hi);
      sf.ineq_origin.push_back({Origin::var_upper, j});
    }
  }

  sf.E.resize(static_cast<int>(b.size()), sf.n);
  sf.E.setFromTriplets(e_trip.begin(), e_trip.end());
  sf.b = Eigen::Map<VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  sf.C.resize(static_cast<int>(c.size()), sf.n);
  sf.C.setFromTriplets(c_trip.begin(), c_trip.end());
  sf.c = Eigen::Map<VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  return sf;
}

// Sparse LDL' factorization of a quasi-definite matrix whose pivot signs are
// known in advance (+ for primal rows, - for equality rows). A pivot that
// cancels to the wrong sign or to roundoff level is replaced by a small value
// of the expected sign, so the factorization never breaks down; callers
// recover accuracy with iterative refinement against the exact matrix.
class SignedLdl {
 public:
  bool factor(const SparseMatrix& full, const std::vector<signed char>& sign) {
    const int n = static_cast<int>(full.rows());
    Eigen::AMDOrdering<int> amd;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
    amd(full, pinv);
    perm_ = pinv.inverse();
    pinv_ = pinv;
    SparseMatrix permuted;
    permuted = full.selfadjointView<Eigen::Lower>().twistedBy(perm_);
    const SparseMatrix upper = permuted.triangularView<Eigen::Upper>();

    std::vector<signed char> psign(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) psign[static_cast<std::size_t>(perm_.indices()[i])] = sign[static_cast<std::size_t>(i)];

    // Elimination tree and column counts.
    std::vector<int> parent(static_cast<std::size_t>(n), -1), work(static_cast<std::size_t>(n), -1),
        count(static_cast<std::size_t>(n), 0);
    for (int k = 0; k < n; ++k) {
      work[static_cast<std::size_t>(k)] = k;
      for (SparseMatrix::InnerIterator it(upper, k); it; ++it) {
        int i = static_cast<int>(it.row());
        if (i >= k) continue;
        while (work[static_cast<std::size_t>(i)] != k) {
          if (parent[static_cast<std::size_t>(i)] == -1) parent[static_cast<std::size_t>(i)] = k;
          ++count[static_cast<std::size_t>(i)];
          work[static_cast<std::size_t>(i)] = k;
          i = parent[static_cast<std::size_t>(i)];
        }
      }
    }
    lp_.assign(static_cast<std::size_t>(n + 1), 0);
    for (int k = 0; k < n; ++k) lp_[static_cast<std::size_t>(k + 1)] = lp_[static_cast<std::size_t>(k)] + count[static_cast<std::size_t>(k)];
    li_.assign(static_cast<std::size_t>(lp_.back()), 0);
    lx_.assign(static_cast<std::size_t>(lp_.back()), 0.0);
    d_.assign(static_cast<std::size_t>(n), 0.0);
    dinv_.assign(static_cast<std::size_t>(n), 0.0);

    std::vector<double> y(static_cast<std::size_t>(n), 0.0);
    std::vector<char> marked(static_cast<std::size_t>(n), 0);
    std::vector<int> pattern, stack;
    std::vector<int> next(lp_.begin(), lp_.end() - 1);
    for (int k = 0; k < n; ++k) {
      pattern.clear();
      double diag = 0.0;
      double magnitude = 0.0;  // largest term summed into the pivot, for roundoff
      for (SparseMatrix::InnerIterator it(upper, k); it; ++it) {
        const int i = static_cast<int>(it.row());
        if (i == k) {
          diag += it.value();
          magnitude = std::max(magnitude, std::abs(it.value()));
          continue;
        }
        y[static_cast<std::size_t>(i)] = it.value();
        int j = i;
        stack.clear();
        while (j != -1 && j < k && !marked[static_cast<std::size_t>(j)]) {
          marked[static_cast<std::size_t>(j)] = 1;
          stack.push_back(j);
          j = parent[static_cast<std::size_t>(j)];
        }
        while (!stack.empty()) {
          pattern.push_back(stack.back());
          stack.pop_back();
        }
      }
      for (auto it = pattern.rbegin(); it != pattern.rend(); ++it) {
        const int c = *it;
        const std::size_t cu = static_cast<std::size_t>(c);
        const double yc = y[cu];
        for (int p = lp_[cu]; p < next[cu]; ++p) y[static_cast<std::size_t>(li_[static_cast<std::size_t>(p)])] -= lx_[static_cast<std::size_t>(p)] * yc;
        const double l = yc * dinv_[cu];
        li_[static_cast<std::size_t>(next[cu])] = k;
        lx_[static_cast<std::size_t>(next[cu])] = l;
        ++next[cu];
        diag -= yc * l;
        magnitude = std::max(magnitude, std::abs(yc * l));
        y[cu] = 0.0;
        marked[cu] = 0;
      }
      const double sg = psign[static_cast<std::size_t>(k)];
      const double floor = 1e-13 * std::max(magnitude, 1e-2);
      if (!(sg * diag > floor)) {
        diag = sg * std::max(floor, 1e-8);
        ++regularized_;
      }
      d_[static_cast<std::size_t>(k)] = diag;
      dinv_[static_cast<std::size_t>(k)] = 1.0 / diag;
    }
    return std::all_of(d_.begin(), d_.end(), [](double v) { return std::isfinite(v); });
  }

  VectorXd solve(const VectorXd& rhs) const {
    VectorXd x = perm_ * rhs;
    const int n = static_cast<int>(x.size());
    for (int k = 0; k < n; ++k) {
      const double xk = x[k];
      for (int p = lp_[static_cast<std::size_t>(k)]; p < lp_[static_cast<std::size_t>(k + 1)]; ++p) {
        x[li_[static_cast<std::size_t>(p)]] -= lx_[static_cast<std::size_t>(p)] * xk;
      }
    }
    for (int k = 0; k < n; ++k) x[k] *= dinv_[static_cast<std::size_t>(k)];
    for (int k = n - 1; k >= 0; --k) {
      double acc = x[k];
      for (int p = lp_[static_cast<std::size_t>(k)]; p < lp_[static_cast<std::size_t>(k + 1)]; ++p) {
        acc -= lx_[static_cast<std::size_t>(p)] * x[li_[static_cast<std::size_t>(p)]];
      }
      x[k] = acc;
    }
    return pinv_ * x;
  }

  int regularized_pivots() const { return regularized_; }

 private:
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm_, pinv_;
  std::vector<int> lp_, li_;
  std::vector<double> lx_, d_, dinv_;
  int regularized_ = 0;
};

// Regularized quasi-definite KKT system with the inequality rows kept explicit
//   [ P + rho I   E'         C'              ] [dx]   [r1]
//   [ E           -delta I   0               ] [dv] = [r2]
//   [ C           0          -D              ] [dw]   [r3]
// where D = S Z^-1. Near the solution D has entries spanning many orders of
// magnitude; keeping them on the diagonal (rather than forming P + C'D^-1 C)
// avoids cancellation between large barrier weights. Iterative refinement runs
// against the unregularized matrix.
class KktSystem {
 public:
  KktSystem(const StandardForm& sf, double rho, double delta)
      : sf_(sf), rho_(rho), delta_(delta) {
    const int n = sf_.n;
    const int me = static_cast<int>(sf_.E.rows());
    const int mc = static_cast<int>(sf_.C.rows());
    std::vector<Triplet> trip;
    for (int k = 0; k < sf_.P.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(sf_.P, k); it; ++it) {
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
      }
    }
    auto border = [&](const SparseMatrix& a, int offset) {
      for (int k = 0; k < a.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
          const int r = offset + static_cast<int>(it.row());
          trip.emplace_back(r, static_cast<int>(it.col()), it.value());
          trip.emplace_back(static_cast<int>(it.col()), r, it.value());
        }
      }
    };
    border(sf_.E, n);
    border(sf_.C, n + me);
    base_.resize(n + me + mc, n + me + mc);
    base_.setFromTriplets(trip.begin(), trip.end());
    sign_.assign(static_cast<std::size_t>(n + me + mc), -1);
    std::fill(sign_.begin(), sign_.begin() + n, 1);
  }

  // `inverse_weights` holds D = s / z, one entry per inequality row.
  bool factor(const VectorXd& inverse_weights) {
    const int n = sf_.n;
    const int me = static_cast<int>(sf_.E.rows());
    diag_ = VectorXd::Zero(n + me + static_cast<int>(inverse_weights.size()));
    diag_.tail(inverse_weights.size()) = -inverse_weights;
    SparseMatrix K = base_;
    VectorXd shift = diag_;
    shift.head(n).array() += rho_;
    shift.segment(n, me).array() -= delta_;
    for (int i = 0; i < K.rows(); ++i) K.coeffRef(i, i) += shift[i];
    return ldl_.factor(K, sign_);
  }

  // Unregularized product.
  VectorXd apply(const VectorXd& sol) const {
    return base_ * sol + diag_.cwiseProduct(sol);
  }

  VectorXd solve(const VectorXd& rhs, int refinement_steps = 6) const {
    VectorXd sol = ldl_.solve(rhs);
    double last = kInf;
    for (int it = 0; it < refinement_steps; ++it) {
      const VectorXd residual = rhs - apply(sol);
      const double size = inf_norm(residual);
      if (size <= 1e-15 * (1.0 + inf_norm(rhs)) || size >= 0.5 * last) break;
      last = size;
      sol += ldl_.solve(residual);
    }
    return sol;
  }

 private:
  const StandardForm& sf_;
  double rho_;
  double delta_;
  SparseMatrix base_;
  VectorXd diag_;
  std::vector<signed char> sign_;
  SignedLdl ldl_;
};

struct IpmResult {
  VectorXd x, y, s, z;
  int iterations = 0;
  bool converged = false;
  bool polished = false;
};

struct Residuals {
  VectorXd rd, re, ri;
  double primal_scaled = 0.0;
  double dual_scaled = 0.0;
  double gap_scaled = 0.0;
};

Residuals residuals(const StandardForm& sf, const VectorXd& x, const VectorXd& y,
                    const VectorXd& s, const VectorXd& z) {
  Residuals r;
  const VectorXd px = sf.P * x;
  VectorXd ety = VectorXd::Zero(sf.n);
  VectorXd ctz = VectorXd::Zero(sf.n);
  if (sf.E.rows() > 0) ety = sf.E.transpose() * y;
  if (sf.C.rows() > 0) ctz = sf.C.transpose() * z;
  r.rd = px + sf.q - ety - ctz;
  const VectorXd ex = sf.E.rows() > 0 ? VectorXd(sf.E * x) : VectorXd();
  const VectorXd cx = sf.C.rows() > 0 ? VectorXd(sf.C * x) : VectorXd();
  r.re = sf.E.rows() > 0 ? VectorXd(ex - sf.b) : VectorXd();
  r.ri = sf.C.rows() > 0 ? VectorXd(cx - s - sf.c) : VectorXd();

  const double pscale =
      1.0 + std::max({inf_norm(sf.b), inf_norm(sf.c), inf_norm(ex), inf_norm(cx), inf_norm(s)});
  const double dscale =
      1.0 + std::max({inf_norm(px), inf_norm(sf.q), inf_norm(ety), inf_norm(ctz)});
  const double pobj = 0.5 * x.dot(px) + sf.q.dot(x);
  r.primal_scaled = std::max(inf_norm(r.re), inf_norm(r.ri)) / pscale;
  r.dual_scaled = inf_norm(r.rd) / dscale;
  // Measured in the units of the unscaled objective.
  r.gap_scaled = (s.size() ? s.dot(z) : 0.0) / (1.0 / sf.cost_scale + std::abs(pobj));
  return r;
}

double max_step(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  }
  return alpha;
}

bool polish(const StandardForm& sf, IpmResult& res, double tol, bool require_tol);

// Accepts the active-set polish of an iterate if it meets the tolerance.
bool finish_by_polish(const StandardForm& sf, IpmResult& res, double tol) {
  IpmResult cand = res;
  if (!polish(sf, cand, tol, true)) return false;
  cand.converged = true;
  cand.polished = true;
  res = std::move(cand);
  return true;
}

IpmResult interior_point(const StandardForm& sf, double tol, int max_iter) {
  const int n = sf.n;
  const int me = static_cast<int>(sf.E.rows());
  const int mc = static_cast<int>(sf.C.rows());
  const double data_scale = 1.0 + std::max({inf_norm(sf.q), inf_norm(sf.b), inf_norm(sf.c)});
  KktSystem kkt(sf, 1e-9, 1e-9);

  IpmResult out;
  out.x = VectorXd::Zero(n);
  out.y = VectorXd::Zero(me);
  out.s = VectorXd::Ones(mc);
  out.z = VectorXd::Ones(mc);

  // Mehrotra's starting point: primal least-squares fit of the constraints,
  // minimum-norm dual fit of stationarity, then both shifted into the interior.
  {
    if (!kkt.factor(VectorXd::Ones(mc))) return out;
    VectorXd rhs = VectorXd::Zero(n + me + mc);
    rhs.segment(n, me) = sf.b;
    rhs.tail(mc) = sf.c;
    VectorXd sol = kkt.solve(rhs);
    out.x = sol.head(n);

    rhs.setZero();
    rhs.head(n) = sf.P * out.x + sf.q;
    sol = kkt.solve(rhs);
    out.y = sol.segment(n, me);
    if (mc > 0) {
      VectorXd s = sf.C * out.x - sf.c;
      VectorXd z = sol.tail(mc);
      double ds = std::max(-1.5 * s.minCoeff(), 0.0);
      double dz = std::max(-1.5 * z.minCoeff(), 0.0);
      s.array() += ds;
      z.array() += dz;
      const double sz = s.dot(z);
      const double scale = 1.0 + std::max(inf_norm(sf.c), inf_norm(sf.q)) * 1e-6;
      if (sz <= 0.0 || z.sum() <= 0.0 || s.sum() <= 0.0) {
        s.array() += scale;
        z.array() += scale;
      } else {
        s.array() += 0.5 * sz / z.sum();
        z.array() += 0.5 * sz / s.sum();
      }
      out.s = s.cwiseMax(1e-8 * scale);
      out.z = z.cwiseMax(1e-8 * scale);
    }
  }

  VectorXd& x = out.x;
  VectorXd& y = out.y;
  VectorXd& s = out.s;
  VectorXd& z = out.z;

  int stalled = 0;
  double best_primal = kInf;
  int primal_flat = 0;
  for (int iter = 0; iter <= max_iter; ++iter) {
    out.iterations = iter;
    const Residuals r = residuals(sf, x, y, s, z);
    if (r.primal_scaled <= tol && r.dual_scaled <= tol && r.gap_scaled <= tol) {
      out.converged = true;
      return out;
    }
    // The gap has closed but the primal residual no longer moves: the
    // Newton steps are not solving the KKT system accurately enough.
    if (r.primal_scaled < 0.5 * best_primal) {
      best_primal = r.primal_scaled;
      primal_flat = 0;
    } else if (r.dual_scaled <= tol && r.gap_scaled <= tol && ++primal_flat >= 8) {
      finish_by_polish(sf, out, tol);
      return out;
    }
    // Near the end the barrier weights grow without bound; an exact solve on
    // the identified active set usually finishes the job sooner.
    const bool close = std::max({r.primal_scaled, r.dual_scaled, r.gap_scaled}) <= 1e-5;
    if (close && finish_by_polish(sf, out, tol)) return out;
    const double big = 1e14 * data_scale;
    const VectorXd d = mc > 0 ? VectorXd(s.cwiseQuotient(z)) : VectorXd();
    if (iter == max_iter || inf_norm(z) > big || inf_norm(y) > big || inf_norm(x) > big ||
        !kkt.factor(d)) {
      if (!close) finish_by_polish(sf, out, tol);
      return out;
    }

    auto newton = [&](const VectorXd& rsz, VectorXd& dx, VectorXd& dy, VectorXd& ds,
                      VectorXd& dz) {
      VectorXd rhs(n + me + mc);
      rhs.head(n) = -r.rd;
      if (me > 0) rhs.segment(n, me) = -r.re;
      if (mc > 0) rhs.tail(mc) = -r.ri - rsz.cwiseQuotient(z);
      const VectorXd sol = kkt.solve(rhs);
      dx = sol.head(n);
      dy = -sol.segment(n, me);
      if (mc > 0) {
        // Recover ds from the complementarity row: dividing by z stays
        // well scaled on active rows, where s is tiny and z is not.
        dz = -sol.tail(mc);
        ds = -(rsz + s.cwiseProduct(dz)).cwiseQuotient(z);
      }
    };

    VectorXd dx, dy, ds, dz;
    if (mc == 0) {
      newton(VectorXd(), dx, dy, ds, dz);
      x += dx;
      y += dy;
      continue;
    }

    const double mu = s.dot(z) / mc;
    const VectorXd rsz_aff = s.cwiseProduct(z);
    newton(rsz_aff, dx, dy, ds, dz);
    const double alpha_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = (s + alpha_aff * ds).dot(z + alpha_aff * dz) / mc;
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    const VectorXd rsz =
        rsz_aff + ds.cwiseProduct(dz) - VectorXd::Constant(mc, sigma * mu);
    newton(rsz, dx, dy, ds, dz);
    const double alpha_max = std::min(max_step(s, ds), max_step(z, dz));
    const double alpha = std::min(1.0, 0.99 * alpha_max);

    x += alpha * dx;
    y += alpha * dy;
    s += alpha * ds;
    z += alpha * dz;
    s = s.cwiseMax(1e-300);
    z = z.cwiseMax(1e-300);

    stalled = alpha < 1e-10 ? stalled + 1 : 0;
    if (stalled >= 5) {
      finish_by_polish(sf, out, tol);
      return out;
    }
  }
  return out;
}

// Re-solves the equality-constrained problem on the identified active set.
// Returns true and overwrites `res` when the polished point is primal and
// dual feasible and at least as accurate as the interior-point iterate (or,
// with `require_tol`, within the tolerance).
bool polish(const StandardForm& sf, IpmResult& res, double tol, bool require_tol) {
  const int n = sf.n;
  const int me = static_cast<int>(sf.E.rows());
  const int mc = static_cast<int>(sf.C.rows());

  std::vector<int> active;
  for (int i = 0; i < mc; ++i) {
    if (res.z[i] > res.s[i]) active.push_back(i);
  }
  const int ma = static_cast<int>(active.size());

  StandardForm eqp;
  eqp.n = n;
  eqp.P = sf.P;
  eqp.q = sf.q;
  std::vector<Triplet> trip;
  for (int k = 0; k < sf.E.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(sf.E, k); it; ++it) {
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  const RowMajorSparse c_rows = sf.C;
  VectorXd b(me + ma);
  b.head(me) = sf.b;
  for (int a = 0; a < ma; ++a) {
    for (RowMajorSparse::InnerIterator it(c_rows, active[a]); it; ++it) {
      trip.emplace_back(me + a, static_cast<int>(it.col()), it.value());
    }
    b[me + a] = sf.c[active[a]];
  }
  eqp.E.resize(me + ma, n);
  eqp.E.setFromTriplets(trip.begin(), trip.end());
  eqp.b = b;

  KktSystem kkt(eqp, 1e-10, 1e-10);
  if (!kkt.factor(VectorXd())) return false;
  VectorXd rhs(n + me + ma);
  rhs.head(n) = -sf.q;
  rhs.tail(me + ma) = b;
  // Solve for a correction to the interior-point iterate rather than from
  // scratch. On a degenerate active set the multipliers are not unique; the
  // regularized correction leaves their free part where the iterate put it,
  // and those values are nonnegative.
  VectorXd start(n + me + ma);
  start.head(n) = res.x;
  start.segment(n, me) = -res.y;
  for (int a = 0; a < ma; ++a) start[n + me + a] = -res.z[active[a]];
  const VectorXd sol = start + kkt.solve(rhs - kkt.apply(start), 10);
  if (!sol.allFinite()) return false;

  IpmResult cand = res;
  cand.x = sol.head(n);
  const VectorXd mult = -sol.tail(me + ma);
  cand.y = mult.head(me);
  cand.z.setZero();
  for (int a = 0; a < ma; ++a) {
    if (mult[me + a] < -tol * (1.0 + inf_norm(mult))) return false;
    cand.z[active[a]] = std::max(0.0, mult[me + a]);
  }
  if (mc > 0) {
    const VectorXd slack = sf.C * cand.x - sf.c;
    const double scale = 1.0 + std::max(inf_norm(sf.c), inf_norm(slack));
    if (slack.minCoeff() < -tol * scale) return false;
    cand.s = slack.cwiseMax(0.0);
  }
  const Residuals before = residuals(sf, res.x, res.y, res.s, res.z);
  const Residuals after = residuals(sf, cand.x, cand.y, cand.s, cand.z);
  const double worst_before =
      std::max({before.primal_scaled, before.dual_scaled, before.gap_scaled});
  const double worst_after = std::max({after.primal_scaled, after.dual_scaled, after.gap_scaled});
  if (!(worst_after <= (require_tol ? tol : std::max(worst_before, tol)))) return false;
  res = std::move(cand);
  return true;
}

// Elastic phase one: minimize total violation of the general rows while
// keeping variable bounds hard. A strictly positive optimum proves
// infeasibility and its multipliers form a Farkas certificate.
std::optional<InfeasibilityCertificate> phase_one(const QuadraticProgram& qp,
                                                  const StandardForm& sf, double tol,
                                                  int max_iter) {
  const int n = sf.n;
  const int me = static_cast<int>(sf.E.rows());
  const int mc = static_cast<int>(sf.C.rows());

  std::vector<int> elastic_eq;
  for (int i = 0; i < me; ++i) {
    if (sf.eq_origin[i].kind != Origin::var_fixed) elastic_eq.push_back(i);
  }
  std::vector<int> elastic_in;
  for (int i = 0; i < mc; ++i) {
    const Origin k = sf.ineq_origin[i].kind;
    if (k == Origin::in_lower || k == Origin::in_upper) elastic_in.push_back(i);
  }
  const int ne = static_cast<int>(elastic_eq.size());
  const int ni = static_cast<int>(elastic_in.size());
  const int n2 = n + 2 * ne + ni;

  StandardForm p1;
  p1.n = n2;
  p1.P.resize(n2, n2);
  p1.q = VectorXd::Zero(n2);
  p1.q.tail(2 * ne + ni).setOnes();

  std::vector<Triplet> et;
  for (int k = 0; k < sf.E.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(sf.E, k); it; ++it) {
      et.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (int e = 0; e < ne; ++e) {
    et.emplace_back(elastic_eq[e], n + e, 1.0);
    et.emplace_back(elastic_eq[e], n + ne + e, -1.0);
  }
  p1.E.resize(me, n2);
  p1.E.setFromTriplets(et.begin(), et.end());
  p1.b = sf.b;

  std::vector<Triplet> ct;
  for (int k = 0; k < sf.C.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(sf.C, k); it; ++it) {
      ct.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (int e = 0; e < ni; ++e) ct.emplace_back(elastic_in[e], n + 2 * ne + e, 1.0);
  for (int t = 0; t < 2 * ne + ni; ++t) ct.emplace_back(mc + t, n + t, 1.0);
  p1.C.resize(mc + 2 * ne + ni, n2);
  p1.C.setFromTriplets(ct.begin(), ct.end());
  p1.c = VectorXd::Zero(mc + 2 * ne + ni);
  p1.c.head(mc) = sf.c;

  IpmResult r = interior_point(p1, tol, max_iter);
  if (!r.converged) return std::nullopt;
  // Each row's violation is measured against its own right-hand side so a
  // large unrelated row does not mask a small genuine conflict.
  double violation = 0.0;
  for (int e = 0; e < ne; ++e) {
    const double scale = 1.0 + std::abs(sf.b[elastic_eq[e]]);
    violation += (r.x[n + e] + r.x[n + ne + e]) / scale;
  }
  for (int e = 0; e < ni; ++e) {
    violation += r.x[n + 2 * ne + e] / (1.0 + std::abs(sf.c[elastic_in[e]]));
  }
  if (violation <= std::sqrt(tol)) return std::nullopt;

  InfeasibilityCertificate cert;
  cert.eq = VectorXd::Zero(qp.num_equalities());
  cert.in_lower = VectorXd::Zero(qp.num_inequalities());
  cert.in_upper = VectorXd::Zero(qp.num_inequalities());
  cert.var_lower = VectorXd::Zero(n);
  cert.var_upper = VectorXd::Zero(n);
  for (int i = 0; i < me; ++i) {
    const RowOrigin o = sf.eq_origin[i];
    const double y = r.y[i];
    switch (o.kind) {
      case Origin::eq: cert.eq[o.index] = y; break;
      case Origin::in_fixed:
        cert.in_lower[o.index] = std::max(y, 0.0);
        cert.in_upper[o.index] = std::max(-y, 0.0);
        break;
      case Origin::var_fixed:
        cert.var_lower[o.index] = std::max(y, 0.0);
        cert.var_upper[o.index] = std::max(-y, 0.0);
        break;
      default: break;
    }
  }
  for (int i = 0; i < mc; ++i) {
    const RowOrigin o = sf.ineq_origin[i];
    const double z = r.z[i];
    switch (o.kind) {
      case Origin::in_lower: cert.in_lower[o.index] += z; break;
      case Origin::in_upper: cert.in_upper[o.index] += z; break;
      case Origin::var_lower: cert.var_lower[o.index] += z; break;
      case Origin::var_upper: cert.var_upper[o.index] += z; break;
      default: break;
    }
  }
  return cert;
}

void check_shape(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("quadratic program: ") + what);
}

}  // namespace

QuadraticProgram QuadraticProgram::with_variables(int n) {
  QuadraticProgram qp;
  qp.P.resize(n, n);
  qp.q = VectorXd::Zero(n);
  qp.A_eq.resize(0, n);
  qp.b_eq.resize(0);
  qp.A_in.resize(0, n);
  qp.lower.resize(0);
  qp.upper.resize(0);
  qp.var_lower = VectorXd::Constant(n, -kInf);
  qp.var_upper = VectorXd::Constant(n, kInf);
  return qp;
}

double QuadraticProgram::objective(const VectorXd& x) const {
  return 0.5 * x.dot(P * x) + q.dot(x) + objective_offset;
}

void QuadraticProgram::validate() const {
  const int n = num_variables();
  check_shape(P.rows() == n && P.cols() == n, "P must be n x n");
  check_shape(A_eq.cols() == n && A_eq.rows() == b_eq.size(), "A_eq/b_eq shape mismatch");
  check_shape(A_in.cols() == n && A_in.rows() == lower.size() && lower.size() == upper.size(),
              "A_in/lower/upper shape mismatch");
  check_shape(var_lower.size() == n && var_upper.size() == n, "variable bounds shape mismatch");
  for (int i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i]) || lower[i] == kInf || upper[i] == -kInf) {
      throw std::invalid_argument("quadratic program: inequality row " + std::to_string(i) +
                                  " has lower > upper");
    }
  }
  for (int j = 0; j < n; ++j) {
    if (!(var_lower[j] <= var_upper[j]) || var_lower[j] == kInf || var_upper[j] == -kInf) {
      throw std::invalid_argument("quadratic program: variable " + std::to_string(j) +
                                  " has lower > upper");
    }
  }
  check_shape(q.allFinite() && b_eq.allFinite(), "q and b_eq must be finite");
  if (n == 0 || P.nonZeros() == 0) return;

  double scale = 0.0;
  for (int k = 0; k < P.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(P, k); it; ++it) {
      scale = std::max(scale, std::abs(it.value()));
    }
  }
  const SparseMatrix asym = SparseMatrix(P.transpose()) - P;
  double asym_max = 0.0;
  for (int k = 0; k < asym.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(asym, k); it; ++it) {
      asym_max = std::max(asym_max, std::abs(it.value()));
    }
  }
  if (asym_max > 1e-10 * std::max(1.0, scale)) {
    throw std::invalid_argument("quadratic program: P is not symmetric");
  }
  // Sylvester's law of inertia: P + tau I has a negative pivot iff P has an
  // eigenvalue below -tau.
  const double tau = 1e-8 * std::max(1.0, scale);
  SparseMatrix shifted = P;
  for (int j = 0; j < n; ++j) shifted.coeffRef(j, j) += tau;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) {
    throw std::invalid_argument("quadratic program: P is not positive semidefinite");
  }
}

const char* to_string(Status status) {
  switch (status) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::max_iter: return "max_iter";
  }
  return "unknown";
}

double KktResiduals::max() const {
  return std::max({stationarity, primal, dual, complementarity});
}

double InfeasibilityCertificate::stationarity(const QuadraticProgram& qp) const {
  VectorXd r = var_lower - var_upper;
  if (qp.num_equalities() > 0) r += qp.A_eq.transpose() * eq;
  if (qp.num_inequalities() > 0) r += qp.A_in.transpose() * (in_lower - in_upper);
  return inf_norm(r);
}

double InfeasibilityCertificate::margin(const QuadraticProgram& qp) const {
  auto side = [](const VectorXd& bound, const VectorXd& mult, double sign) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < bound.size(); ++i) {
      if (mult[i] != 0.0 && std::isfinite(bound[i])) acc += sign * bound[i] * mult[i];
    }
    return acc;
  };
  return qp.b_eq.dot(eq) + side(qp.lower, in_lower, 1.0) + side(qp.upper, in_upper, -1.0) +
         side(qp.var_lower, var_lower, 1.0) + side(qp.var_upper, var_upper, -1.0);
}

KktResiduals kkt_residuals(const QuadraticProgram& qp, const QPSolution& sol) {
  KktResiduals out;
  const int n = qp.num_variables();
  if (n == 0) return out;
  const VectorXd& x = sol.primal;
  VectorXd grad = qp.P * x + qp.q - (sol.duals_var_lower - sol.duals_var_upper);
  if (qp.num_equalities() > 0) grad -= qp.A_eq.transpose() * sol.duals_eq;
  if (qp.num_inequalities() > 0) {
    grad -= qp.A_in.transpose() * (sol.duals_in_lower - sol.duals_in_upper);
  }
  out.stationarity = inf_norm(grad);

  double primal = 0.0;
  double dual = 0.0;
  double comp = 0.0;
  auto side = [&](double value, double bound, double mult, bool is_lower) {
    dual = std::max(dual, -mult);
    if (!std::isfinite(bound)) {
      dual = std::max(dual, std::abs(mult));
      return;
    }
    const double slack = is_lower ? value - bound : bound - value;
    primal = std::max(primal, -slack);
    comp = std::max(comp, std::abs(mult * slack));
  };
  if (qp.num_equalities() > 0) primal = inf_norm(qp.A_eq * x - qp.b_eq);
  if (qp.num_inequalities() > 0) {
    const VectorXd ax = qp.A_in * x;
    for (int i = 0; i < ax.size(); ++i) {
      side(ax[i], qp.lower[i], sol.duals_in_lower[i], true);
      side(ax[i], qp.upper[i], sol.duals_in_upper[i], false);
    }
  }
  for (int j = 0; j < n; ++j) {
    side(x[j], qp.var_lower[j], sol.duals_var_lower[j], true);
    side(x[j], qp.var_upper[j], sol.duals_var_upper[j], false);
  }
  out.primal = primal;
  out.dual = dual;
  out.complementarity = comp;
  return out;
}

QPSolution solve(const QuadraticProgram& qp, double tol, int max_iter) {
  SolverOptions options;
  options.tol = tol;
  options.max_iter = max_iter;
  return solve(qp, options);
}

QPSolution solve(const QuadraticProgram& qp, const SolverOptions& options) {
  qp.validate();
  const int n = qp.num_variables();
  QPSolution sol;
  sol.primal = VectorXd::Zero(n);
  sol.duals_eq = VectorXd::Zero(qp.num_equalities());
  sol.duals_in_lower = VectorXd::Zero(qp.num_inequalities());
  sol.duals_in_upper = VectorXd::Zero(qp.num_inequalities());
  sol.duals_var_lower = VectorXd::Zero(n);
  sol.duals_var_upper = VectorXd::Zero(n);
  if (n == 0) {
    sol.status = Status::optimal;
    sol.objective = sol.dual_objective = qp.objective_offset;
    return sol;
  }

  const StandardForm sf = to_standard_form(qp);
  IpmResult r = interior_point(sf, options.tol, options.max_iter);
  sol.iterations = r.iterations;
  // Penalty weights of 1e6 next to unit costs give multipliers whose ratio
  // to the slacks defeats the factorization on degenerate active sets;
  // the same problem with normalized costs usually goes through.
  const double cost_scale = std::max({1.0, inf_norm(sf.q), inf_norm(VectorXd(sf.P.coeffs()))});
  if (!r.converged && cost_scale > 1.0) {
    StandardForm scaled = sf;
    scaled.P /= cost_scale;
    scaled.q /= cost_scale;
    scaled.cost_scale = cost_scale;
    IpmResult retry = interior_point(scaled, options.tol, options.max_iter);
    sol.iterations += retry.iterations;
    if (retry.converged) {
      retry.y *= cost_scale;
      retry.z *= cost_scale;
      r = std::move(retry);
    }
  }
  if (!r.converged) {
    if (auto cert = phase_one(qp, sf, options.tol, options.max_iter)) {
      sol.status = Status::infeasible;
      sol.certificate = std::move(cert);
    } else {
      sol.status = Status::max_iter;
    }
    sol.primal = r.x;
    sol.objective = qp.objective(r.x);
    return sol;
  }
  sol.polished = r.polished;
  if (options.polish && !r.polished) sol.polished = polish(sf, r, options.tol, false);

  sol.status = Status::optimal;
  sol.primal = r.x;
  for (std::size_t i = 0; i < sf.eq_origin.size(); ++i) {
    const RowOrigin o = sf.eq_origin[i];
    const double y = r.y[static_cast<Eigen::Index>(i)];
    switch (o.kind) {
      case Origin::eq: sol.duals_eq[o.index] = y; break;
      case Origin::in_fixed:
        sol.duals_in_lower[o.index] = std::max(y, 0.0);
        sol.duals_in_upper[o.index] = std::max(-y, 0.0);
        break;
      case Origin::var_fixed:
        sol.duals_var_lower[o.index] = std::max(y, 0.0);
        sol.duals_var_upper[o.index] = std::max(-y, 0.0);
        break;
      default: break;
    }
  }
  for (std::size_t i = 0; i < sf.ineq_origin.size(); ++i) {
    const RowOrigin o = sf.ineq_origin[i];
    const double z = r.z[static_cast<Eigen::Index>(i)];
    switch (o.kind) {
      case Origin::in_lower: sol.duals_in_lower[o.index] = z; break;
      case Origin::in_upper: sol.duals_in_upper[o.index] = z; break;
      case Origin::var_lower: sol.duals_var_lower[o.index] = z; break;
      case Origin::var_upper: sol.duals_var_upper[o.index] = z; break;
      default: break;
    }
  }
  sol.objective = qp.objective(r.x);
  const double xpx = r.x.dot(sf.P * r.x);
  sol.dual_objective = -0.5 * xpx + (sf.b.size() ? sf.b.dot(r.y) : 0.0) +
                       (sf.c.size() ? sf.c.dot(r.z) : 0.0) + qp.objective_offset;
  return sol;
}

// Layout (whitespace separated, '#' starts a comment line):
//   hmpc-qp 1
//   n <n> m_eq <m_eq> m_in <m_in>
//   offset <value>
//   P, q, A_eq, b_eq, A_in, lower, upper, var_lower, var_upper
// Each section is its keyword followed by the dense values in row-major
// order; infinities are written as inf / -inf.
void write_text(const QuadraticProgram& qp, std::ostream& out) {
  const int n = qp.num_variables();
  char buf[40];
  auto num = [&](double v) -> const char* {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  auto matrix = [&](const char* name, const SparseMatrix& m) {
    out << name << '\n';
    const Eigen::MatrixXd dense(m);
    for (int i = 0; i < dense.rows(); ++i) {
      for (int j = 0; j < dense.cols(); ++j) out << (j ? " " : "") << num(dense(i, j));
      out << '\n';
    }
  };
  auto vector = [&](const char* name, const VectorXd& v) {
    out << name << '\n';
    for (int i = 0; i < v.size(); ++i) out << (i ? " " : "") << num(v[i]);
    out << '\n';
  };
  out << "# dense quadratic program: min 1/2 x'Px + q'x + offset\n";
  out << "hmpc-qp 1\n";
  out << "n " << n << " m_eq " << qp.num_equalities() << " m_in " << qp.num_inequalities()
      << '\n';
  out << "offset " << num(qp.objective_offset) << '\n';
  matrix("P", qp.P);
  vector("q", qp.q);
  matrix("A_eq", qp.A_eq);
  vector("b_eq", qp.b_eq);
  matrix("A_in", qp.A_in);
  vector("lower", qp.lower);
  vector("upper", qp.upper);
  vector("var_lower", qp.var_lower);
  vector("var_upper", qp.var_upper);
}

void write_text(const QuadraticProgram& qp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_text(qp, out);
}

QuadraticProgram read_text(std::istream& in) {
  std::stringstream body;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    body << line << '\n';
  }
  auto expect = [&](const std::string& word) {
    std::string tok;
    if (!(body >> tok) || tok != word) {
      throw std::runtime_error("qp text: expected '" + word + "', got '" + tok + "'");
    }
  };
  auto number = [&]() {
    std::string tok;
    if (!(body >> tok)) throw std::runtime_error("qp text: unexpected end of input");
    if (tok == "inf") return kInf;
    if (tok == "-inf") return -kInf;
    return std::stod(tok);
  };
  expect("hmpc-qp");
  if (number() != 1.0) throw std::runtime_error("qp text: unsupported version");
  expect("n");
  const int n = static_cast<int>(number());
  expect("m_eq");
  const int me = static_cast<int>(number());
  expect("m_in");
  const int mi = static_cast<int>(number());
  expect("offset");
  QuadraticProgram qp = QuadraticProgram::with_variables(n);
  qp.objective_offset = number();
  auto matrix = [&](const char* name, int rows) {
    expect(name);
    Eigen::MatrixXd dense(rows, n);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < n; ++j) dense(i, j) = number();
    return SparseMatrix(dense.sparseView());
  };
  auto vector = [&](const char* name, int size) {
    expect(name);
    VectorXd v(size);
    for (int i = 0; i < size; ++i) v[i] = number();
    return v;
  };
  qp.P = matrix("P", n);
  qp.q = vector("q", n);
  qp.A_eq = matrix("A_eq", me);
  qp.b_eq = vector("b_eq", me);
  qp.A_in = matrix("A_in", mi);
  qp.lower = vector("lower", mi);
  qp.upper = vector("upper", mi);
  qp.var_lower = vector("var_lower", n);
  qp.var_upper = vector("var_upper", n);
  return qp;
}

}  // namespace hmpc::qp
