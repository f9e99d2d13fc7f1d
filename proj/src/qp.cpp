#include "cmp/qp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <vector>

namespace cmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SpMat sparse_from_dense(const MatrixXd& m) {
  SpMat s = m.sparseView(1.0, 1e-300);
  s.makeCompressed();
  return s;
}

struct Stacked {
  SpMat C;      // [A; G]
  VectorXd lo;  // [b; -inf]
  VectorXd up;  // [b; h]
  int m_eq = 0;
};

Stacked stack_constraints(const QuadraticProgram& qp) {
  Stacked st;
  st.m_eq = qp.num_eq();
  const int n = qp.num_vars();
  const int m = qp.num_eq() + qp.num_in();
  st.C.resize(m, n);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(qp.A.nonZeros() + qp.G.nonZeros());
  for (int k = 0; k < qp.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(qp.A, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                         it.value());
  for (int k = 0; k < qp.G.outerSize(); ++k)
    for (SpMat::InnerIterator it(qp.G, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()) + st.m_eq,
                         static_cast<int>(it.col()), it.value());
  st.C.setFromTriplets(trips.begin(), trips.end());
  st.C.makeCompressed();
  st.lo.resize(m);
  st.up.resize(m);
  st.lo.head(st.m_eq) = qp.b;
  st.up.head(st.m_eq) = qp.b;
  st.lo.tail(qp.num_in()).setConstant(-kInf);
  st.up.tail(qp.num_in()) = qp.h;
  return st;
}

double inf_norm(const VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

/// Modified Ruiz equilibration of the (P, C) pair plus cost normalization.
struct Scaling {
  VectorXd d;  // variable scaling
  VectorXd e;  // constraint scaling
  double gamma = 1.0;
};

Scaling ruiz_equilibrate(SpMat& P, VectorXd& c, SpMat& C, VectorXd& lo,
                         VectorXd& up, int iters) {
  const int n = static_cast<int>(P.rows());
  const int m = static_cast<int>(C.rows());
  Scaling sc;
  sc.d = VectorXd::Ones(n);
  sc.e = VectorXd::Ones(m);

  for (int pass = 0; pass < iters; ++pass) {
    VectorXd col_norm = VectorXd::Zero(n);
    for (int k = 0; k < P.outerSize(); ++k)
      for (SpMat::InnerIterator it(P, k); it; ++it)
        col_norm[it.col()] = std::max(col_norm[it.col()], std::abs(it.value()));
    VectorXd row_norm = VectorXd::Zero(m);
    for (int k = 0; k < C.outerSize(); ++k)
      for (SpMat::InnerIterator it(C, k); it; ++it) {
        col_norm[it.col()] = std::max(col_norm[it.col()], std::abs(it.value()));
        row_norm[it.row()] = std::max(row_norm[it.row()], std::abs(it.value()));
      }
    VectorXd dd(n), de(m);
    for (int j = 0; j < n; ++j)
      dd[j] = col_norm[j] > 1e-12 ? 1.0 / std::sqrt(col_norm[j]) : 1.0;
    for (int i = 0; i < m; ++i)
      de[i] = row_norm[i] > 1e-12 ? 1.0 / std::sqrt(row_norm[i]) : 1.0;

    P = dd.asDiagonal() * P * dd.asDiagonal();
    C = de.asDiagonal() * C * dd.asDiagonal();
    c = dd.cwiseProduct(c);
    for (int i = 0; i < m; ++i) {
      if (std::isfinite(lo[i])) lo[i] *= de[i];
      if (std::isfinite(up[i])) up[i] *= de[i];
    }
    sc.d = sc.d.cwiseProduct(dd);
    sc.e = sc.e.cwiseProduct(de);
  }

  // cost scaling: normalize the scaled objective magnitude
  double mean_col = 0.0;
  {
    VectorXd col_norm = VectorXd::Zero(n);
    for (int k = 0; k < P.outerSize(); ++k)
      for (SpMat::InnerIterator it(P, k); it; ++it)
        col_norm[it.col()] = std::max(col_norm[it.col()], std::abs(it.value()));
    mean_col = n ? col_norm.mean() : 0.0;
  }
  const double denom = std::max(1e-8, std::max(mean_col, inf_norm(c)));
  sc.gamma = 1.0 / denom;
  P *= sc.gamma;
  c *= sc.gamma;
  return sc;
}

struct Residuals {
  double prim = kInf;
  double dual = kInf;
  double eps_prim = 0.0;
  double eps_dual = 0.0;
  bool converged(double, double) const {
    return prim <= eps_prim && dual <= eps_dual;
  }
};

Residuals compute_residuals(const QuadraticProgram& qp, const Stacked& st,
                            const VectorXd& x, const VectorXd& y,
                            const QpConfig& cfg) {
  Residuals r;
  VectorXd Cx = st.C.rows() ? VectorXd(st.C * x) : VectorXd();
  // distance of Cx from the box (covers equalities and inequalities alike);
  // constraint satisfaction is judged against the absolute tolerance
  VectorXd z = Cx;
  for (int i = 0; i < z.size(); ++i) z[i] = std::clamp(z[i], st.lo[i], st.up[i]);
  r.prim = inf_norm(Cx - z);
  r.eps_prim = cfg.eps_abs;

  VectorXd Px = qp.P * x;
  VectorXd Cty = st.C.rows() ? VectorXd(st.C.transpose() * y) : VectorXd::Zero(x.size());
  r.dual = inf_norm(Px + qp.c + Cty);
  r.eps_dual = cfg.eps_abs + cfg.eps_rel * std::max({inf_norm(Px), inf_norm(qp.c),
                                                     inf_norm(Cty)});
  // dual feasibility and complementarity, so a stationary point with a wrong
  // active set cannot masquerade as optimal
  for (int i = st.m_eq; i < y.size(); ++i) {
    r.dual = std::max(r.dual, -y[i]);
    if (std::isfinite(st.up[i])) {
      const double slack = st.up[i] - Cx[i];
      if (y[i] > 0 && slack > 0) r.dual = std::max(r.dual, y[i] * slack);
    }
  }
  return r;
}

/// OSQP-style primal infeasibility certificate test on the dual increment.
bool primal_infeasibility_certificate(const Stacked& st, const VectorXd& dy,
                                      double eps) {
  const double norm_dy = inf_norm(dy);
  if (norm_dy < 1e-12) return false;
  VectorXd Ct_dy = st.C.transpose() * dy;
  if (inf_norm(Ct_dy) > eps * norm_dy) return false;
  double support = 0.0;
  for (int i = 0; i < dy.size(); ++i) {
    if (dy[i] > 0) {
      if (!std::isfinite(st.up[i])) return false;
      support += st.up[i] * dy[i];
    } else if (dy[i] < 0) {
      if (!std::isfinite(st.lo[i])) return false;
      support += st.lo[i] * dy[i];
    }
  }
  return support < -eps * norm_dy;
}

struct Factorization {
  Eigen::SimplicialLDLT<SpMat, Eigen::Upper> ldlt;
  bool ok = false;
};

void factor_kkt(Factorization& f, const SpMat& P, const SpMat& C,
                const VectorXd& rho_vec, double sigma) {
  const int n = static_cast<int>(P.rows());
  const int m = static_cast<int>(C.rows());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(P.nonZeros() + C.nonZeros() + n + m);
  for (int k = 0; k < P.outerSize(); ++k)
    for (SpMat::InnerIterator it(P, k); it; ++it)
      if (it.row() <= it.col())
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
  for (int j = 0; j < n; ++j) trips.emplace_back(j, j, sigma);
  for (int k = 0; k < C.outerSize(); ++k)
    for (SpMat::InnerIterator it(C, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.col()),
                         n + static_cast<int>(it.row()), it.value());
  for (int i = 0; i < m; ++i) trips.emplace_back(n + i, n + i, -1.0 / rho_vec[i]);

  SpMat kkt(n + m, n + m);
  kkt.setFromTriplets(trips.begin(), trips.end());
  kkt.makeCompressed();
  f.ldlt.compute(kkt);
  f.ok = f.ldlt.info() == Eigen::Success;
}

/// Equality-constrained refit on one candidate active set, with
/// regularization and iterative refinement.
bool polish_once(const QuadraticProgram& qp, const Stacked& st,
                 const std::vector<int>& active, VectorXd& x, VectorXd& y) {
  const int n = qp.num_vars();
  const int ma = static_cast<int>(active.size());

  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < qp.P.outerSize(); ++k)
    for (SpMat::InnerIterator it(qp.P, k); it; ++it)
      if (it.row() <= it.col())
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
  constexpr double delta = 1e-9;
  for (int j = 0; j < n; ++j) trips.emplace_back(j, j, delta);
  // rows of C restricted to the active set
  std::vector<int> row_slot(st.C.rows(), -1);
  for (int a = 0; a < ma; ++a) row_slot[active[a]] = a;
  for (int k = 0; k < st.C.outerSize(); ++k)
    for (SpMat::InnerIterator it(st.C, k); it; ++it) {
      const int slot = row_slot[it.row()];
      if (slot >= 0)
        trips.emplace_back(static_cast<int>(it.col()), n + slot, it.value());
    }
  for (int a = 0; a < ma; ++a) trips.emplace_back(n + a, n + a, -delta);

  SpMat kkt(n + ma, n + ma);
  kkt.setFromTriplets(trips.begin(), trips.end());
  kkt.makeCompressed();
  Eigen::SimplicialLDLT<SpMat, Eigen::Upper> ldlt(kkt);
  if (ldlt.info() != Eigen::Success) return false;

  VectorXd rhs(n + ma);
  rhs.head(n) = -qp.c;
  for (int a = 0; a < ma; ++a)
    rhs[n + a] = active[a] < st.m_eq ? st.lo[active[a]] : st.up[active[a]];

  VectorXd sol = ldlt.solve(rhs);
  // refinement against the unregularized system
  for (int it_ref = 0; it_ref < 3; ++it_ref) {
    VectorXd resid = rhs;
    VectorXd xs = sol.head(n), ys = sol.tail(ma);
    VectorXd Px = qp.P * xs;
    VectorXd Cta = VectorXd::Zero(n);
    VectorXd Ca_x = VectorXd::Zero(ma);
    for (int k = 0; k < st.C.outerSize(); ++k)
      for (SpMat::InnerIterator it(st.C, k); it; ++it) {
        const int slot = row_slot[it.row()];
        if (slot >= 0) {
          Cta[it.col()] += it.value() * ys[slot];
          Ca_x[slot] += it.value() * xs[it.col()];
        }
      }
    resid.head(n) -= Px + Cta;
    resid.tail(ma) -= Ca_x;
    sol += ldlt.solve(resid);
  }

  if (!sol.allFinite()) return false;
  x = sol.head(n);
  y = VectorXd::Zero(st.C.rows());
  for (int a = 0; a < ma; ++a) y[active[a]] = sol[n + a];
  return true;
}

/// Refits on the active set guessed from the dual signs; inequality rows
/// whose refit multiplier comes out negative are dropped and the refit is
/// repeated, so the polished point is a genuine KKT point.
bool polish(const QuadraticProgram& qp, const Stacked& st, VectorXd& x,
            VectorXd& y) {
  std::vector<int> active;
  for (int i = 0; i < st.C.rows(); ++i)
    if (i < st.m_eq || y[i] > 0) active.push_back(i);

  for (int round = 0; round < 8; ++round) {
    VectorXd x_pol, y_pol;
    if (!polish_once(qp, st, active, x_pol, y_pol)) return false;
    int worst = -1;
    double worst_mult = -1e-9;
    for (int i : active)
      if (i >= st.m_eq && y_pol[i] < worst_mult) {
        worst_mult = y_pol[i];
        worst = i;
      }
    if (worst < 0) {
      x = x_pol;
      y = y_pol;
      return true;
    }
    active.erase(std::find(active.begin(), active.end(), worst));
  }
  return false;
}

VectorXd probe_violation(const QuadraticProgram& qp, const VectorXd& x) {
  VectorXd v(2);
  v[0] = qp.num_eq() ? inf_norm(qp.A * x - qp.b) : 0.0;
  v[1] = qp.num_in() ? (qp.G * x - qp.h).cwiseMax(0.0).maxCoeff() : 0.0;
  return v;
}

}  // namespace

QuadraticProgram QuadraticProgram::from_dense(const MatrixXd& P, const VectorXd& c,
                                              const MatrixXd& A, const VectorXd& b,
                                              const MatrixXd& G, const VectorXd& h) {
  QuadraticProgram qp;
  qp.P = sparse_from_dense(P);
  qp.c = c;
  qp.A = A.size() ? sparse_from_dense(A) : SpMat(0, c.size());
  qp.b = b;
  qp.G = G.size() ? sparse_from_dense(G) : SpMat(0, c.size());
  qp.h = h;
  return qp;
}

QpSolution solve(const QuadraticProgram& qp, const QpConfig& cfg,
                 const VectorXd* warm_x) {
  const int n = qp.num_vars();
  Stacked st = stack_constraints(qp);
  const int m = static_cast<int>(st.C.rows());

  QpSolution sol;
  sol.x = VectorXd::Zero(n);
  sol.y = VectorXd::Zero(m);

  if (n == 0) {
    sol.status = QpStatus::Optimal;
    sol.primal_residual = sol.dual_residual = 0.0;
    return sol;
  }

  // scaled copies
  SpMat Ps = qp.P;
  VectorXd cs = qp.c;
  SpMat Cs = st.C;
  VectorXd lo = st.lo, up = st.up;
  Scaling sc = ruiz_equilibrate(Ps, cs, Cs, lo, up, cfg.scaling_iters);

  VectorXd rho_vec(m);
  for (int i = 0; i < m; ++i)
    rho_vec[i] = std::clamp(i < st.m_eq ? cfg.rho * 1e3 : cfg.rho, 1e-6, 1e6);

  Factorization fac;
  double sigma = cfg.sigma;
  for (int attempt = 0; attempt < 3 && !fac.ok; ++attempt) {
    factor_kkt(fac, Ps, Cs, rho_vec, sigma);
    if (!fac.ok) sigma *= 100;
  }
  if (!fac.ok) {
    sol.status = QpStatus::MaxIterations;
    return sol;
  }

  VectorXd xs = warm_x ? VectorXd(sc.d.cwiseInverse().cwiseProduct(*warm_x))
                       : VectorXd::Zero(n);
  VectorXd zs = m ? VectorXd(Cs * xs) : VectorXd();
  for (int i = 0; i < m; ++i) zs[i] = std::clamp(zs[i], lo[i], up[i]);
  VectorXd ys = VectorXd::Zero(m);

  VectorXd rhs(n + m), tilde(n + m);
  Residuals res;
  bool probe_done = false;
  int iter = 0;
  for (iter = 1; iter <= cfg.max_iter; ++iter) {
    rhs.head(n) = sigma * xs - cs;
    for (int i = 0; i < m; ++i) rhs[n + i] = zs[i] - ys[i] / rho_vec[i];
    tilde = fac.ldlt.solve(rhs);

    const auto x_t = tilde.head(n);
    VectorXd z_t(m);
    for (int i = 0; i < m; ++i)
      z_t[i] = zs[i] + (tilde[n + i] - ys[i]) / rho_vec[i];

    VectorXd x_next = cfg.alpha * x_t + (1 - cfg.alpha) * xs;
    VectorXd z_relaxed = cfg.alpha * z_t + (1 - cfg.alpha) * zs;
    VectorXd z_next(m), y_next(m);
    for (int i = 0; i < m; ++i) {
      const double raw = z_relaxed[i] + ys[i] / rho_vec[i];
      z_next[i] = std::clamp(raw, lo[i], up[i]);
      y_next[i] = ys[i] + rho_vec[i] * (z_relaxed[i] - z_next[i]);
    }

    const VectorXd dy = y_next - ys;
    xs = x_next;
    zs = z_next;
    ys = y_next;

    if (iter % cfg.check_interval == 0 || iter == cfg.max_iter) {
      sol.x = sc.d.cwiseProduct(xs);
      sol.y = sc.e.cwiseProduct(ys) / sc.gamma;
      res = compute_residuals(qp, st, sol.x, sol.y, cfg);
      if (res.converged(cfg.eps_abs, cfg.eps_rel)) {
        sol.status = QpStatus::Optimal;
        break;
      }
      if (!probe_done &&
          primal_infeasibility_certificate(st, sc.e.cwiseProduct(dy), 1e-8)) {
        probe_done = true;
        if (infeasibility_probe(qp, cfg.infeas_tol)) {
          sol.status = QpStatus::PrimalInfeasible;
          sol.iterations = iter;
          sol.primal_residual = res.prim;
          sol.dual_residual = res.dual;
          return sol;
        }
      }
    }
  }

  sol.iterations = std::min(iter, cfg.max_iter);
  sol.x = sc.d.cwiseProduct(xs);
  sol.y = sc.e.cwiseProduct(ys) / sc.gamma;

  if (sol.status != QpStatus::Optimal) {
    res = compute_residuals(qp, st, sol.x, sol.y, cfg);
    if (res.converged(cfg.eps_abs, cfg.eps_rel)) {
      sol.status = QpStatus::Optimal;
    } else if (infeasibility_probe(qp, cfg.infeas_tol)) {
      sol.status = QpStatus::PrimalInfeasible;
      sol.primal_residual = res.prim;
      sol.dual_residual = res.dual;
      return sol;
    } else {
      sol.status = QpStatus::MaxIterations;
    }
  }

  if (cfg.polish && sol.status == QpStatus::Optimal) {
    VectorXd x_pol = sol.x, y_pol = sol.y;
    if (polish(qp, st, x_pol, y_pol)) {
      const Residuals rp = compute_residuals(qp, st, x_pol, y_pol, cfg);
      if (std::max(rp.prim, rp.dual) <= std::max(res.prim, res.dual)) {
        sol.x = x_pol;
        sol.y = y_pol;
        res = rp;
        sol.polished = true;
      }
    }
  }

  sol.primal_residual = res.prim;
  sol.dual_residual = res.dual;
  sol.objective = 0.5 * sol.x.dot(qp.P * sol.x) + qp.c.dot(sol.x);
  return sol;
}

bool infeasibility_probe(const QuadraticProgram& qp, double tol) {
  const int n = qp.num_vars();
  const int mi = qp.num_in();

  // Phase I: min ||Ax - b||^2 + ||s||^2  s.t.  Gx - s <= h, s >= 0
  std::vector<Eigen::Triplet<double>> pt, gt;
  SpMat AtA(n, n);
  if (qp.num_eq()) AtA = SpMat(qp.A.transpose() * qp.A);
  for (int k = 0; k < AtA.outerSize(); ++k)
    for (SpMat::InnerIterator it(AtA, k); it; ++it)
      pt.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                      2.0 * it.value());
  for (int i = 0; i < mi; ++i) pt.emplace_back(n + i, n + i, 2.0);

  QuadraticProgram probe;
  probe.P.resize(n + mi, n + mi);
  probe.P.setFromTriplets(pt.begin(), pt.end());
  probe.c = VectorXd::Zero(n + mi);
  if (qp.num_eq()) probe.c.head(n) = -2.0 * (qp.A.transpose() * qp.b);
  probe.A.resize(0, n + mi);
  probe.b.resize(0);

  for (int k = 0; k < qp.G.outerSize(); ++k)
    for (SpMat::InnerIterator it(qp.G, k); it; ++it)
      gt.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                      it.value());
  for (int i = 0; i < mi; ++i) {
    gt.emplace_back(i, n + i, -1.0);      // Gx - s <= h
    gt.emplace_back(mi + i, n + i, -1.0); // -s <= 0
  }
  probe.G.resize(2 * mi, n + mi);
  probe.G.setFromTriplets(gt.begin(), gt.end());
  probe.h.resize(2 * mi);
  probe.h.head(mi) = qp.h;
  probe.h.tail(mi).setZero();

  QpConfig cfg;
  cfg.eps_abs = cfg.eps_rel = 1e-8;
  QpSolution s = solve(probe, cfg);
  const VectorXd v = probe_violation(qp, s.x.head(n));
  return v.maxCoeff() > tol;
}

}  // namespace cmp
