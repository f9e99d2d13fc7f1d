#pragma once

// Test-only oracle: exhaustive active-set enumeration for small dense QPs.
// Independent of the ADMM solve path it is used to check.

#include <Eigen/Dense>

#include <limits>
#include <optional>

namespace qp_oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Result {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  VectorXd x;
};

/// min 1/2 x'Px + c'x s.t. Ax = b, Gx <= h, with P positive definite.
/// Tries every subset of inequality rows as the active set, solves the
/// equality-constrained KKT system, and keeps the best point that is primal
/// feasible with nonnegative inequality multipliers.
inline Result enumerate(const MatrixXd& P, const VectorXd& c, const MatrixXd& A,
                        const VectorXd& b, const MatrixXd& G, const VectorXd& h) {
  const int n = static_cast<int>(c.size());
  const int me = static_cast<int>(b.size());
  const int mi = static_cast<int>(h.size());
  constexpr double tol = 1e-8;

  Result best;
  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < mi; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const int ma = me + static_cast<int>(act.size());

    MatrixXd K = MatrixXd::Zero(n + ma, n + ma);
    VectorXd rhs(n + ma);
    K.topLeftCorner(n, n) = P;
    rhs.head(n) = -c;
    if (me) {
      K.block(n, 0, me, n) = A;
      K.block(0, n, n, me) = A.transpose();
      rhs.segment(n, me) = b;
    }
    for (size_t k = 0; k < act.size(); ++k) {
      K.block(n + me + k, 0, 1, n) = G.row(act[k]);
      K.block(0, n + me + k, n, 1) = G.row(act[k]).transpose();
      rhs[n + me + static_cast<int>(k)] = h[act[k]];
    }

    Eigen::FullPivLU<MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const VectorXd sol = lu.solve(rhs);
    const VectorXd x = sol.head(n);

    bool ok = true;
    if (me && (A * x - b).cwiseAbs().maxCoeff() > tol) ok = false;
    if (ok && mi && (G * x - h).maxCoeff() > tol) ok = false;
    for (size_t k = 0; ok && k < act.size(); ++k)
      if (sol[n + me + static_cast<int>(k)] < -tol) ok = false;
    if (!ok) continue;

    const double obj = 0.5 * x.dot(P * x) + c.dot(x);
    if (obj < best.objective) {
      best.feasible = true;
      best.objective = obj;
      best.x = x;
    }
  }
  return best;
}

}  // namespace qp_oracle
