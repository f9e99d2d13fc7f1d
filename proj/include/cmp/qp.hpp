#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <limits>

namespace cmp {

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// min 1/2 x'Px + c'x  s.t.  A x = b,  G x <= h
struct QuadraticProgram {
  SpMat P;  // n x n symmetric PSD
  VectorXd c;
  SpMat A;  // m_eq x n
  VectorXd b;
  SpMat G;  // m_in x n
  VectorXd h;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_eq() const { return static_cast<int>(b.size()); }
  int num_in() const { return static_cast<int>(h.size()); }

  static QuadraticProgram from_dense(const MatrixXd& P, const VectorXd& c,
                                     const MatrixXd& A, const VectorXd& b,
                                     const MatrixXd& G, const VectorXd& h);
};

enum class QpStatus { Optimal, PrimalInfeasible, MaxIterations };

struct QpConfig {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iter = 4000;
  double rho = 0.1;       // ADMM step; equality rows are weighted 1e3 stiffer
  double sigma = 1e-6;    // proximal regularization
  double alpha = 1.6;     // over-relaxation
  int scaling_iters = 10; // Ruiz equilibration passes
  int check_interval = 25;
  bool polish = true;
  double infeas_tol = 1e-6;
};

struct QpSolution {
  VectorXd x;
  VectorXd y;  // multipliers for stacked [A; G] rows
  QpStatus status = QpStatus::MaxIterations;
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double objective = 0.0;
  bool polished = false;
};

/// Operator-splitting solve. Deterministic: fixed iteration order, a single
/// KKT factorization, no randomized pivoting. Infeasibility is decided by
/// the Phase-I probe (divergence certificates only trigger the probe early).
QpSolution solve(const QuadraticProgram& qp, const QpConfig& cfg = {},
                 const VectorXd* warm_x = nullptr);

/// True iff the constraint system {Ax = b, Gx <= h} has optimal Phase-I
/// violation above tol.
bool infeasibility_probe(const QuadraticProgram& qp, double tol = 1e-6);

}  // namespace cmp
