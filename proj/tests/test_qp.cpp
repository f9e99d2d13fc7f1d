#include "cmp/qp.hpp"

#include "cmp/scene.hpp"  // uniform_real
#include "qp_oracle.hpp"

#include <doctest.h>

#include <random>

using namespace cmp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

/// Random strictly convex QP with a known feasible point.
QuadraticProgram random_qp(std::mt19937_64& rng, int n, int me, int mi,
                           MatrixXd* Pd = nullptr, MatrixXd* Ad = nullptr,
                           MatrixXd* Gd = nullptr) {
  MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = uniform_real(rng, -1, 1);
  MatrixXd P = M.transpose() * M + 0.2 * MatrixXd::Identity(n, n);
  VectorXd c(n);
  for (int i = 0; i < n; ++i) c[i] = uniform_real(rng, -1, 1);

  VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0[i] = uniform_real(rng, -1, 1);

  MatrixXd A(me, n), G(mi, n);
  for (int i = 0; i < me; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = uniform_real(rng, -1, 1);
  for (int i = 0; i < mi; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = uniform_real(rng, -1, 1);
  VectorXd b = me ? VectorXd(A * x0) : VectorXd(0);
  VectorXd h(mi);
  for (int i = 0; i < mi; ++i) h[i] = (G.row(i) * x0)(0) + uniform_real(rng, 0.0, 1.0);

  if (Pd) *Pd = P;
  if (Ad) *Ad = A;
  if (Gd) *Gd = G;
  return QuadraticProgram::from_dense(P, c, A, b, G, h);
}

}  // namespace

TEST_CASE("scalar QP with an active bound") {
  // min x^2 s.t. x >= 1
  MatrixXd P(1, 1), G(1, 1);
  P << 2.0;
  G << -1.0;
  VectorXd c = VectorXd::Zero(1), h(1);
  h << -1.0;
  const auto sol = solve(QuadraticProgram::from_dense(P, c, MatrixXd(), VectorXd(), G, h));
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("symmetric simplex projection") {
  // min ||x||^2 s.t. sum x = 1 in R^2
  MatrixXd P = 2.0 * MatrixXd::Identity(2, 2);
  MatrixXd A(1, 2);
  A << 1, 1;
  VectorXd b(1);
  b << 1;
  const auto sol = solve(
      QuadraticProgram::from_dense(P, VectorXd::Zero(2), A, b, MatrixXd(), VectorXd()));
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(sol.x[1] == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("50 random QPs match the active-set enumeration oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 7);
    const int me = static_cast<int>(rng() % std::min(3, n));
    const int mi = 1 + static_cast<int>(rng() % 8);
    MatrixXd P, A, G;
    const QuadraticProgram qp = random_qp(rng, n, me, mi, &P, &A, &G);

    const auto oracle = qp_oracle::enumerate(P, qp.c, A, qp.b, G, qp.h);
    REQUIRE(oracle.feasible);

    const auto sol = solve(qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(std::abs(sol.objective - oracle.objective) <=
          1e-5 * (1.0 + std::abs(oracle.objective)));
  }
}

TEST_CASE("solution certificates: residuals and complementary slackness") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 5);
    const QuadraticProgram qp = random_qp(rng, n, 1, 5);
    const auto sol = solve(qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(sol.primal_residual <= 1e-6 + 1e-9);
    CHECK((qp.A * sol.x - qp.b).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((qp.G * sol.x - qp.h).maxCoeff() <= 1e-6);
    // |(Gx - h)_i * mu_i| small for recovered multipliers
    const VectorXd slack = qp.G * sol.x - qp.h;
    for (int i = 0; i < slack.size(); ++i)
      CHECK(std::abs(slack[i] * sol.y[qp.num_eq() + i]) <= 1e-5);
  }
}

TEST_CASE("cost scaling leaves the argmin unchanged") {
  VectorXd reference;
  for (double lambda : {0.037, 1.0, 250.0}) {
    std::mt19937_64 rng(31);  // identical instances across lambdas
    QuadraticProgram qp = random_qp(rng, 5, 1, 4);
    qp.P = SpMat(lambda * qp.P);
    qp.c *= lambda;
    const auto sol = solve(qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    if (reference.size() == 0) reference = sol.x;
    CHECK((sol.x - reference).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("deterministic: identical inputs give bitwise-identical outputs") {
  std::mt19937_64 rng(55);
  const QuadraticProgram qp = random_qp(rng, 6, 2, 6);
  const auto a = solve(qp);
  const auto b = solve(qp);
  REQUIRE(a.status == b.status);
  REQUIRE(a.x.size() == b.x.size());
  for (int i = 0; i < a.x.size(); ++i) CHECK(a.x[i] == b.x[i]);
  CHECK(a.objective == b.objective);
}

TEST_CASE("infeasibility probe") {
  // x >= 1 and x <= 0
  MatrixXd G(2, 1);
  G << -1, 1;
  VectorXd h(2);
  h << -1, 0;
  QuadraticProgram bad = QuadraticProgram::from_dense(
      2.0 * MatrixXd::Identity(1, 1), VectorXd::Zero(1), MatrixXd(), VectorXd(), G, h);
  CHECK(infeasibility_probe(bad));
  const auto sol = solve(bad);
  CHECK(sol.status == QpStatus::PrimalInfeasible);

  // consistent box
  VectorXd h2(2);
  h2 << 1, 1;
  QuadraticProgram good = QuadraticProgram::from_dense(
      2.0 * MatrixXd::Identity(1, 1), VectorXd::Zero(1), MatrixXd(), VectorXd(), G, h2);
  CHECK_FALSE(infeasibility_probe(good));
}

TEST_CASE("Coulomb bound: lateral demand beyond mu * normal capacity") {
  // One force f in R^3 must equal (10, 0, 4.905) while staying in the
  // friction pyramid |fx| <= mu fz, |fy| <= mu fz, fz >= 0 with mu = 0.8.
  const double mu = 0.8;
  MatrixXd A = MatrixXd::Identity(3, 3);
  VectorXd b(3);
  b << 10.0, 0.0, 4.905;
  MatrixXd G(5, 3);
  G << 0, 0, -1,
      1, 0, -mu,
      -1, 0, -mu,
      0, 1, -mu,
      0, -1, -mu;
  VectorXd h = VectorXd::Zero(5);
  QuadraticProgram qp = QuadraticProgram::from_dense(2.0 * MatrixXd::Identity(3, 3),
                                                     VectorXd::Zero(3), A, b, G, h);
  CHECK(infeasibility_probe(qp));  // 10 > 0.8 * 4.905
  CHECK(solve(qp).status == QpStatus::PrimalInfeasible);

  // the same system with an attainable lateral demand
  b[0] = 0.8 * 4.905 * 0.9;
  QuadraticProgram ok = QuadraticProgram::from_dense(2.0 * MatrixXd::Identity(3, 3),
                                                     VectorXd::Zero(3), A, b, G, h);
  CHECK_FALSE(infeasibility_probe(ok));
  CHECK(solve(ok).status == QpStatus::Optimal);
}

TEST_CASE("ill-conditioned cost mimicking the torque penalty scale") {
  // 2e6-weighted rank-deficient quadratic plus small regular cost, the shape
  // of the force-step objective
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 6;
    MatrixXd Mrow(2, n);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < n; ++j) Mrow(i, j) = uniform_real(rng, -0.06, 0.06);
    MatrixXd P = 2.0 * MatrixXd::Identity(n, n) + 2e6 * Mrow.transpose() * Mrow;
    VectorXd c(n);
    for (int j = 0; j < n; ++j) c[j] = uniform_real(rng, -1, 1) * 1e3;
    MatrixXd A(2, n);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = uniform_real(rng, -1, 1);
    VectorXd x0(n);
    for (int j = 0; j < n; ++j) x0[j] = uniform_real(rng, -1, 1);
    VectorXd b = A * x0;
    MatrixXd G = -MatrixXd::Identity(n, n);
    VectorXd h = -(x0.array() - 2.0).matrix();

    const QuadraticProgram qp = QuadraticProgram::from_dense(P, c, A, b, G, h);
    const auto sol = solve(qp);
    REQUIRE(sol.status == QpStatus::Optimal);
    const auto oracle = qp_oracle::enumerate(P, c, A, b, G, h);
    REQUIRE(oracle.feasible);
    CHECK(std::abs(sol.objective - oracle.objective) <=
          1e-5 * (1.0 + std::abs(oracle.objective)));
  }
}
