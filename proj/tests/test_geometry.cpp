#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "support.hpp"
#include "wkflow/dynamics.hpp"
#include "wkflow/geometry.hpp"

namespace wkflow {
namespace {

using testing::random_balanced;
using testing::random_chain;
using testing::random_density;
using testing::random_vector;

MarkovChain two_state(double p, double q) {
  MarkovChain c;
  c.K.resize(2, 2);
  c.K << 1 - p, p, q, 1 - q;
  c.pi.resize(2);
  c.pi << q / (p + q), p / (p + q);
  return c;
}

TEST(LogMean, Examples) {
  EXPECT_DOUBLE_EQ(log_mean(1.0, 1.0), 1.0);
  EXPECT_NEAR(log_mean(std::exp(1.0), 1.0), std::exp(1.0) - 1.0, 1e-14);
  EXPECT_NEAR(log_mean(4.0, 1.0), 3.0 / std::log(4.0), 1e-14);
  EXPECT_NEAR(log_mean(4.0, 1.0), 2.16404, 1e-5);
}

TEST(LogMean, DomainErrors) {
  EXPECT_THROW(log_mean(0.0, 1.0), Error);
  EXPECT_THROW(log_mean(1.0, -2.0), Error);
}

TEST(LogMean, BetweenGeometricAndArithmeticMeans) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double s = std::pow(10.0, rng.uniform(-6, 6));
    const double t = std::pow(10.0, rng.uniform(-6, 6));
    const double m = log_mean(s, t);
    EXPECT_GE(m, std::sqrt(s * t) * (1 - 1e-14));
    EXPECT_LE(m, 0.5 * (s + t) * (1 + 1e-14));
  }
}

TEST(LogMean, SmoothAcrossTheSeriesBranch) {
  // Compare with a long-double evaluation of the closed form where it is
  // still accurate, on both sides of the series cut-over.
  for (double rel : {1e-3, 1e-4, 2e-5, 1e-5, 1e-6, 1e-8, 1e-10}) {
    const double s = 2.0 * (1.0 + rel), t = 2.0;
    const long double ls = s, lt = t;
    const long double exact_ld = (ls - lt) / (std::log(ls) - std::log(lt));
    const double tol = rel > 1e-7 ? 1e-12 : 1e-8;
    EXPECT_NEAR(log_mean(s, t), static_cast<double>(exact_ld), tol * 2.0) << rel;
    EXPECT_DOUBLE_EQ(log_mean(s, t), log_mean(t, s));
  }
}

TEST(LogMean, DerivativeMatchesFiniteDifferences) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const double s = std::pow(10.0, rng.uniform(-2, 2));
    const double t = i % 5 == 0 ? s * (1 + 1e-7) : std::pow(10.0, rng.uniform(-2, 2));
    const double h = 1e-6 * s;
    const double fd = (log_mean(s + h, t) - log_mean(s - h, t)) / (2 * h);
    EXPECT_NEAR(log_mean_d1(s, t), fd, 1e-6 * (1 + std::abs(fd)));
  }
  EXPECT_NEAR(log_mean_d1(3.0, 3.0), 0.5, 1e-15);
}

TEST(Mobility, UniformDensityGivesPiWeightedLaplacian) {
  Rng rng(3);
  const auto chain = random_chain(rng, 7);
  const auto mob = mobility(chain, uniform_density(7));
  EXPECT_LE((mob.theta.array() - 1.0).abs().maxCoeff(), 1e-15);
  const Matrix W = chain.pi.asDiagonal() * chain.K;
  const Matrix L = Matrix(W.rowwise().sum().asDiagonal()) - W;
  Matrix M = mob.M;
  // The diagonal of K contributes nothing to a Laplacian.
  EXPECT_LE((M - L).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Mobility, TwoStateTheta) {
  const auto chain = two_state(0.3, 0.6);
  // pi = [2/3, 1/3]; rho_a = 1.2 forces rho_b = 0.6.
  Density rho{Vector(2)};
  rho.rho << 1.2, 0.6;
  check_density(rho, chain.pi);
  const auto mob = mobility(chain, rho);
  EXPECT_DOUBLE_EQ(mob.theta(0, 1), log_mean(1.2, 0.6));
  EXPECT_DOUBLE_EQ(mob.theta(1, 0), log_mean(1.2, 0.6));
}

TEST(Mobility, StructuralInvariants) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(10));
    const auto chain = random_chain(rng, n);
    const auto rho = random_density(rng, chain.pi, 2.0);
    const auto mob = mobility(chain, rho);
    EXPECT_LE((mob.theta - mob.theta.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((mob.M - mob.M.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((mob.M * Vector::Ones(n)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((mob.A * Vector::Ones(n)).cwiseAbs().maxCoeff(), 1e-12);
    // A = -diag(pi)^{-1} M.
    const Matrix expect = -(chain.pi.cwiseInverse().asDiagonal() * mob.M);
    EXPECT_LE((mob.A - expect).cwiseAbs().maxCoeff(), 1e-10 * (1 + mob.A.cwiseAbs().maxCoeff()));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(mob.M);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(Calculus, GradientExamples) {
  const auto zero = discrete_gradient(Vector::Constant(4, 2.5));
  EXPECT_EQ(zero.phi.cwiseAbs().maxCoeff(), 0.0);
  Vector psi(2);
  psi << 1, 0;
  const auto g = discrete_gradient(psi);
  Matrix expect(2, 2);
  expect << 0, 1, -1, 0;
  EXPECT_EQ(g.phi, expect);
  Rng rng(5);
  const auto r = discrete_gradient(random_vector(rng, 9));
  EXPECT_EQ((r.phi + r.phi.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Calculus, DivergenceOfSymmetricFieldVanishes) {
  Rng rng(6);
  const auto chain = random_chain(rng, 6);
  EXPECT_EQ(discrete_divergence(chain, EdgeField{Matrix::Zero(6, 6)}).cwiseAbs().maxCoeff(), 0.0);
  Matrix s = Matrix::Random(6, 6);
  s = Matrix(s + s.transpose());
  EXPECT_LE(discrete_divergence(chain, EdgeField{s}).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Calculus, IntegrationByParts) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(10));
    const auto chain = random_chain(rng, n);
    const Vector psi = random_vector(rng, n);
    EdgeField phi{Matrix(n, n)};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) phi.phi(i, j) = rng.uniform(-1, 1);
    const double lhs = inner_pi_edges(discrete_gradient(psi), phi, chain);
    const double rhs = -inner_pi(psi, discrete_divergence(chain, phi), chain.pi);
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(InnerProducts, Examples) {
  Rng rng(8);
  const auto chain = random_chain(rng, 5);
  EXPECT_NEAR(inner_pi(Vector::Ones(5), Vector::Ones(5), chain.pi), 1.0, 1e-15);
  const auto rho = random_density(rng, chain.pi);
  const auto any = discrete_gradient(random_vector(rng, 5));
  EXPECT_EQ(inner_rho(EdgeField{Matrix::Zero(5, 5)}, any, chain, rho), 0.0);

  const Vector psi = random_vector(rng, 5);
  const auto g = discrete_gradient(psi);
  const auto mob = mobility(chain, uniform_density(5));
  EXPECT_NEAR(inner_rho(g, g, chain, uniform_density(5)), psi.dot(mob.M * psi), 1e-13);
  // Also at a non-uniform density the quadratic form is psi^T M(rho) psi.
  const auto mob_rho = mobility(chain, rho);
  EXPECT_NEAR(inner_rho(g, g, chain, rho), psi.dot(mob_rho.M * psi), 1e-12);
}

TEST(Cholesky, FactorsAndSolves) {
  Rng rng(9);
  Matrix a = Matrix::Random(6, 6);
  a = a * a.transpose() + Matrix::Identity(6, 6);
  const Matrix L = cholesky_lower(a);
  EXPECT_LE((L * L.transpose() - a).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix b = Matrix::Random(6, 3);
  const Matrix x = cholesky_solve(L, b);
  EXPECT_LE((a * x - b).cwiseAbs().maxCoeff(), 1e-12);
  Matrix bad = Matrix::Identity(3, 3);
  bad(1, 1) = -1.0;
  try {
    cholesky_lower(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
    EXPECT_NE(std::string(e.what()).find("pivot 1"), std::string::npos) << e.what();
  }
}

TEST(Continuity, ZeroRateGivesZeroPotential) {
  Rng rng(10);
  const auto chain = random_chain(rng, 6);
  const auto rho = random_density(rng, chain.pi);
  const auto sol = solve_continuity_potential(chain, rho, Vector::Zero(6));
  EXPECT_LE(sol.psi.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Continuity, RejectsUnbalancedRate) {
  Rng rng(11);
  const auto chain = random_chain(rng, 5);
  try {
    solve_continuity_potential(chain, uniform_density(5), Vector::Ones(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
}

TEST(Continuity, HeatDirectionGivesMinusLogDensity) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(14));
    const auto chain = random_chain(rng, n);
    const auto rho = random_density(rng, chain.pi);
    const Vector rho_dot = (chain.K - Matrix::Identity(n, n)) * rho.rho;
    const auto sol = solve_continuity_potential(chain, rho, rho_dot);
    const Vector expect = -rho.rho.array().log();
    const Matrix diff = discrete_gradient(sol.psi).phi - discrete_gradient(expect).phi;
    EXPECT_LE(diff.cwiseAbs().maxCoeff(), 1e-8) << "n=" << n;
    EXPECT_EQ(sol.psi(sol.pin), 0.0);
  }
}

TEST(Continuity, KktResiduals) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(10));
    const auto chain = random_chain(rng, n);
    const auto rho = random_density(rng, chain.pi, 0.5);
    const Vector rho_dot = random_balanced(rng, chain.pi);
    ContinuityOptions opts;
    opts.pin = static_cast<int>(rng.below(n));
    const auto sol = solve_continuity_potential(chain, rho, rho_dot, opts);
    EXPECT_LE(sol.constraint_residual, 1e-8);
    EXPECT_LE(sol.stationarity_residual, 1e-8);
    EXPECT_EQ(sol.psi(opts.pin), 0.0);
    // Independent check of the constraint with freshly assembled matrices.
    const auto mob = mobility(chain, rho);
    EXPECT_LE((mob.A * sol.psi + rho_dot).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Continuity, OperatorHasCorankOne) {
  // The feasible set is the solution plus constants, which is why a single
  // gauge row makes the constrained problem uniquely solvable.
  Rng rng(14);
  const auto chain = random_chain(rng, 6);
  const auto rho = random_density(rng, chain.pi);
  const auto mob = mobility(chain, rho);
  Eigen::FullPivLU<Matrix> lu(mob.A);
  EXPECT_EQ(lu.rank(), 5);
}

TEST(Geodesic, IdenticalDensitiesGiveZeroVelocity) {
  Rng rng(15);
  const auto chain = random_chain(rng, 5);
  const auto rho = random_density(rng, chain.pi);
  const auto v = geodesic_velocity(chain, rho, rho, 0.1);
  EXPECT_LE(v.velocity.phi.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Geodesic, HeatStepIsFirstOrder) {
  Rng rng(16);
  const auto chain = random_chain(rng, 6);
  const auto rho = random_density(rng, chain.pi);
  const Matrix expect = discrete_gradient(-Vector(rho.rho.array().log())).phi;
  double previous = 0.0;
  for (double delta : {1e-2, 1e-3}) {
    const auto traj = heat_flow(chain, rho, {0.0, delta});
    const auto v = geodesic_velocity(chain, rho, traj.densities[1], delta);
    const double err = (v.velocity.phi - delta * expect).cwiseAbs().maxCoeff() /
                       (delta * expect.cwiseAbs().maxCoeff());
    EXPECT_LT(err, 5.0 * delta);
    if (previous > 0.0) EXPECT_LT(err, 0.2 * previous);
    previous = err;
  }
}

// Two states: with r = rho_a, the metric is ds^2 = pi_a dr^2 / (K_ab m(r)), so
// the unit-time geodesic has constant speed L = int sqrt(pi_a / (K_ab m)) dr and
// initial rate r'(0) = L sqrt(K_ab m(r0) / pi_a).
double two_state_initial_velocity(const MarkovChain& c, double r0, double r1) {
  const double pa = c.pi(0), pb = c.pi(1), kab = c.K(0, 1);
  auto integrand = [&](double r) {
    return std::sqrt(pa / (kab * log_mean(r, (1.0 - pa * r) / pb)));
  };
  // Composite Simpson.
  const int N = 20000;
  const double h = (r1 - r0) / N;
  double sum = integrand(r0) + integrand(r1);
  for (int i = 1; i < N; ++i) sum += (i % 2 ? 4.0 : 2.0) * integrand(r0 + i * h);
  const double length = sum * h / 3.0;
  const double m0 = log_mean(r0, (1.0 - pa * r0) / pb);
  const double rdot = length * std::sqrt(kab * m0 / pa);
  return rdot / (kab * m0);  // psi_a - psi_b
}

TEST(Geodesic, TwoStateShootingMatchesArclengthOracle) {
  const auto chain = two_state(0.3, 0.6);
  for (auto [a0, a1] : {std::pair{1.2, 0.6}, std::pair{0.9, 1.3}, std::pair{0.5, 1.1}}) {
    Density from{Vector(2)}, to{Vector(2)};
    from.rho << a0, (1 - chain.pi(0) * a0) / chain.pi(1);
    to.rho << a1, (1 - chain.pi(0) * a1) / chain.pi(1);
    GeodesicOptions opts;
    opts.mode = VelocityMode::kShooting;
    opts.shooting_steps = 256;
    const auto v = geodesic_velocity(chain, from, to, 1.0, opts);
    const double oracle = two_state_initial_velocity(chain, a0, a1);
    EXPECT_NEAR(v.velocity.phi(0, 1), oracle, 0.05 * std::abs(oracle)) << a0 << "->" << a1;
    // The single-step estimate is close for nearby pairs only.
    const auto single = geodesic_velocity(chain, from, to, 1.0);
    EXPECT_NEAR(single.velocity.phi(0, 1), oracle, 0.5 * std::abs(oracle));
  }
}

TEST(Shoot, ZeroPotentialIsStationary) {
  Rng rng(17);
  const auto chain = random_chain(rng, 5);
  const auto rho = random_density(rng, chain.pi);
  const auto path = geodesic_shoot(chain, rho, Vector::Zero(5), 20, 1.0);
  ASSERT_EQ(path.size(), 21u);
  EXPECT_LE((path.back().rho.rho - rho.rho).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Shoot, ConservesMassAndRoundTrips) {
  Rng rng(18);
  for (int n : {2, 3}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto chain = random_chain(rng, n);
      const auto rho0 = random_density(rng, chain.pi, 0.15);
      const auto rho1 = random_density(rng, chain.pi, 0.15);
      const auto v = geodesic_velocity(chain, rho0, rho1, 1.0);
      const auto path = geodesic_shoot(chain, rho0, v.psi, 100, 1.0);
      for (const auto& pt : path) EXPECT_NEAR(pt.rho.rho.dot(chain.pi), 1.0, 1e-8);
      const Vector p = path.back().rho.probabilities(chain.pi);
      const Vector q = rho1.probabilities(chain.pi);
      const double h = std::sqrt(0.5 * (p.array().sqrt() - q.array().sqrt()).square().sum());
      EXPECT_LT(h, 0.05);
    }
  }
}

TEST(Shoot, LeavingTheSimplexNamesTheStep) {
  const auto chain = two_state(0.5, 0.5);
  Density rho{Vector(2)};
  rho.rho << 1.0, 1.0;
  Vector psi(2);
  psi << 50.0, 0.0;
  try {
    geodesic_shoot(chain, rho, psi, 100, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Action, ConstantPathAndSingleStep) {
  Rng rng(19);
  const auto chain = random_chain(rng, 4);
  const auto rho = random_density(rng, chain.pi);
  std::vector<GeodesicPoint> still{{rho, Vector::Zero(4)}, {rho, Vector::Zero(4)}};
  EXPECT_EQ(wk_action(chain, still, 0.1), 0.0);

  const auto rho1 = random_density(rng, chain.pi, 0.01);
  const double dt = 0.5;
  const auto v = geodesic_velocity(chain, rho, rho1, dt, {});
  // psi solves A psi = -(rho1 - rho), so over a step of length dt the rate is psi/dt.
  const Vector psi = v.psi / dt;
  std::vector<GeodesicPoint> step{{rho, psi}, {rho1, psi}};
  const auto g = discrete_gradient(psi);
  EXPECT_NEAR(wk_action(chain, step, dt), dt * inner_rho(g, g, chain, rho), 1e-12);
}

TEST(Action, InconsistentPathIsRejected) {
  Rng rng(20);
  const auto chain = random_chain(rng, 4);
  const auto a = random_density(rng, chain.pi);
  const auto b = random_density(rng, chain.pi);
  std::vector<GeodesicPoint> path{{a, Vector::Zero(4)}, {b, Vector::Zero(4)}};
  EXPECT_THROW(wk_action(chain, path, 0.1), Error);
}

TEST(Action, HeatPathActionDecreasesUnderRefinement) {
  const auto chain = two_state(0.3, 0.6);
  const Density rho0 = two_point_density(0.3, 0.6, 0.8);
  double previous = std::numeric_limits<double>::infinity();
  for (int steps : {4, 8, 16, 32, 64}) {
    const double dt = 1.0 / steps;
    const auto traj = heat_flow(chain, rho0, uniform_grid(1.0, steps));
    std::vector<GeodesicPoint> path;
    for (int k = 0; k <= steps; ++k) {
      const auto& r = traj.densities[k];
      // Exact heat velocity: psi = -log rho.
      path.push_back({r, -Vector(r.rho.array().log())});
    }
    const double action = wk_action(chain, path, dt, 0.5);
    EXPECT_LT(action, previous) << steps;
    previous = action;
  }
}

}  // namespace
}  // namespace wkflow
