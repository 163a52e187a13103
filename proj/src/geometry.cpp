#include "wkflow/geometry.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace wkflow {

void check_density(const Density& d, const Vector& pi, double tol) {
  if (d.rho.size() != pi.size())
    fail(ErrorKind::kShape, "density and pi have different lengths");
  for (Eigen::Index i = 0; i < d.rho.size(); ++i) {
    if (!(d.rho(i) > 0.0) || !std::isfinite(d.rho(i)))
      fail(ErrorKind::kDomain,
           "density is not strictly positive at state " + std::to_string(i));
  }
  const double mass = d.rho.dot(pi);
  if (std::abs(mass - 1.0) > tol) {
    std::ostringstream os;
    os << "density has pi-mass " << mass << ", expected 1";
    fail(ErrorKind::kDomain, os.str());
  }
}

Density density_from_probabilities(const Vector& p, const Vector& pi) {
  if (p.size() != pi.size())
    fail(ErrorKind::kShape, "probability vector and pi have different lengths");
  return Density{p.cwiseQuotient(pi)};
}

Density uniform_density(int n) { return Density{Vector::Ones(n)}; }

int clip_and_renormalize(Vector& rho, const Vector& pi, double floor) {
  int clipped = 0;
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    if (!(rho(i) >= floor)) {
      rho(i) = floor;
      ++clipped;
    }
  }
  rho /= rho.dot(pi);
  return clipped;
}

double log_mean(double s, double t) {
  if (!(s > 0.0) || !(t > 0.0))
    fail(ErrorKind::kDomain, "log_mean requires strictly positive arguments");
  if (s == t) return s;
  // With a = (s + t)/2 and delta = (s - t)/(s + t):
  //   log s - log t = 2 atanh(delta),  m = a delta / atanh(delta).
  const double a = 0.5 * (s + t);
  const double delta = (s - t) / (s + t);
  if (std::abs(delta) < 1e-4) {
    const double d2 = delta * delta;
    return a * (1.0 - d2 / 3.0 - 4.0 * d2 * d2 / 45.0);
  }
  return a * delta / std::atanh(delta);
}

double log_mean_d1(double s, double t) {
  if (!(s > 0.0) || !(t > 0.0))
    fail(ErrorKind::kDomain, "log_mean_d1 requires strictly positive arguments");
  // With u = log(s/t): d m / d s = (u - 1 + e^{-u}) / u^2.
  const double u = std::log(s / t);
  if (std::abs(u) < 1e-3)
    return 0.5 - u / 6.0 + u * u / 24.0 - u * u * u / 120.0;
  return (u + std::expm1(-u)) / (u * u);
}

MobilityMatrices mobility(const MarkovChain& chain, const Density& rho) {
  const int n = chain.n();
  if (rho.n() != n) fail(ErrorKind::kShape, "density length does not match chain");
  MobilityMatrices m;
  m.theta.resize(n, n);
  for (int i = 0; i < n; ++i) {
    m.theta(i, i) = rho.rho(i);
    for (int j = i + 1; j < n; ++j) {
      const double v = log_mean(rho.rho(i), rho.rho(j));
      m.theta(i, j) = v;
      m.theta(j, i) = v;
    }
  }
  const Matrix kt = chain.K.cwiseProduct(m.theta);
  m.W = chain.pi.asDiagonal() * kt;
  m.A = kt;
  m.A.diagonal() -= kt.rowwise().sum();
  m.M = -m.W;
  m.M.diagonal() += m.W.rowwise().sum();
  return m;
}

EdgeField discrete_gradient(const VertexPotential& psi) {
  const auto n = psi.size();
  EdgeField f{Matrix(n, n)};
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) f.phi(x, y) = psi(x) - psi(y);
  return f;
}

Vector discrete_divergence(const MarkovChain& chain, const EdgeField& field) {
  const Matrix& K = chain.K;
  const Matrix diff = field.phi.transpose() - field.phi;
  return 0.5 * K.cwiseProduct(diff).rowwise().sum();
}

double inner_pi(const Vector& f, const Vector& g, const Vector& pi) {
  if (f.size() != g.size() || f.size() != pi.size())
    fail(ErrorKind::kShape, "inner_pi: dimension mismatch");
  return (f.array() * g.array() * pi.array()).sum();
}

double inner_pi_edges(const EdgeField& a, const EdgeField& b,
                      const MarkovChain& chain) {
  const Matrix weights = chain.pi.asDiagonal() * chain.K;
  return 0.5 * (a.phi.array() * b.phi.array() * weights.array()).sum();
}

double inner_rho(const EdgeField& a, const EdgeField& b,
                 const MarkovChain& chain, const Density& rho) {
  if (a.phi.rows() != chain.n() || b.phi.rows() != chain.n())
    fail(ErrorKind::kShape, "inner_rho: dimension mismatch");
  const MobilityMatrices mob = mobility(chain, rho);
  return 0.5 * (a.phi.array() * b.phi.array() * mob.W.array()).sum();
}

Matrix cholesky_lower(const Matrix& a) {
  const auto n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) {
      std::ostringstream os;
      os << "Cholesky failed at pivot " << j << " (value " << d << ")";
      fail(ErrorKind::kNumerical, os.str());
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
  }
  return l;
}

Matrix cholesky_solve(const Matrix& lower, const Matrix& b) {
  const auto n = lower.rows();
  Matrix x = b;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    // Forward: L z = b.
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = x(i, c);
      for (Eigen::Index k = 0; k < i; ++k) s -= lower(i, k) * x(k, c);
      x(i, c) = s / lower(i, i);
    }
    // Backward: L^T x = z.
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      double s = x(i, c);
      for (Eigen::Index k = i + 1; k < n; ++k) s -= lower(k, i) * x(k, c);
      x(i, c) = s / lower(i, i);
    }
  }
  return x;
}

ContinuitySolution solve_continuity_potential(const MarkovChain& chain,
                                              const Density& rho,
                                              const Vector& rho_dot,
                                              const ContinuityOptions& opts) {
  check_density(rho, chain.pi);
  return solve_continuity_potential(mobility(chain, rho), chain.pi, rho_dot,
                                    opts);
}

ContinuitySolution solve_continuity_potential(const MobilityMatrices& mob,
                                              const Vector& pi,
                                              const Vector& rho_dot,
                                              const ContinuityOptions& opts) {
  const int n = static_cast<int>(pi.size());
  if (rho_dot.size() != n || mob.M.rows() != n)
    fail(ErrorKind::kShape, "continuity solve: dimension mismatch");
  if (opts.pin < 0 || opts.pin >= n)
    fail(ErrorKind::kParameter, "continuity solve: pin index out of range");
  const double imbalance = rho_dot.dot(pi);
  if (std::abs(imbalance) > opts.balance_tolerance) {
    std::ostringstream os;
    os << "rho_dot is not balanced: <rho_dot, 1>_pi = " << imbalance;
    fail(ErrorKind::kDomain, os.str());
  }

  ContinuitySolution sol;
  sol.pin = opts.pin;
  if (n == 1) {
    sol.psi = Vector::Zero(1);
    sol.lambda = Vector::Zero(1);
    return sol;
  }

  // Gauged constraint system A_g psi = c.
  Matrix a_g(n, n);
  Vector c(n);
  for (int r = 0, out = 0; r < n; ++r) {
    if (r == opts.pin) continue;
    a_g.row(out) = mob.A.row(r);
    c(out) = -rho_dot(r);
    ++out;
  }
  a_g.row(n - 1).setZero();
  a_g(n - 1, opts.pin) = 1.0;
  c(n - 1) = 0.0;

  double jitter = opts.jitter_scale * mob.M.trace() / n;
  if (!(jitter > 0.0)) jitter = opts.jitter_scale;
  for (int attempt = 0;; ++attempt) {
    try {
      Matrix m = mob.M;
      m.diagonal().array() += jitter;
      const Matrix l_m = cholesky_lower(m);                   // M = L_M L_M^T
      const Matrix y = cholesky_solve(l_m, a_g.transpose());  // Y = M^-1 A_g^T
      Matrix s = a_g * y;                                     // Schur complement
      s = 0.5 * (s + s.transpose());
      const Matrix l_s = cholesky_lower(s);                   // S = L_S L_S^T
      sol.lambda = cholesky_solve(l_s, -2.0 * c);             // S lambda = -2c
      sol.psi = -0.5 * y * sol.lambda;
      sol.jitter = jitter;
      break;
    } catch (const Error& e) {
      if (attempt >= opts.max_jitter_retries)
        fail(ErrorKind::kNumerical,
             std::string("continuity solve: singular system after maximal "
                         "jitter; ") + e.what());
      jitter *= 10.0;
    }
  }
  // The gauge holds up to rounding; enforce it exactly.
  sol.psi.array() -= sol.psi(opts.pin);
  sol.constraint_residual = (mob.A * sol.psi + rho_dot).cwiseAbs().maxCoeff();
  sol.stationarity_residual =
      (2.0 * mob.M * sol.psi + a_g.transpose() * sol.lambda).cwiseAbs().maxCoeff();
  return sol;
}

namespace {

// Time derivatives of the geodesic system at (rho, psi).
void geodesic_rhs(const MarkovChain& chain, const Vector& rho,
                  const Vector& psi, Vector& drho, Vector& dpsi) {
  const int n = chain.n();
  drho.setZero(n);
  dpsi.setZero(n);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      const double k = chain.K(x, y);
      if (k == 0.0 || x == y) continue;
      const double dpsi_xy = psi(y) - psi(x);
      drho(x) -= dpsi_xy * k * log_mean(rho(x), rho(y));
      dpsi(x) -= 0.5 * dpsi_xy * dpsi_xy * k * log_mean_d1(rho(x), rho(y));
    }
  }
}

}  // namespace

std::vector<GeodesicPoint> geodesic_shoot(const MarkovChain& chain,
                                          const Density& rho0,
                                          const VertexPotential& psi0,
                                          int steps, double horizon,
                                          double floor) {
  check_density(rho0, chain.pi);
  if (steps < 1 || !(horizon > 0.0))
    fail(ErrorKind::kParameter, "geodesic_shoot: need steps >= 1, horizon > 0");
  const double h = horizon / steps;
  std::vector<GeodesicPoint> out;
  out.reserve(steps + 1);
  out.push_back({rho0, psi0});
  Vector rho = rho0.rho, psi = psi0;
  Vector k1r, k1p, k2r, k2p, k3r, k3p, k4r, k4p;
  auto guard = [&](const Vector& r, int step) {
    if (r.minCoeff() <= floor)
      fail(ErrorKind::kNumerical,
           "geodesic_shoot: density left the interior at step " +
               std::to_string(step));
  };
  for (int s = 0; s < steps; ++s) {
    geodesic_rhs(chain, rho, psi, k1r, k1p);
    Vector r2 = rho + 0.5 * h * k1r;
    guard(r2, s + 1);
    geodesic_rhs(chain, r2, psi + 0.5 * h * k1p, k2r, k2p);
    Vector r3 = rho + 0.5 * h * k2r;
    guard(r3, s + 1);
    geodesic_rhs(chain, r3, psi + 0.5 * h * k2p, k3r, k3p);
    Vector r4 = rho + h * k3r;
    guard(r4, s + 1);
    geodesic_rhs(chain, r4, psi + h * k3p, k4r, k4p);
    rho += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
    psi += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    guard(rho, s + 1);
    out.push_back({Density{rho}, psi});
  }
  return out;
}

GeodesicVelocity geodesic_velocity(const MarkovChain& chain,
                                   const Density& rho_from,
                                   const Density& rho_to, double dt,
                                   const GeodesicOptions& opts) {
  check_density(rho_from, chain.pi);
  check_density(rho_to, chain.pi);
  if (!(dt > 0.0)) fail(ErrorKind::kParameter, "geodesic_velocity: dt must be > 0");
  const MobilityMatrices mob = mobility(chain, rho_from);
  Vector displacement = rho_to.rho - rho_from.rho;
  // Remove the O(eps) imbalance left by the unit-mass normalisation.
  displacement -= Vector::Constant(displacement.size(), displacement.dot(chain.pi));
  Vector psi = solve_continuity_potential(mob, chain.pi, displacement,
                                          opts.solver).psi;

  if (opts.mode == VelocityMode::kShooting) {
    for (int it = 0; it < opts.shooting_iterations; ++it) {
      std::vector<GeodesicPoint> path;
      try {
        path = geodesic_shoot(chain, rho_from, psi, opts.shooting_steps, 1.0);
      } catch (const Error&) {
        break;  // keep the last interior estimate
      }
      Vector miss = rho_to.rho - path.back().rho.rho;
      miss -= Vector::Constant(miss.size(), miss.dot(chain.pi));
      if (miss.cwiseAbs().maxCoeff() < opts.shooting_tolerance) break;
      psi += solve_continuity_potential(mob, chain.pi, miss, opts.solver).psi;
    }
  }
  if (opts.convention == VelocityConvention::kRate) psi /= dt;
  GeodesicVelocity out;
  out.velocity = discrete_gradient(psi);
  out.psi = std::move(psi);
  return out;
}

double wk_action(const MarkovChain& chain,
                 const std::vector<GeodesicPoint>& path, double dt,
                 double continuity_tolerance) {
  if (!(dt > 0.0)) fail(ErrorKind::kParameter, "wk_action: dt must be > 0");
  double action = 0.0;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const MobilityMatrices mob = mobility(chain, path[k].rho);
    const Vector implied = -mob.A * path[k].psi;
    const Vector observed = (path[k + 1].rho.rho - path[k].rho.rho) / dt;
    const double scale =
        implied.cwiseAbs().maxCoeff() + observed.cwiseAbs().maxCoeff();
    const double residual = (implied - observed).cwiseAbs().maxCoeff();
    if (residual > continuity_tolerance * scale + 1e-12)
      fail(ErrorKind::kDomain, "wk_action: path violates the continuity "
                               "equation at step " + std::to_string(k));
    const EdgeField v = discrete_gradient(path[k].psi);
    action += dt * 0.5 * (v.phi.array().square() * mob.W.array()).sum();
  }
  return action;
}

}  // namespace wkflow
