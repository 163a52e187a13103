#include "wkflow/dynamics.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace wkflow {

void check_params(const FreeEnergyParams& params, int n) {
  if (params.V.size() != n)
    fail(ErrorKind::kShape, "potential length does not match the chain");
  if (!(params.beta > 0.0) || !std::isfinite(params.beta))
    fail(ErrorKind::kDomain, "beta must be strictly positive");
  if (!params.V.allFinite()) fail(ErrorKind::kDomain, "potential is not finite");
}

std::vector<double> uniform_grid(double horizon, int steps) {
  if (steps < 1 || !(horizon > 0.0))
    fail(ErrorKind::kParameter, "uniform_grid: need steps >= 1, horizon > 0");
  std::vector<double> g(steps + 1);
  for (int k = 0; k <= steps; ++k) g[k] = horizon * k / steps;
  return g;
}

std::vector<double> log_grid(double horizon, int steps, double first) {
  if (steps < 2 || !(horizon > first) || !(first > 0.0))
    fail(ErrorKind::kParameter, "log_grid: need steps >= 2, 0 < first < horizon");
  std::vector<double> g(steps + 1);
  g[0] = 0.0;
  const double ratio = std::log(horizon / first);
  for (int k = 1; k <= steps; ++k)
    g[k] = first * std::exp(ratio * (k - 1) / (steps - 1));
  g[steps] = horizon;
  return g;
}

void check_grid(const std::vector<double>& grid) {
  if (grid.size() < 1 || grid.front() != 0.0)
    fail(ErrorKind::kShape, "time grid must start at 0");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1]))
      fail(ErrorKind::kShape, "time grid must be strictly increasing");
}

double entropy(const Density& rho, const Vector& pi) {
  return (rho.rho.array() * rho.rho.array().log() * pi.array()).sum();
}

FreeEnergyTerms free_energy(const Density& rho, const FreeEnergyParams& params,
                            const Vector& pi) {
  FreeEnergyTerms f;
  f.potential = (params.V.array() * rho.rho.array() * pi.array()).sum();
  f.entropy = entropy(rho, pi);
  f.total = f.potential + params.beta * f.entropy;
  return f;
}

Density gibbs_density(const FreeEnergyParams& params, const Vector& pi) {
  const Vector logw = -params.V / params.beta;
  Vector w = (logw.array() - logw.maxCoeff()).exp();
  // rho = w / sum(pi w) gives p = pi w / sum(pi w).
  return Density{w / w.dot(pi)};
}

namespace {

double inf_norm(const Matrix& a) { return a.cwiseAbs().rowwise().sum().maxCoeff(); }

void check_rate_matrix(const Matrix& Q) {
  if (Q.rows() != Q.cols())
    fail(ErrorKind::kShape, "rate matrix must be square");
  const double scale = 1.0 + Q.diagonal().cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    for (Eigen::Index j = 0; j < Q.cols(); ++j)
      if (i != j && Q(i, j) < -1e-14 * scale)
        fail(ErrorKind::kDomain, "rate matrix has a negative off-diagonal entry");
    if (std::abs(Q.row(i).sum()) > 1e-10 * scale)
      fail(ErrorKind::kDomain, "rate matrix rows must sum to zero");
  }
}

}  // namespace

Matrix matrix_exponential(const Matrix& Q, double t) {
  check_rate_matrix(Q);
  const auto n = Q.rows();
  Matrix a = t * Q;
  const double norm = inf_norm(a);
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  a /= std::ldexp(1.0, squarings);

  Matrix sum = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k < 64; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
    if (inf_norm(term) <= 1e-16 * inf_norm(sum)) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  // Rounding can leave tiny negatives where the exact value is ~0.
  sum = sum.cwiseMax(0.0);
  return sum;
}

DensityTrajectory heat_flow(const MarkovChain& chain, const Density& rho0,
                            const std::vector<double>& grid) {
  check_density(rho0, chain.pi);
  check_grid(grid);
  const auto n = chain.n();
  const Matrix generator = chain.K - Matrix::Identity(n, n);
  DensityTrajectory out;
  out.grid = grid;
  out.densities.push_back(rho0);
  std::map<double, Matrix> cache;
  Vector rho = rho0.rho;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double dt = grid[k] - grid[k - 1];
    auto it = cache.find(dt);
    if (it == cache.end()) it = cache.emplace(dt, matrix_exponential(generator, dt)).first;
    rho = it->second * rho;
    rho /= rho.dot(chain.pi);
    out.densities.push_back(Density{rho});
  }
  return out;
}

namespace {

// B(x) = x / (1 - e^{-x}); B(x) - B(-x) = x and B(x) -> [x]_+ as |x| -> inf.
double bernoulli_weight(double x) {
  if (std::abs(x) < 1e-6) return 1.0 + 0.5 * x + x * x / 12.0;
  if (x < -700.0) return 0.0;
  return x / -std::expm1(-x);
}

}  // namespace

Matrix free_energy_rates(const MarkovChain& chain, const Density& rho,
                         const FreeEnergyParams& params, RateScheme scheme) {
  const int n = chain.n();
  check_density(rho, chain.pi, 1e-8);
  check_params(params, n);
  const Vector psi = params.V + params.beta * rho.rho.array().log().matrix();
  Matrix q = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || chain.K(i, j) == 0.0) continue;
      const double scale = chain.K(i, j) * log_mean(rho.rho(i), rho.rho(j)) / rho.rho(i);
      const double drop = psi(i) - psi(j);
      q(i, j) = scheme == RateScheme::kUpwind
                    ? scale * std::max(drop, 0.0)
                    : scale * params.beta * bernoulli_weight(drop / params.beta);
    }
    q(i, i) = -q.row(i).sum();
  }
  return q;
}

DensityTrajectory evolve_density(const MarkovChain& chain, const Vector& p0,
                                 const FreeEnergyParams& params,
                                 const std::vector<double>& grid,
                                 const EvolveOptions& opts) {
  const int n = chain.n();
  check_params(params, n);
  check_grid(grid);
  if (p0.size() != n) fail(ErrorKind::kShape, "p0 length does not match the chain");
  if (p0.minCoeff() < 0.0 || std::abs(p0.sum() - 1.0) > 1e-9)
    fail(ErrorKind::kDomain, "p0 must be a probability vector");

  DensityTrajectory out;
  out.grid = grid;
  Vector rho = p0.cwiseQuotient(chain.pi);
  if (clip_and_renormalize(rho, chain.pi, opts.floor) > 0) out.clip_events.push_back(0);
  out.densities.push_back(Density{rho});
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double dt = grid[k] - grid[k - 1];
    const Matrix q = free_energy_rates(chain, Density{rho}, params, opts.scheme);
    const Vector p = rho.cwiseProduct(chain.pi);
    Vector next = matrix_exponential(q, dt).transpose() * p;
    next /= next.sum();
    rho = next.cwiseQuotient(chain.pi);
    if (clip_and_renormalize(rho, chain.pi, opts.floor) > 0)
      out.clip_events.push_back(static_cast<int>(k));
    out.densities.push_back(Density{rho});
  }
  return out;
}

double two_point_heat_oracle(double p, double q, double beta0, double t) {
  const double decay = std::exp(-(p + q) * t);
  return (p - q) / (p + q) * (1.0 - decay) + beta0 * decay;
}

double two_point_w2(double alpha, double beta) {
  return std::sqrt(2.0 * std::abs(alpha - beta));
}

Density two_point_density(double p, double q, double beta) {
  Vector rho(2);
  rho(0) = (p + q) / q * (1.0 - beta) / 2.0;
  rho(1) = (p + q) / p * (1.0 + beta) / 2.0;
  return Density{rho};
}

}  // namespace wkflow
