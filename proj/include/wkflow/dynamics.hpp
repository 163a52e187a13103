#pragma once

#include <vector>

#include "wkflow/common.hpp"
#include "wkflow/geometry.hpp"
#include "wkflow/graph.hpp"

namespace wkflow {

/// F(rho) = sum V rho pi + beta sum rho log rho pi. V matters only up to an
/// additive constant.
struct FreeEnergyParams {
  Vector V;
  double beta = 1.0;
};

void check_params(const FreeEnergyParams& params, int n);

struct DensityTrajectory {
  std::vector<double> grid;
  std::vector<Density> densities;
  /// Grid indices at which the density floor was hit and the state was
  /// clipped and renormalised.
  std::vector<int> clip_events;

  std::size_t size() const { return grid.size(); }
};

/// Time grid helpers. `uniform_grid(1.0, 100)` has 101 points.
std::vector<double> uniform_grid(double horizon, int steps);
/// Log-spaced interior points, denser near t = 0; first point 0, last horizon.
std::vector<double> log_grid(double horizon, int steps, double first = 1e-3);
void check_grid(const std::vector<double>& grid);

double entropy(const Density& rho, const Vector& pi);

struct FreeEnergyTerms {
  double potential = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

FreeEnergyTerms free_energy(const Density& rho, const FreeEnergyParams& params,
                            const Vector& pi);

/// Gibbs density: p(x) proportional to pi(x) exp(-V(x)/beta).
Density gibbs_density(const FreeEnergyParams& params, const Vector& pi);

/// exp(tQ) for a rate matrix Q (nonnegative off-diagonals, zero row sums) by
/// scaling and squaring of the truncated Taylor series.
Matrix matrix_exponential(const Matrix& Q, double t);

/// Heat equation d/dt rho = (K - I) rho, evaluated exactly on the grid.
DensityTrajectory heat_flow(const MarkovChain& chain, const Density& rho0,
                            const std::vector<double>& grid);

enum class RateScheme {
  /// Q_ij = K_ij theta_ij / rho_i [psi_i - psi_j]_+ with psi = V + beta log rho.
  kUpwind,
  /// Q_ij = K_ij theta_ij / rho_i * beta B((psi_i - psi_j)/beta) with
  /// B(x) = x / (1 - e^{-x}). Same net fluxes as kUpwind; reversible with
  /// respect to the Gibbs measure, and exactly K - I when V = 0, beta = 1.
  kBalanced,
};

Matrix free_energy_rates(const MarkovChain& chain, const Density& rho,
                         const FreeEnergyParams& params,
                         RateScheme scheme = RateScheme::kUpwind);

struct EvolveOptions {
  RateScheme scheme = RateScheme::kBalanced;
  double floor = 1e-12;
};

/// Frozen-rate stepping p <- p exp(dt Q(rho)) on every grid interval, starting
/// from the probability vector p0.
DensityTrajectory evolve_density(const MarkovChain& chain, const Vector& p0,
                                 const FreeEnergyParams& params,
                                 const std::vector<double>& grid,
                                 const EvolveOptions& opts = {});

/// Heat flow on {a, b} with K(a,b) = p, K(b,a) = q in the coordinate
/// P = ((1 - beta) delta_a + (1 + beta) delta_b) / 2.
double two_point_heat_oracle(double p, double q, double beta0, double t);

/// W_2 between two-point measures with parameters alpha, beta.
double two_point_w2(double alpha, double beta);

/// Two-point density for parameter beta, for the chain with rates (p, q).
Density two_point_density(double p, double q, double beta);

}  // namespace wkflow
