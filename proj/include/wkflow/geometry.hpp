#pragma once

// W_K geometry on strictly positive densities: logarithmic-mean mobility,
// discrete differential operators, the rho-weighted metric, and the
// Schur-Cholesky solver for the discrete continuity equation.
//
// Orientation: grad(psi)(x, y) = psi(x) - psi(y). A tangent vector grad(psi)
// at rho moves the density by
//   rho_dot(x) = sum_y (psi(x) - psi(y)) K(x, y) m_rho(x, y),
// so the heat direction (K - I) rho corresponds to psi = -log rho.

#include <optional>
#include <vector>

#include "wkflow/common.hpp"
#include "wkflow/graph.hpp"

namespace wkflow {

/// Density with respect to pi; strictly positive with unit pi-mass.
struct Density {
  Vector rho;

  int n() const { return static_cast<int>(rho.size()); }
  /// Probability vector rho * pi.
  Vector probabilities(const Vector& pi) const {
    return rho.cwiseProduct(pi);
  }
};

/// Checks positivity and sum_x pi(x) rho(x) = 1 within `tol`; throws
/// Error(kDomain) otherwise.
void check_density(const Density& d, const Vector& pi, double tol = 1e-10);

Density density_from_probabilities(const Vector& p, const Vector& pi);
Density uniform_density(int n);

/// Clips entries below `floor` and rescales to unit pi-mass. Returns the
/// number of clipped coordinates.
int clip_and_renormalize(Vector& rho, const Vector& pi, double floor = 1e-12);

/// n x n edge array; tangent vectors and discrete gradients.
struct EdgeField {
  Matrix phi;
};

using VertexPotential = Vector;

// --- logarithmic mean ---------------------------------------------------------

/// (s - t) / (log s - log t), continuously extended by s on the diagonal.
double log_mean(double s, double t);

/// Partial derivative of log_mean in its first argument.
double log_mean_d1(double s, double t);

// --- mobility -------------------------------------------------------------------

struct MobilityMatrices {
  Matrix theta;  // log-mean matrix
  Matrix W;      // diag(pi) (K . theta)
  Matrix A;      // continuity operator K . theta - diag((K . theta) 1)
  Matrix M;      // weighted Laplacian diag(W 1) - W
};

MobilityMatrices mobility(const MarkovChain& chain, const Density& rho);

// --- discrete calculus ----------------------------------------------------------

EdgeField discrete_gradient(const VertexPotential& psi);

/// (div Phi)(x) = 1/2 sum_y K(x, y) (Phi(y, x) - Phi(x, y)).
Vector discrete_divergence(const MarkovChain& chain, const EdgeField& field);

double inner_pi(const Vector& f, const Vector& g, const Vector& pi);

/// 1/2 sum_{x,y} Phi Psi K pi(x), the unweighted edge product.
double inner_pi_edges(const EdgeField& a, const EdgeField& b,
                      const MarkovChain& chain);

/// 1/2 sum_{x,y} Phi Psi K m_rho pi(x).
double inner_rho(const EdgeField& a, const EdgeField& b,
                 const MarkovChain& chain, const Density& rho);

// --- continuity solver ----------------------------------------------------------

struct ContinuitySolution {
  VertexPotential psi;
  /// Multipliers for the gauged constraint matrix (n - 1 continuity rows with
  /// the pinned row removed, then the gauge row).
  Vector lambda;
  double jitter = 0.0;
  /// max |A psi + rho_dot| over all n continuity rows.
  double constraint_residual = 0.0;
  /// max |2 M psi + A_g^T lambda| with the unjittered M.
  double stationarity_residual = 0.0;
  int pin = 0;
};

struct ContinuityOptions {
  int pin = 0;
  /// Diagonal jitter added to M is jitter_scale * trace(M) / n.
  double jitter_scale = 1e-12;
  /// Retry with jitter multiplied by 10 up to this many times on a failed
  /// Cholesky pivot.
  int max_jitter_retries = 6;
  double balance_tolerance = 1e-10;
};

/// Minimum-energy potential psi with psi[pin] = 0 solving the continuity
/// equation A(rho) psi = -rho_dot, by the two-Cholesky Schur complement route.
///
/// The pinned continuity row is redundant (pi^T A = 0 and the balance
/// condition <rho_dot, 1>_pi = 0 make it a combination of the others), so it
/// is replaced by the gauge row e_pin^T. This keeps the Schur complement
/// positive definite.
ContinuitySolution solve_continuity_potential(const MarkovChain& chain,
                                              const Density& rho,
                                              const Vector& rho_dot,
                                              const ContinuityOptions& opts = {});

/// Same, reusing already assembled mobility matrices.
ContinuitySolution solve_continuity_potential(const MobilityMatrices& mob,
                                              const Vector& pi,
                                              const Vector& rho_dot,
                                              const ContinuityOptions& opts = {});

/// Dense Cholesky L L^T = a. Throws Error(kNumerical) naming the failing pivot.
Matrix cholesky_lower(const Matrix& a);
/// Solves L L^T x = b for each column of b.
Matrix cholesky_solve(const Matrix& lower, const Matrix& b);

// --- geodesics ------------------------------------------------------------------

enum class VelocityMode {
  /// rho_dot = rho_to - rho_from over one unit of geodesic time.
  kSingleStep,
  /// Single step followed by shooting with secant corrections on psi0.
  kShooting,
};

/// How a velocity is scaled relative to the snapshot spacing.
enum class VelocityConvention {
  /// Unit-time displacement; the loss divides by tau.
  kDisplacement,
  /// Displacement divided by dt; the loss uses it as a rate.
  kRate,
};

struct GeodesicOptions {
  VelocityMode mode = VelocityMode::kSingleStep;
  VelocityConvention convention = VelocityConvention::kDisplacement;
  int shooting_steps = 64;
  int shooting_iterations = 8;
  double shooting_tolerance = 1e-10;
  ContinuityOptions solver;
};

struct GeodesicVelocity {
  VertexPotential psi;
  EdgeField velocity;
};

GeodesicVelocity geodesic_velocity(const MarkovChain& chain,
                                   const Density& rho_from,
                                   const Density& rho_to, double dt,
                                   const GeodesicOptions& opts = {});

struct GeodesicPoint {
  Density rho;
  VertexPotential psi;
};

/// Explicit RK4 integration of the coupled geodesic equations
///   d/dt rho(x) = sum_y (psi(x) - psi(y)) K m_rho
///   d/dt psi(x) = -1/2 sum_y (psi(y) - psi(x))^2 K d1m(rho(x), rho(y)).
/// Returns steps + 1 points. Throws Error(kNumerical) if a coordinate drops
/// below `floor`; the message names the step.
std::vector<GeodesicPoint> geodesic_shoot(const MarkovChain& chain,
                                          const Density& rho0,
                                          const VertexPotential& psi0,
                                          int steps, double horizon,
                                          double floor = 1e-12);

/// Left Riemann sum of the kinetic energy along a discretised path; an upper
/// bound estimate of W_K^2 when the path joins its endpoints in unit time.
/// Consecutive points must satisfy the continuity equation within
/// `continuity_tolerance` (relative), else Error(kDomain).
double wk_action(const MarkovChain& chain,
                 const std::vector<GeodesicPoint>& path, double dt,
                 double continuity_tolerance = 0.1);

}  // namespace wkflow
