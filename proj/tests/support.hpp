#pragma once

// Random instances shared by the unit and acceptance tests.

#include "wkflow/geometry.hpp"
#include "wkflow/graph.hpp"
#include "wkflow/learning.hpp"

namespace wkflow::testing {

/// Reversible chain from a connected random graph of a rotating class.
inline MarkovChain random_chain(Rng& rng, int n) {
  static constexpr GraphClass kClasses[] = {GraphClass::kComplete, GraphClass::kErdosRenyi,
                                            GraphClass::kWattsStrogatz, GraphClass::kSbm,
                                            GraphClass::kDelaunay, GraphClass::kEmst};
  GraphClass cls = kClasses[rng.below(std::size(kClasses))];
  if (n < 4) cls = GraphClass::kComplete;
  return to_markov_chain(generate_graph(cls, n, GraphParams{}, rng.next_u64()));
}

/// Density with log-uniform entries spanning `spread` orders of magnitude.
inline Density random_density(Rng& rng, const Vector& pi, double spread = 1.0) {
  Vector rho(pi.size());
  for (Eigen::Index i = 0; i < rho.size(); ++i)
    rho(i) = std::pow(10.0, rng.uniform(-spread, spread));
  rho /= rho.dot(pi);
  return Density{rho};
}

inline Vector random_vector(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

inline Vector random_probability(Rng& rng, int n) {
  Vector p(n);
  for (int i = 0; i < n; ++i) p(i) = rng.exponential();
  return p / p.sum();
}

/// Balanced rate of change: <rho_dot, 1>_pi = 0.
inline Vector random_balanced(Rng& rng, const Vector& pi) {
  Vector r = random_vector(rng, static_cast<int>(pi.size()));
  return r.array() - r.dot(pi);
}

struct Recovery {
  /// max over state pairs of |(Vhat(x) - Vhat(y)) - (V(x) - V(y))|
  double gradient_error = 0.0;
  double beta_relative_error = 0.0;
  double learned_beta = 0.0;
};

/// Simulates exact densities under (V, beta) on a uniform grid over [0, 1],
/// trains the model and compares the recovered parameters to the truth.
inline Recovery closed_loop(const MarkovChain& chain, const Vector& p0,
                            const FreeEnergyParams& truth, int steps,
                            const TrainConfig& config = {}) {
  const auto traj = evolve_density(chain, p0, truth, uniform_grid(1.0, steps));
  const auto result = train(exact_snapshots(traj, chain), chain, config);
  const Vector v = result.params.potential();
  Recovery r;
  r.learned_beta = result.params.beta();
  r.beta_relative_error = std::abs(r.learned_beta - truth.beta) / truth.beta;
  for (Eigen::Index x = 0; x < v.size(); ++x)
    for (Eigen::Index y = 0; y < v.size(); ++y)
      r.gradient_error = std::max(
          r.gradient_error, std::abs((v(x) - v(y)) - (truth.V(x) - truth.V(y))));
  return r;
}

}  // namespace wkflow::testing
