#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wkflow/dynamics.hpp"
#include "wkflow/geometry.hpp"
#include "wkflow/graph.hpp"

namespace wkflow {

/// Population snapshots: one count vector per grid point.
///
/// In exact mode (`exact` set) the counts are absent and the true
/// probabilities are carried instead; `total_per_step` is then only the
/// nominal sample budget used to size training epochs.
struct SnapshotDataset {
  std::vector<double> grid;
  std::vector<std::vector<std::int64_t>> counts;
  std::optional<std::vector<Vector>> exact;
  std::int64_t total_per_step = 0;
  std::string chain_ref;
  std::uint64_t seed = 0;

  std::size_t steps() const { return grid.size(); }
  bool is_exact() const { return exact.has_value(); }
};

/// Draws `samples` multinomial states from p_t = rho_t * pi at every grid
/// point. Step k uses Rng(derive_seed(seed, kSnapshotStream, k)).
SnapshotDataset sample_snapshots(const DensityTrajectory& trajectory,
                                 const MarkovChain& chain, std::int64_t samples,
                                 std::uint64_t seed);

/// Exact-density dataset (infinite sample limit).
SnapshotDataset exact_snapshots(const DensityTrajectory& trajectory,
                                const MarkovChain& chain,
                                std::int64_t nominal_samples = 10000);

inline const std::uint64_t kSnapshotStream = 0x736E6170ULL;  // "snap"

/// Smoothed estimate rho_hat = ((c + eps) / (M + n eps)) / pi, renormalised.
Density estimate_density(const std::vector<std::int64_t>& counts,
                         const Vector& pi, double epsilon = 0.5);

struct GeodesicTable {
  /// Estimated densities, one per grid point.
  std::vector<Density> densities;
  /// Velocity for interval k is stored at index k - 1 and points from
  /// rho_hat(t_k) back to rho_hat(t_{k-1}).
  std::vector<EdgeField> velocities;
  std::vector<VertexPotential> potentials;
  std::vector<double> dt;
  std::vector<bool> failed;
  std::vector<std::string> failure_reasons;
  VelocityConvention convention = VelocityConvention::kDisplacement;

  std::size_t intervals() const { return velocities.size(); }
  std::vector<int> valid_intervals() const;
};

struct PrecomputeOptions {
  double epsilon = 0.5;
  GeodesicOptions geodesic;
  double density_floor = 1e-12;
};

GeodesicTable precompute_geodesics(const SnapshotDataset& dataset,
                                   const MarkovChain& chain,
                                   const PrecomputeOptions& opts = {});

}  // namespace wkflow
