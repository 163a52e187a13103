#include "wkflow/data.hpp"

#include <algorithm>
#include <cmath>

namespace wkflow {

SnapshotDataset sample_snapshots(const DensityTrajectory& trajectory,
                                 const MarkovChain& chain, std::int64_t samples,
                                 std::uint64_t seed) {
  if (samples < 1) fail(ErrorKind::kParameter, "sample count M must be >= 1");
  const int n = chain.n();
  SnapshotDataset ds;
  ds.grid = trajectory.grid;
  ds.total_per_step = samples;
  ds.seed = seed;
  ds.counts.reserve(trajectory.size());
  std::vector<double> cdf(n);
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const Vector p = trajectory.densities[k].probabilities(chain.pi);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += std::max(p(i), 0.0);
      cdf[i] = acc;
    }
    Rng rng(derive_seed(seed, kSnapshotStream, k));
    std::vector<std::int64_t> counts(n, 0);
    for (std::int64_t s = 0; s < samples; ++s) {
      const double u = rng.uniform() * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const auto idx = std::min<std::ptrdiff_t>(it - cdf.begin(), n - 1);
      ++counts[idx];
    }
    ds.counts.push_back(std::move(counts));
  }
  return ds;
}

SnapshotDataset exact_snapshots(const DensityTrajectory& trajectory,
                                const MarkovChain& chain,
                                std::int64_t nominal_samples) {
  SnapshotDataset ds;
  ds.grid = trajectory.grid;
  ds.total_per_step = nominal_samples;
  std::vector<Vector> probs;
  probs.reserve(trajectory.size());
  for (const auto& d : trajectory.densities) probs.push_back(d.probabilities(chain.pi));
  ds.exact = std::move(probs);
  return ds;
}

Density estimate_density(const std::vector<std::int64_t>& counts,
                         const Vector& pi, double epsilon) {
  const auto n = static_cast<Eigen::Index>(counts.size());
  if (n != pi.size()) fail(ErrorKind::kShape, "counts length does not match pi");
  if (epsilon < 0.0) fail(ErrorKind::kParameter, "smoothing epsilon must be >= 0");
  std::int64_t total = 0;
  for (auto c : counts) {
    if (c < 0) fail(ErrorKind::kDomain, "counts must be nonnegative");
    total += c;
  }
  if (total == 0) fail(ErrorKind::kDomain, "counts are all zero");
  Vector p(n);
  const double denom = static_cast<double>(total) + static_cast<double>(n) * epsilon;
  for (Eigen::Index i = 0; i < n; ++i) p(i) = (static_cast<double>(counts[i]) + epsilon) / denom;
  Vector rho = p.cwiseQuotient(pi);
  rho /= rho.dot(pi);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(rho(i) > 0.0))
      fail(ErrorKind::kDomain,
           "estimated density vanishes at an unobserved state; use epsilon > 0");
  return Density{rho};
}

std::vector<int> GeodesicTable::valid_intervals() const {
  std::vector<int> out;
  for (std::size_t k = 0; k < failed.size(); ++k)
    if (!failed[k]) out.push_back(static_cast<int>(k));
  return out;
}

GeodesicTable precompute_geodesics(const SnapshotDataset& dataset,
                                   const MarkovChain& chain,
                                   const PrecomputeOptions& opts) {
  if (dataset.steps() < 2)
    fail(ErrorKind::kParameter, "dataset needs at least two time points");
  check_grid(dataset.grid);
  GeodesicTable table;
  table.convention = opts.geodesic.convention;
  table.densities.reserve(dataset.steps());
  for (std::size_t k = 0; k < dataset.steps(); ++k) {
    if (dataset.is_exact()) {
      Vector rho = (*dataset.exact)[k].cwiseQuotient(chain.pi);
      clip_and_renormalize(rho, chain.pi, opts.density_floor);
      table.densities.push_back(Density{rho});
    } else {
      table.densities.push_back(
          estimate_density(dataset.counts[k], chain.pi, opts.epsilon));
    }
  }
  const int n = chain.n();
  for (std::size_t k = 1; k < dataset.steps(); ++k) {
    const double dt = dataset.grid[k] - dataset.grid[k - 1];
    table.dt.push_back(dt);
    try {
      auto geo = geodesic_velocity(chain, table.densities[k],
                                   table.densities[k - 1], dt, opts.geodesic);
      table.velocities.push_back(std::move(geo.velocity));
      table.potentials.push_back(std::move(geo.psi));
      table.failed.push_back(false);
      table.failure_reasons.emplace_back();
    } catch (const Error& e) {
      table.velocities.push_back(EdgeField{Matrix::Zero(n, n)});
      table.potentials.push_back(Vector::Zero(n));
      table.failed.push_back(true);
      table.failure_reasons.emplace_back(e.what());
    }
  }
  return table;
}

}  // namespace wkflow
