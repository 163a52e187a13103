#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wkflow/data.hpp"
#include "wkflow/dynamics.hpp"

namespace wkflow {

enum class ModelVariant { kTabular, kMlp };

/// Orientation used when the three loss terms are combined.
///
/// The model head predicts rows [V(y) - V(x)]_y, while discrete gradients are
/// defined as f(x) - f(y). kConsistent expresses the score and the velocity in
/// the head's orientation too; kMixedLiteral combines the head with the
/// other two terms as printed, which fits -V instead of V.
enum class SignConvention { kConsistent, kMixedLiteral };

/// Trainable parameters stored as one flat vector.
///
/// tabular layout: [V_table (n), raw_beta]
/// mlp layout:     [W1 (h x n), b1 (h), W2 (h x h), b2 (h), W3 (n x h), b3 (n),
///                  w_beta (h), b_beta]   (all matrices column-major)
struct ModelParams {
  ModelVariant variant = ModelVariant::kTabular;
  int n = 0;
  int hidden = 64;
  std::vector<double> values;

  static ModelParams tabular(int n, double initial_beta = std::log(2.0));
  static ModelParams mlp(int n, std::uint64_t seed, int hidden = 64);

  std::size_t size() const { return values.size(); }
  /// Global beta. For the mlp, the mean of the per-state beta head.
  double beta() const;
  /// Potential recovered from the gradient head, centred to zero mean.
  Vector potential() const;
  FreeEnergyParams free_energy() const { return {potential(), beta()}; }
};

double softplus(double x);
double softplus_inverse(double y);

struct ForwardResult {
  Vector grad_row;  // [V(y) - V(x)]_y
  double beta = 0.0;
};

ForwardResult model_forward(const ModelParams& params, int state);

struct TrainConfig {
  int epochs = 2;
  int batch_size = 128;
  double learning_rate = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 1e-6;
  /// JKO step; the grid spacing of each interval when unset.
  std::optional<double> tau;
  std::uint64_t seed = 0;
  ModelVariant variant = ModelVariant::kTabular;
  int hidden = 64;
  double initial_beta = std::log(2.0);
  SignConvention sign = SignConvention::kConsistent;
  PrecomputeOptions precompute;
  /// Cap on optimisation steps (0 = no cap); epochs define the nominal count.
  long max_steps = 0;
};

void check_config(const TrainConfig& config);

struct BatchItem {
  int state = 0;
  /// Index into GeodesicTable::velocities.
  int interval = 0;
};

double loss(const ModelParams& params, std::span<const BatchItem> batch,
            const GeodesicTable& geo, std::optional<double> tau,
            SignConvention sign = SignConvention::kConsistent);

/// Exact gradient of `loss` in the flat layout of `params`.
std::vector<double> loss_gradient(const ModelParams& params,
                                  std::span<const BatchItem> batch,
                                  const GeodesicTable& geo,
                                  std::optional<double> tau,
                                  SignConvention sign = SignConvention::kConsistent,
                                  double* loss_out = nullptr);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

/// One AdamW update in place (bias-corrected moments, decoupled decay).
void adam_step(AdamState& state, std::vector<double>& params,
               const std::vector<double>& gradient, const TrainConfig& config);

struct TrainingLogEntry {
  long step = 0;
  double loss = 0.0;
  double beta = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<TrainingLogEntry> log;
  GeodesicTable table;
};

TrainResult train(const SnapshotDataset& dataset, const MarkovChain& chain,
                  const TrainConfig& config);

/// Training on an already computed geodesic table. `samples_per_step` sizes
/// an epoch as samples_per_step * valid_intervals / batch_size steps.
TrainResult train(GeodesicTable table, const MarkovChain& chain,
                  std::int64_t samples_per_step, const TrainConfig& config);

/// True if at some grid point one state carries >= `threshold` of the
/// predicted mass while the ground truth (when given) does not.
bool detect_collapse(const DensityTrajectory& pred, const Vector& pi,
                     const DensityTrajectory* truth = nullptr,
                     double threshold = 0.99);

}  // namespace wkflow
