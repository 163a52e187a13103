#include "wkflow/learning.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wkflow {

double softplus(double x) {
  return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) fail(ErrorKind::kDomain, "softplus_inverse requires y > 0");
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Offsets into the flat mlp parameter vector.
struct MlpLayout {
  int n, h;
  std::size_t w1, b1, w2, b2, w3, b3, wb, bb, total;

  MlpLayout(int n_, int h_) : n(n_), h(h_) {
    std::size_t off = 0;
    w1 = off; off += static_cast<std::size_t>(h) * n;
    b1 = off; off += h;
    w2 = off; off += static_cast<std::size_t>(h) * h;
    b2 = off; off += h;
    w3 = off; off += static_cast<std::size_t>(n) * h;
    b3 = off; off += n;
    wb = off; off += h;
    bb = off; off += 1;
    total = off;
  }
};

using ConstMap = Eigen::Map<const Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;
using MutMap = Eigen::Map<Matrix>;
using MutVecMap = Eigen::Map<Vector>;

struct MlpCache {
  Vector h1, h2, grad_row;
  double raw_beta = 0.0;
  double beta = 0.0;
};

MlpCache mlp_forward(const ModelParams& p, int state) {
  const MlpLayout L(p.n, p.hidden);
  const double* v = p.values.data();
  ConstMap w1(v + L.w1, L.h, L.n);
  ConstVecMap b1(v + L.b1, L.h);
  ConstMap w2(v + L.w2, L.h, L.h);
  ConstVecMap b2(v + L.b2, L.h);
  ConstMap w3(v + L.w3, L.n, L.h);
  ConstVecMap b3(v + L.b3, L.n);
  ConstVecMap wb(v + L.wb, L.h);
  MlpCache c;
  c.h1 = (w1.col(state) + b1).array().tanh();
  c.h2 = (w2 * c.h1 + b2).array().tanh();
  c.grad_row = w3 * c.h2 + b3;
  c.raw_beta = wb.dot(c.h2) + v[L.bb];
  c.beta = softplus(c.raw_beta);
  return c;
}

void check_state(const ModelParams& p, int state) {
  if (state < 0 || state >= p.n)
    fail(ErrorKind::kParameter, "state index out of range");
}

// Per-sample loss terms in the head orientation.
struct Targets {
  Vector score;     // beta multiplier
  Vector velocity;  // already divided by tau when applicable
};

Targets targets_for(const GeodesicTable& geo, const BatchItem& item,
                    std::optional<double> tau, SignConvention sign) {
  if (item.interval < 0 || static_cast<std::size_t>(item.interval) >= geo.intervals())
    fail(ErrorKind::kParameter, "batch refers to a missing geodesic interval");
  if (geo.failed[item.interval])
    fail(ErrorKind::kParameter, "batch refers to a failed geodesic interval");
  const Density& base = geo.densities[item.interval + 1];
  const int x = item.state;
  const Vector logr = base.rho.array().log();
  Targets t;
  // Head orientation: entry y holds f(y) - f(x).
  t.score = logr.array() - logr(x);
  t.velocity = -geo.velocities[item.interval].phi.row(x).transpose();
  double scale = 1.0;
  if (geo.convention == VelocityConvention::kDisplacement)
    scale = 1.0 / tau.value_or(geo.dt[item.interval]);
  t.velocity *= scale;
  if (sign == SignConvention::kMixedLiteral) {
    t.score = -t.score;
    t.velocity = -t.velocity;
  }
  return t;
}

}  // namespace

ModelParams ModelParams::tabular(int n, double initial_beta) {
  if (n < 1) fail(ErrorKind::kParameter, "model needs n >= 1");
  ModelParams p;
  p.variant = ModelVariant::kTabular;
  p.n = n;
  p.hidden = 0;
  p.values.assign(n + 1, 0.0);
  p.values[n] = softplus_inverse(initial_beta);
  return p;
}

ModelParams ModelParams::mlp(int n, std::uint64_t seed, int hidden) {
  if (n < 1 || hidden < 1) fail(ErrorKind::kParameter, "mlp needs n, hidden >= 1");
  ModelParams p;
  p.variant = ModelVariant::kMlp;
  p.n = n;
  p.hidden = hidden;
  const MlpLayout L(n, hidden);
  p.values.assign(L.total, 0.0);
  Rng rng(derive_seed(seed, stream_tag("mlp-init")));
  // Glorot-uniform weights, zero biases.
  auto fill = [&](std::size_t off, int rows, int cols) {
    const double a = std::sqrt(6.0 / (rows + cols));
    for (std::size_t k = 0; k < static_cast<std::size_t>(rows) * cols; ++k)
      p.values[off + k] = rng.uniform(-a, a);
  };
  fill(L.w1, hidden, n);
  fill(L.w2, hidden, hidden);
  fill(L.w3, n, hidden);
  fill(L.wb, 1, hidden);
  return p;
}

double ModelParams::beta() const {
  if (variant == ModelVariant::kTabular) return softplus(values[n]);
  double sum = 0.0;
  for (int x = 0; x < n; ++x) sum += mlp_forward(*this, x).beta;
  return sum / n;
}

Vector ModelParams::potential() const {
  Vector v(n);
  if (variant == ModelVariant::kTabular) {
    for (int i = 0; i < n; ++i) v(i) = values[i];
  } else {
    // Least-squares potential for rows G[x][y] ~ V(y) - V(x): column means.
    v.setZero();
    for (int x = 0; x < n; ++x) v += mlp_forward(*this, x).grad_row;
    v /= n;
  }
  v.array() -= v.mean();
  return v;
}

ForwardResult model_forward(const ModelParams& params, int state) {
  check_state(params, state);
  ForwardResult r;
  if (params.variant == ModelVariant::kTabular) {
    const int n = params.n;
    r.grad_row.resize(n);
    for (int y = 0; y < n; ++y) r.grad_row(y) = params.values[y] - params.values[state];
    r.beta = softplus(params.values[n]);
  } else {
    auto c = mlp_forward(params, state);
    r.grad_row = std::move(c.grad_row);
    r.beta = c.beta;
  }
  return r;
}

double loss(const ModelParams& params, std::span<const BatchItem> batch,
            const GeodesicTable& geo, std::optional<double> tau,
            SignConvention sign) {
  if (batch.empty()) fail(ErrorKind::kParameter, "empty batch");
  double total = 0.0;
  for (const auto& item : batch) {
    check_state(params, item.state);
    const Targets t = targets_for(geo, item, tau, sign);
    const ForwardResult f = model_forward(params, item.state);
    total += (f.grad_row + f.beta * t.score - t.velocity).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

std::vector<double> loss_gradient(const ModelParams& params,
                                  std::span<const BatchItem> batch,
                                  const GeodesicTable& geo,
                                  std::optional<double> tau, SignConvention sign,
                                  double* loss_out) {
  if (batch.empty()) fail(ErrorKind::kParameter, "empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<double> grad(params.size(), 0.0);
  double total = 0.0;
  const int n = params.n;

  if (params.variant == ModelVariant::kTabular) {
    const double raw = params.values[n];
    const double beta = softplus(raw);
    double dbeta = 0.0;
    for (const auto& item : batch) {
      check_state(params, item.state);
      const Targets t = targets_for(geo, item, tau, sign);
      const int x = item.state;
      Vector r(n);
      for (int y = 0; y < n; ++y)
        r(y) = params.values[y] - params.values[x] + beta * t.score(y) - t.velocity(y);
      total += r.squaredNorm();
      const Vector dr = 2.0 * inv_b * r;
      for (int y = 0; y < n; ++y) grad[y] += dr(y);
      grad[x] -= dr.sum();
      dbeta += dr.dot(t.score);
    }
    grad[n] = dbeta * sigmoid(raw);
  } else {
    const MlpLayout L(n, params.hidden);
    const double* v = params.values.data();
    ConstMap w2(v + L.w2, L.h, L.h);
    ConstMap w3(v + L.w3, L.n, L.h);
    ConstVecMap wb(v + L.wb, L.h);
    double* g = grad.data();
    MutMap gw1(g + L.w1, L.h, L.n);
    MutVecMap gb1(g + L.b1, L.h);
    MutMap gw2(g + L.w2, L.h, L.h);
    MutVecMap gb2(g + L.b2, L.h);
    MutMap gw3(g + L.w3, L.n, L.h);
    MutVecMap gb3(g + L.b3, L.n);
    MutVecMap gwb(g + L.wb, L.h);
    for (const auto& item : batch) {
      check_state(params, item.state);
      const Targets t = targets_for(geo, item, tau, sign);
      const MlpCache c = mlp_forward(params, item.state);
      const Vector r = c.grad_row + c.beta * t.score - t.velocity;
      total += r.squaredNorm();
      const Vector dout = 2.0 * inv_b * r;
      const double draw = dout.dot(t.score) * sigmoid(c.raw_beta);
      gw3.noalias() += dout * c.h2.transpose();
      gb3 += dout;
      gwb += draw * c.h2;
      g[L.bb] += draw;
      const Vector dz2 =
          ((w3.transpose() * dout + draw * wb).array() * (1.0 - c.h2.array().square()))
              .matrix();
      gw2.noalias() += dz2 * c.h1.transpose();
      gb2 += dz2;
      const Vector dz1 =
          ((w2.transpose() * dz2).array() * (1.0 - c.h1.array().square())).matrix();
      gw1.col(item.state) += dz1;
      gb1 += dz1;
    }
  }
  if (loss_out) *loss_out = total * inv_b;
  return grad;
}

void check_config(const TrainConfig& c) {
  auto require = [](bool ok, const char* msg) {
    if (!ok) fail(ErrorKind::kParameter, msg);
  };
  require(c.epochs > 0, "epochs must be positive");
  require(c.batch_size > 0, "batch_size must be positive");
  require(c.learning_rate > 0.0, "learning_rate must be positive");
  require(c.adam_beta1 > 0.0 && c.adam_beta1 < 1.0, "adam_beta1 must lie in (0,1)");
  require(c.adam_beta2 > 0.0 && c.adam_beta2 < 1.0, "adam_beta2 must lie in (0,1)");
  require(c.adam_eps > 0.0, "adam_eps must be positive");
  require(c.weight_decay >= 0.0, "weight_decay must be nonnegative");
  require(!c.tau || *c.tau > 0.0, "tau must be positive");
  require(c.hidden > 0, "hidden width must be positive");
  require(c.initial_beta > 0.0, "initial_beta must be positive");
}

void adam_step(AdamState& state, std::vector<double>& params,
               const std::vector<double>& gradient, const TrainConfig& config) {
  if (gradient.size() != params.size())
    fail(ErrorKind::kShape, "adam_step: gradient/parameter size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * gradient[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * gradient[i] * gradient[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= config.learning_rate *
                 (mhat / (std::sqrt(vhat) + config.adam_eps) +
                  config.weight_decay * params[i]);
  }
}

TrainResult train(const SnapshotDataset& dataset, const MarkovChain& chain,
                  const TrainConfig& config) {
  check_config(config);
  if (dataset.steps() < 2)
    fail(ErrorKind::kParameter, "training needs at least two time points");
  GeodesicTable table = precompute_geodesics(dataset, chain, config.precompute);
  return train(std::move(table), chain, dataset.total_per_step, config);
}

TrainResult train(GeodesicTable table, const MarkovChain& chain,
                  std::int64_t samples_per_step, const TrainConfig& config) {
  check_config(config);
  const std::vector<int> valid = table.valid_intervals();
  if (valid.empty())
    fail(ErrorKind::kNumerical, "every geodesic interval failed; nothing to train on");
  const int n = chain.n();

  // Sampling distribution for interval k is rho_hat(t_{k+1}) * pi.
  std::vector<std::vector<double>> cdfs(table.intervals());
  for (int k : valid) {
    const Vector p = table.densities[k + 1].probabilities(chain.pi);
    auto& cdf = cdfs[k];
    cdf.resize(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) cdf[i] = (acc += p(i));
  }

  TrainResult result;
  result.params = config.variant == ModelVariant::kTabular
                      ? ModelParams::tabular(n, config.initial_beta)
                      : ModelParams::mlp(n, config.seed, config.hidden);

  const double total_samples =
      static_cast<double>(std::max<std::int64_t>(samples_per_step, 1)) *
      static_cast<double>(valid.size());
  long steps_per_epoch =
      std::max(1L, static_cast<long>(std::ceil(total_samples / config.batch_size)));
  long total_steps = steps_per_epoch * config.epochs;
  if (config.max_steps > 0) total_steps = std::min(total_steps, config.max_steps);

  AdamState adam;
  std::vector<BatchItem> batch(config.batch_size);
  const std::uint64_t train_stream = stream_tag("train-batch");
  result.log.reserve(total_steps);
  for (long step = 0; step < total_steps; ++step) {
    Rng rng(derive_seed(config.seed, train_stream, static_cast<std::uint64_t>(step)));
    for (auto& item : batch) {
      item.interval = valid[rng.below(valid.size())];
      const auto& cdf = cdfs[item.interval];
      const double u = rng.uniform() * cdf.back();
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      item.state = static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), n - 1));
    }
    double batch_loss = 0.0;
    const auto grad = loss_gradient(result.params, batch, table, config.tau,
                                    config.sign, &batch_loss);
    adam_step(adam, result.params.values, grad, config);
    double beta = result.params.variant == ModelVariant::kTabular
                      ? softplus(result.params.values[n])
                      : std::numeric_limits<double>::quiet_NaN();
    result.log.push_back({step, batch_loss, beta});
  }
  if (result.params.variant == ModelVariant::kMlp && !result.log.empty())
    result.log.back().beta = result.params.beta();
  result.table = std::move(table);
  return result;
}

bool detect_collapse(const DensityTrajectory& pred, const Vector& pi,
                     const DensityTrajectory* truth, double threshold) {
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double peak = pred.densities[k].probabilities(pi).maxCoeff();
    if (peak < threshold) continue;
    if (truth && k < truth->size() &&
        truth->densities[k].probabilities(pi).maxCoeff() >= threshold)
      continue;
    return true;
  }
  return false;
}

}  // namespace wkflow
