#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "wkflow/learning.hpp"

namespace wkflow {
namespace {

using testing::random_chain;
using testing::random_density;
using testing::random_probability;
using testing::random_vector;

// Exact-density geodesic table of a short free-energy flow.
GeodesicTable small_table(Rng& rng, int n, int steps = 6) {
  const auto chain = random_chain(rng, n);
  const FreeEnergyParams truth{random_vector(rng, n), rng.uniform(0.05, 1.0)};
  const auto traj = evolve_density(chain, random_probability(rng, n), truth, uniform_grid(0.5, steps));
  return precompute_geodesics(exact_snapshots(traj, chain), chain);
}

std::vector<BatchItem> random_batch(Rng& rng, int n, int intervals, int size) {
  std::vector<BatchItem> batch(size);
  for (auto& b : batch) {
    b.state = static_cast<int>(rng.below(n));
    b.interval = static_cast<int>(rng.below(intervals));
  }
  return batch;
}

ModelParams random_params(Rng& rng, ModelVariant variant, int n) {
  if (variant == ModelVariant::kTabular) {
    auto p = ModelParams::tabular(n);
    for (auto& v : p.values) v = rng.uniform(-1, 1);
    return p;
  }
  auto p = ModelParams::mlp(n, rng.next_u64(), 6);
  for (auto& v : p.values) v += rng.uniform(-0.3, 0.3);
  return p;
}

TEST(Forward, Examples) {
  auto zero = ModelParams::tabular(3);
  EXPECT_EQ(model_forward(zero, 1).grad_row, Vector::Zero(3));
  EXPECT_NEAR(model_forward(zero, 1).beta, std::log(2.0), 1e-15);

  auto p = ModelParams::tabular(2);
  p.values[0] = 1.0;
  const auto f = model_forward(p, 0);
  EXPECT_EQ(f.grad_row(0), 0.0);
  EXPECT_EQ(f.grad_row(1), -1.0);
  EXPECT_THROW(model_forward(p, 2), Error);

  const auto m = ModelParams::mlp(4, 9, 8);
  for (int x = 0; x < 4; ++x) EXPECT_GT(model_forward(m, x).beta, 0.0);
  EXPECT_NEAR(softplus(softplus_inverse(0.37)), 0.37, 1e-15);
  EXPECT_NEAR(softplus(800.0), 800.0, 1e-12);
}

TEST(Loss, PlantedVelocityGivesZeroLossAndGradient) {
  Rng rng(1);
  const int n = 5;
  auto geo = small_table(rng, n);
  const Vector v = random_vector(rng, n);
  const double beta = 0.3, tau = 0.1;
  for (std::size_t k = 0; k < geo.intervals(); ++k) {
    const Vector f = v.array() + beta * geo.densities[k + 1].rho.array().log();
    geo.velocities[k] = EdgeField{tau * discrete_gradient(f).phi};
  }
  auto params = ModelParams::tabular(n, beta);
  for (int i = 0; i < n; ++i) params.values[i] = v(i);
  const auto batch = random_batch(rng, n, static_cast<int>(geo.intervals()), 40);
  EXPECT_LE(loss(params, batch, geo, tau), 1e-24);
  for (double g : loss_gradient(params, batch, geo, tau)) EXPECT_LE(std::abs(g), 1e-12);
}

TEST(Loss, ZeroModelOnHeatDataEqualsDirectEvaluation) {
  Rng rng(2);
  const int n = 4;
  const auto chain = random_chain(rng, n);
  const auto traj = heat_flow(chain, random_density(rng, chain.pi), uniform_grid(0.2, 4));
  const auto geo = precompute_geodesics(exact_snapshots(traj, chain), chain);
  auto params = ModelParams::tabular(n, 1.0);
  params.values[n] = -60.0;  // beta ~ 1e-26
  const auto batch = random_batch(rng, n, 4, 25);
  double oracle = 0.0;
  for (const auto& b : batch) {
    // Residual row is -v(x, .) / dt in the head orientation.
    const Vector row = geo.velocities[b.interval].phi.row(b.state) / geo.dt[b.interval];
    oracle += row.squaredNorm();
  }
  oracle /= static_cast<double>(batch.size());
  EXPECT_NEAR(loss(params, batch, geo, std::nullopt), oracle, 1e-12 * oracle);
}

TEST(Loss, RejectsFailedOrMissingIntervals) {
  Rng rng(3);
  auto geo = small_table(rng, 4);
  const auto p = ModelParams::tabular(4);
  const std::vector<BatchItem> missing{{0, 99}};
  EXPECT_THROW(loss(p, missing, geo, std::nullopt), Error);
  geo.failed[1] = true;
  const std::vector<BatchItem> failed{{0, 1}};
  EXPECT_THROW(loss(p, failed, geo, std::nullopt), Error);
}

class GradientCheck : public ::testing::TestWithParam<ModelVariant> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  Rng rng(GetParam() == ModelVariant::kTabular ? 4 : 5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const auto geo = small_table(rng, n);
    const auto params = random_params(rng, GetParam(), n);
    const auto batch = random_batch(rng, n, static_cast<int>(geo.intervals()), 8);
    const std::optional<double> tau = trial % 2 ? std::optional<double>(0.07) : std::nullopt;
    const auto grad = loss_gradient(params, batch, geo, tau);
    const double h = 1e-5;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto plus = params, minus = params;
      plus.values[i] += h;
      minus.values[i] -= h;
      const double fd = (loss(plus, batch, geo, tau) - loss(minus, batch, geo, tau)) / (2 * h);
      EXPECT_NEAR(grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "parameter " << i;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Variants, GradientCheck,
                         ::testing::Values(ModelVariant::kTabular, ModelVariant::kMlp));

TEST(Gradient, TabularPotentialEntriesSumToZero) {
  Rng rng(6);
  const auto geo = small_table(rng, 6);
  const auto params = random_params(rng, ModelVariant::kTabular, 6);
  const auto grad = loss_gradient(params, random_batch(rng, 6, 6, 30), geo, std::nullopt);
  double sum = 0.0;
  for (int i = 0; i < 6; ++i) sum += grad[i];
  EXPECT_NEAR(sum, 0.0, 1e-12);
}

TEST(Gradient, GaugeInvariance) {
  Rng rng(7);
  const auto geo = small_table(rng, 5);
  const auto params = random_params(rng, ModelVariant::kTabular, 5);
  auto shifted = params;
  for (int i = 0; i < 5; ++i) shifted.values[i] += 3.25;
  const auto batch = random_batch(rng, 5, 6, 20);
  for (int x = 0; x < 5; ++x)
    EXPECT_LE((model_forward(params, x).grad_row - model_forward(shifted, x).grad_row)
                  .cwiseAbs()
                  .maxCoeff(),
              1e-14);
  EXPECT_NEAR(loss(params, batch, geo, std::nullopt), loss(shifted, batch, geo, std::nullopt),
              1e-12);
  const auto a = loss_gradient(params, batch, geo, std::nullopt);
  const auto b = loss_gradient(shifted, batch, geo, std::nullopt);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  EXPECT_LE((params.potential() - shifted.potential()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Adam, ZeroGradientWithoutDecayIsIdentity) {
  TrainConfig c;
  c.weight_decay = 0.0;
  AdamState s;
  std::vector<double> p{1.0, -2.0, 0.5};
  const auto before = p;
  adam_step(s, p, {0.0, 0.0, 0.0}, c);
  EXPECT_EQ(p, before);
}

TEST(Adam, FirstStepMovesEachCoordinateByTheLearningRate) {
  TrainConfig c;
  c.weight_decay = 0.0;
  AdamState s;
  std::vector<double> p{0.0, 0.0, 0.0};
  adam_step(s, p, {3.0, -0.01, 1e3}, c);
  EXPECT_NEAR(p[0], -c.learning_rate, 1e-10);
  EXPECT_NEAR(p[1], c.learning_rate, 1e-8);
  EXPECT_NEAR(p[2], -c.learning_rate, 1e-10);
}

TEST(Adam, MatchesScalarReference) {
  TrainConfig c;
  c.learning_rate = 0.01;
  c.weight_decay = 0.1;
  AdamState s;
  std::vector<double> p{0.7};
  double theta = 0.7, m = 0.0, v = 0.0;
  const double grads[] = {0.5, 0.5, -1.5, 2.0, 0.0};
  for (int t = 1; t <= 5; ++t) {
    const double g = grads[t - 1];
    m = 0.9 * m + (1 - 0.9) * g;
    v = 0.999 * v + (1 - 0.999) * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    theta -= 0.01 * (mh / (std::sqrt(vh) + 1e-8) + 0.1 * theta);
    adam_step(s, p, {g}, c);
    EXPECT_DOUBLE_EQ(p[0], theta) << "step " << t;
    EXPECT_DOUBLE_EQ(s.v[0], v);
  }
}

TEST(Train, RecoversDriftOnCompleteGraph) {
  Rng rng(8);
  const auto chain = to_markov_chain(generate_graph(GraphClass::kComplete, 5, {}, 3));
  const FreeEnergyParams truth{random_vector(rng, 5), 0.1};
  const auto r = testing::closed_loop(chain, random_probability(rng, 5), truth, 100);
  EXPECT_LE(r.gradient_error, 0.05);
  EXPECT_LE(r.beta_relative_error, 0.2);
}

TEST(Train, RecoversHeatFlow) {
  Rng rng(9);
  const auto chain = to_markov_chain(generate_graph(GraphClass::kComplete, 5, {}, 4));
  const FreeEnergyParams truth{Vector::Zero(5), 1.0};
  const auto r = testing::closed_loop(chain, random_probability(rng, 5), truth, 100);
  EXPECT_LE(r.gradient_error, 0.05);
  EXPECT_LE(r.beta_relative_error, 0.2);
}

TEST(Train, MixedLiteralSignsFitTheReversedPotential) {
  Rng rng(10);
  const auto chain = to_markov_chain(generate_graph(GraphClass::kComplete, 5, {}, 5));
  const FreeEnergyParams truth{random_vector(rng, 5), 0.1};
  TrainConfig config;
  config.sign = SignConvention::kMixedLiteral;
  const auto traj = evolve_density(chain, random_probability(rng, 5), truth, uniform_grid(1.0, 100));
  const auto res = train(exact_snapshots(traj, chain), chain, config);
  const Vector centred = truth.V.array() - truth.V.mean();
  EXPECT_LE((res.params.potential() + centred).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Train, IsDeterministicAndLogsEveryStep) {
  Rng rng(11);
  const auto chain = random_chain(rng, 5);
  const auto traj = evolve_density(chain, random_probability(rng, 5),
                                   {random_vector(rng, 5), 0.2}, uniform_grid(1.0, 10));
  const auto ds = sample_snapshots(traj, chain, 1000, 5);
  TrainConfig config;
  config.seed = 77;
  const auto a = train(ds, chain, config);
  const auto b = train(ds, chain, config);
  EXPECT_EQ(a.params.values, b.params.values);
  // 2 epochs of ceil(1000 * 10 / 128) steps.
  EXPECT_EQ(a.log.size(), 2u * 79u);
  config.seed = 78;
  EXPECT_NE(train(ds, chain, config).params.values, a.params.values);
  config.max_steps = 5;
  EXPECT_EQ(train(ds, chain, config).log.size(), 5u);
}

TEST(Train, LossTrendDecreases) {
  Rng rng(12);
  const auto chain = random_chain(rng, 6);
  const auto traj = evolve_density(chain, random_probability(rng, 6),
                                   {random_vector(rng, 6), 0.1}, uniform_grid(1.0, 50));
  const auto res = train(exact_snapshots(traj, chain), chain, TrainConfig{});
  auto window_mean = [&](std::size_t start) {
    double s = 0.0;
    for (std::size_t i = start; i < start + 50; ++i) s += res.log[i].loss;
    return s / 50.0;
  };
  double previous = window_mean(0);
  for (std::size_t start = 500; start + 50 <= res.log.size() / 2; start += 500) {
    const double current = window_mean(start);
    EXPECT_LE(current, previous * 1.05) << "window at " << start;
    previous = current;
  }
  for (const auto& e : res.log) EXPECT_GT(e.beta, 0.0);
}

TEST(Train, AllIntervalsFailedIsAnError) {
  Rng rng(13);
  auto geo = small_table(rng, 4);
  std::fill(geo.failed.begin(), geo.failed.end(), true);
  const auto chain = random_chain(rng, 4);
  try {
    train(geo, chain, 100, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
  }
}

TEST(Config, RejectsNonPositiveFields) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(check_config(c), Error);
  c = {};
  c.tau = -1.0;
  EXPECT_THROW(check_config(c), Error);
  c = {};
  c.adam_beta2 = 1.0;
  EXPECT_THROW(check_config(c), Error);
  EXPECT_EQ(TrainConfig{}.epochs, 2);
  EXPECT_EQ(TrainConfig{}.batch_size, 128);
  EXPECT_EQ(TrainConfig{}.learning_rate, 5e-4);
}

DensityTrajectory trajectory_of(const std::vector<Vector>& probs, const Vector& pi) {
  DensityTrajectory t;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    t.grid.push_back(static_cast<double>(k));
    t.densities.push_back(Density{probs[k].cwiseQuotient(pi)});
  }
  return t;
}

TEST(Collapse, Examples) {
  const Vector pi = Vector::Constant(3, 1.0 / 3);
  const Vector u = Vector::Constant(3, 1.0 / 3);
  Vector peaked(3), dirac(3);
  peaked << 0.9, 0.05, 0.05;
  dirac << 0.995, 0.0025, 0.0025;
  const auto uniform = trajectory_of({u, u, u}, pi);
  const auto collapsing = trajectory_of({u, peaked, dirac}, pi);
  EXPECT_FALSE(detect_collapse(uniform, pi));
  EXPECT_TRUE(detect_collapse(collapsing, pi));
  EXPECT_FALSE(detect_collapse(collapsing, pi, &collapsing));
  EXPECT_TRUE(detect_collapse(collapsing, pi, &uniform));
}

}  // namespace
}  // namespace wkflow
