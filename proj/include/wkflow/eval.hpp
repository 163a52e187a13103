#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wkflow/graph.hpp"
#include "wkflow/io.hpp"
#include "wkflow/learning.hpp"

namespace wkflow {

/// (1/sqrt 2) * || sqrt(p) - sqrt(q) ||_2. Throws kDomain for negative
/// entries or sums off 1 by more than 1e-8, kShape for unequal lengths.
double hellinger(const Vector& p, const Vector& q);

/// Mean over grid points of the Hellinger distance between rho * pi.
double time_avg_hellinger(const DensityTrajectory& pred, const DensityTrajectory& truth,
                          const MarkovChain& chain);

/// Expected Hellinger distance between a multinomial(M, p) empirical law and
/// p, to leading order: sqrt((n - 1) / (8 M)).
double sampling_noise_floor(int n, std::int64_t samples);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// How the evaluated parameters are obtained.
enum class EvalMode {
  kTrained,    // fit from sampled snapshots
  kOracle,     // ground-truth (V, beta)
  kUntrained,  // a freshly initialised model with a random potential
};

std::string to_string(EvalMode m);
EvalMode parse_eval_mode(std::string_view s);

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<GraphClass> classes{kAllGraphClasses.begin(), kAllGraphClasses.end()};
  std::vector<int> sizes{6};
  std::vector<double> betas{0.01, 0.1, 0.2};
  double v_lo = -1.0;
  double v_hi = 1.0;
  std::int64_t samples = 10000;
  int seeds = 5;
  double horizon = 1.0;
  int steps = 100;
  bool log_spaced = false;
  TrainConfig train;
  EvalMode mode = EvalMode::kTrained;
  GraphParams graph;
  std::uint64_t root_seed = 0;
};

void check_config(const ExperimentConfig& config);
Json to_json(const ExperimentConfig& config);
/// Keys absent from `j` keep their defaults.
ExperimentConfig experiment_config_from_json(const Json& j);

std::vector<double> make_grid(const ExperimentConfig& config);

struct CellKey {
  GraphClass cls = GraphClass::kComplete;
  int n = 0;
  double beta = 0.0;

  std::string label() const;
};

/// Seeds for one run; independent of the evaluation mode so that trained,
/// oracle and untrained sweeps see the same problems.
struct RunSeeds {
  std::uint64_t run = 0;
  std::uint64_t graph = 0;
  std::uint64_t problem = 0;
  std::uint64_t snapshots = 0;
  std::uint64_t train = 0;
};

RunSeeds run_seeds(std::uint64_t root, const CellKey& cell, int seed_index);

struct RunRecord {
  CellKey cell;
  int seed_index = 0;
  RunSeeds seeds;
  bool ok = false;
  std::string error;
  double hellinger = 0.0;
  bool collapsed = false;
  double learned_beta = 0.0;
  double potential_error = 0.0;  // max-abs over centred potentials
  int failed_intervals = 0;
  std::string chain_sha256;
};

RunRecord run_single(const ExperimentConfig& config, const CellKey& cell, int seed_index);

struct CellSummary {
  CellKey cell;
  std::vector<std::uint64_t> seeds;
  int stable = 0;
  int collapsed = 0;
  int failed = 0;
  double mean = 0.0;
  double sd = 0.0;
};

struct GroupSummary {
  double key = 0.0;
  int runs = 0;
  double mean = 0.0;
  double sd = 0.0;
};

struct Report {
  ExperimentConfig config;
  std::vector<RunRecord> runs;
  std::vector<CellSummary> cells;
  std::vector<GroupSummary> per_beta;
  std::vector<GroupSummary> per_size;
  /// Rank correlation between n and per-run Hellinger over stable runs.
  double size_spearman = 0.0;
  int collapsed = 0;
  int stable = 0;
};

/// Every (class, n, beta, seed) run in deterministic order.
std::vector<std::pair<CellKey, int>> experiment_plan(const ExperimentConfig& config);

/// Aggregates run records (in any order) into a report sorted by plan order.
Report assemble_report(const ExperimentConfig& config, std::vector<RunRecord> runs);

/// Optional hooks for resumable sweeps. `cached` may supply a finished
/// record; `completed` is called (serialised) after each fresh run.
struct RunHooks {
  std::function<std::optional<RunRecord>(const CellKey&, int)> cached;
  std::function<void(const RunRecord&)> completed;
};

/// Runs the whole sweep on up to `jobs` threads.
Report run_experiment(const ExperimentConfig& config, int jobs = 1,
                      const RunHooks& hooks = {});

Json to_json(const RunRecord& r);
RunRecord run_record_from_json(const Json& j);
Json to_json(const Report& report);
std::string report_csv(const Report& report);
/// Long format: class,n,beta,seed,metric,value.
std::string plot_csv(const Report& report);

/// Reference values of the OpenFIM baseline at n <= 6, for display only.
struct BaselineRow {
  double beta;
  double ours_mean, ours_sd;
  double openfim_mean, openfim_sd;
};
inline constexpr BaselineRow kPublishedTable[] = {
    {0.01, 0.066, 0.031, 0.142, 0.048},
    {0.10, 0.059, 0.029, 0.150, 0.061},
    {0.20, 0.069, 0.031, 0.159, 0.097},
};

}  // namespace wkflow
