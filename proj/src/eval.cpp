#include "wkflow/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace wkflow {

namespace {

void check_probability(const Vector& p, const char* which) {
  if (p.size() == 0) fail(ErrorKind::kDomain, std::string(which) + " is empty");
  if (p.minCoeff() < 0.0)
    fail(ErrorKind::kDomain, std::string(which) + " has a negative entry");
  if (std::abs(p.sum() - 1.0) > 1e-8)
    fail(ErrorKind::kDomain, std::string(which) + " does not sum to 1");
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

// Sample standard deviation (n - 1 denominator); zero for a single value.
MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd r;
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace

double hellinger(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) fail(ErrorKind::kShape, "hellinger: length mismatch");
  check_probability(p, "p");
  check_probability(q, "q");
  const double s = (p.array().sqrt() - q.array().sqrt()).square().sum();
  return std::min(1.0, std::sqrt(0.5 * s));
}

double time_avg_hellinger(const DensityTrajectory& pred, const DensityTrajectory& truth,
                          const MarkovChain& chain) {
  if (pred.grid.size() != truth.grid.size())
    fail(ErrorKind::kShape, "trajectories have different grid lengths");
  for (std::size_t k = 0; k < pred.grid.size(); ++k)
    if (std::abs(pred.grid[k] - truth.grid[k]) > 1e-12 * (1.0 + std::abs(truth.grid[k])))
      fail(ErrorKind::kShape, "trajectories are on different time grids");
  if (pred.size() == 0 || pred.densities.size() != pred.size() ||
      truth.densities.size() != truth.size())
    fail(ErrorKind::kShape, "trajectory is empty or inconsistent");
  double total = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (pred.densities[k].n() != chain.n() || truth.densities[k].n() != chain.n())
      fail(ErrorKind::kShape, "trajectory dimension does not match the chain");
    total += hellinger(pred.densities[k].probabilities(chain.pi),
                       truth.densities[k].probabilities(chain.pi));
  }
  return total / static_cast<double>(pred.size());
}

double sampling_noise_floor(int n, std::int64_t samples) {
  return std::sqrt(static_cast<double>(n - 1) / (8.0 * static_cast<double>(samples)));
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    fail(ErrorKind::kShape, "spearman needs two equal-length samples of size >= 2");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const MeanSd mx = mean_sd(rx), my = mean_sd(ry);
  if (mx.sd == 0.0 || my.sd == 0.0) return 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) cov += (rx[i] - mx.mean) * (ry[i] - my.mean);
  cov /= static_cast<double>(x.size() - 1);
  return cov / (mx.sd * my.sd);
}

std::string to_string(EvalMode m) {
  switch (m) {
    case EvalMode::kTrained: return "trained";
    case EvalMode::kOracle: return "oracle";
    case EvalMode::kUntrained: return "untrained";
  }
  return "trained";
}

EvalMode parse_eval_mode(std::string_view s) {
  if (s == "trained") return EvalMode::kTrained;
  if (s == "oracle") return EvalMode::kOracle;
  if (s == "untrained") return EvalMode::kUntrained;
  fail(ErrorKind::kParameter, "unknown eval mode '" + std::string(s) + "'");
}

void check_config(const ExperimentConfig& c) {
  if (c.classes.empty()) fail(ErrorKind::kParameter, "experiment needs at least one graph class");
  if (c.sizes.empty()) fail(ErrorKind::kParameter, "experiment needs at least one size");
  if (c.betas.empty()) fail(ErrorKind::kParameter, "experiment needs at least one beta");
  for (int n : c.sizes)
    if (n < 2) fail(ErrorKind::kParameter, "graph sizes must be >= 2");
  for (double b : c.betas)
    if (!(b > 0.0)) fail(ErrorKind::kParameter, "beta levels must be positive");
  if (!(c.v_hi >= c.v_lo)) fail(ErrorKind::kParameter, "potential range is empty");
  if (c.samples < 1) fail(ErrorKind::kParameter, "samples must be >= 1");
  if (c.seeds < 1) fail(ErrorKind::kParameter, "seeds per cell must be >= 1");
  if (!(c.horizon > 0.0) || c.steps < 1) fail(ErrorKind::kParameter, "invalid time grid");
  check_config(c.train);
}

std::vector<double> make_grid(const ExperimentConfig& c) {
  return c.log_spaced ? log_grid(c.horizon, c.steps) : uniform_grid(c.horizon, c.steps);
}

Json to_json(const ExperimentConfig& c) {
  Json classes = Json::array();
  for (auto cls : c.classes) classes.push_back(std::string(to_string(cls)));
  return {{"name", c.name},
          {"classes", classes},
          {"sizes", c.sizes},
          {"betas", c.betas},
          {"v_range", {c.v_lo, c.v_hi}},
          {"samples", c.samples},
          {"seeds", c.seeds},
          {"grid", {{"horizon", c.horizon},
                    {"steps", c.steps},
                    {"spacing", c.log_spaced ? "log" : "uniform"}}},
          {"train", to_json(c.train)},
          {"mode", to_string(c.mode)},
          {"graph", to_json(c.graph)},
          {"root_seed", c.root_seed}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::kParameter, "experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    if (j.contains("name")) c.name = j["name"].get<std::string>();
    if (j.contains("classes")) {
      c.classes.clear();
      if (j["classes"].is_string() && j["classes"].get<std::string>() == "all") {
        c.classes.assign(kAllGraphClasses.begin(), kAllGraphClasses.end());
      } else {
        for (const auto& s : j["classes"]) c.classes.push_back(parse_graph_class(s.get<std::string>()));
      }
    }
    if (j.contains("sizes")) c.sizes = j["sizes"].get<std::vector<int>>();
    if (j.contains("betas")) c.betas = j["betas"].get<std::vector<double>>();
    if (j.contains("v_range")) {
      const auto r = j["v_range"].get<std::vector<double>>();
      if (r.size() != 2) fail(ErrorKind::kParameter, "v_range must be [lo, hi]");
      c.v_lo = r[0];
      c.v_hi = r[1];
    }
    if (j.contains("samples")) c.samples = j["samples"].get<std::int64_t>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<int>();
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      if (g.contains("horizon")) c.horizon = g["horizon"].get<double>();
      if (g.contains("steps")) c.steps = g["steps"].get<int>();
      if (g.contains("spacing")) {
        const auto s = g["spacing"].get<std::string>();
        if (s != "uniform" && s != "log") fail(ErrorKind::kParameter, "grid spacing must be uniform or log");
        c.log_spaced = s == "log";
      }
    }
    if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
    if (j.contains("mode")) c.mode = parse_eval_mode(j["mode"].get<std::string>());
    if (j.contains("graph")) c.graph = graph_params_from_json(j["graph"], c.graph);
    if (j.contains("root_seed")) c.root_seed = j["root_seed"].get<std::uint64_t>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::kParameter, std::string("malformed experiment config: ") + e.what());
  }
  check_config(c);
  return c;
}

std::string CellKey::label() const {
  return std::string(to_string(cls)) + "_n" + std::to_string(n) + "_b" + fmt(beta);
}

RunSeeds run_seeds(std::uint64_t root, const CellKey& cell, int seed_index) {
  RunSeeds s;
  const std::uint64_t cell_seed = derive_seed(root, stream_tag("cell:" + cell.label()));
  s.run = derive_seed(cell_seed, stream_tag("seed"), static_cast<std::uint64_t>(seed_index));
  s.graph = derive_seed(s.run, stream_tag("graph"));
  s.problem = derive_seed(s.run, stream_tag("problem"));
  s.snapshots = derive_seed(s.run, stream_tag("snapshots"));
  s.train = derive_seed(s.run, stream_tag("train"));
  return s;
}

namespace {

Vector centred(const Vector& v) { return v.array() - v.mean(); }

FreeEnergyParams untrained_params(const ExperimentConfig& config, int n, std::uint64_t seed) {
  if (config.train.variant == ModelVariant::kMlp)
    return ModelParams::mlp(n, seed, config.train.hidden).free_energy();
  Rng rng(derive_seed(seed, stream_tag("untrained")));
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(config.v_lo, config.v_hi);
  return {v, config.train.initial_beta};
}

}  // namespace

RunRecord run_single(const ExperimentConfig& config, const CellKey& cell, int seed_index) {
  RunRecord rec;
  rec.cell = cell;
  rec.seed_index = seed_index;
  rec.seeds = run_seeds(config.root_seed, cell, seed_index);
  try {
    const WeightedGraph graph = generate_graph(cell.cls, cell.n, config.graph, rec.seeds.graph);
    const MarkovChain chain = to_markov_chain(graph);
    rec.chain_sha256 = sha256_hex(to_json(chain).dump());
    const int n = chain.n();

    // Ground-truth problem: V ~ U[v_lo, v_hi], p0 ~ Dirichlet(1, ..., 1).
    Rng rng(rec.seeds.problem);
    Vector v(n), p0(n);
    for (int i = 0; i < n; ++i) v(i) = rng.uniform(config.v_lo, config.v_hi);
    for (int i = 0; i < n; ++i) p0(i) = rng.exponential();
    p0 /= p0.sum();
    const FreeEnergyParams truth_params{v, cell.beta};
    const auto grid = make_grid(config);
    const DensityTrajectory truth = evolve_density(chain, p0, truth_params, grid);

    FreeEnergyParams learned;
    switch (config.mode) {
      case EvalMode::kOracle:
        learned = truth_params;
        break;
      case EvalMode::kUntrained:
        learned = untrained_params(config, n, rec.seeds.train);
        break;
      case EvalMode::kTrained: {
        const SnapshotDataset ds =
            sample_snapshots(truth, chain, config.samples, rec.seeds.snapshots);
        TrainConfig tc = config.train;
        tc.seed = rec.seeds.train;
        const TrainResult fit = train(ds, chain, tc);
        for (bool f : fit.table.failed) rec.failed_intervals += f ? 1 : 0;
        learned = fit.params.free_energy();
        break;
      }
    }
    rec.learned_beta = learned.beta;
    rec.potential_error = (centred(learned.V) - centred(v)).cwiseAbs().maxCoeff();
    const DensityTrajectory pred = evolve_density(chain, p0, learned, grid);
    rec.hellinger = time_avg_hellinger(pred, truth, chain);
    rec.collapsed = detect_collapse(pred, chain.pi, &truth);
    rec.ok = true;
  } catch (const Error& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

std::vector<std::pair<CellKey, int>> experiment_plan(const ExperimentConfig& config) {
  std::vector<std::pair<CellKey, int>> plan;
  for (int n : config.sizes)
    for (auto cls : config.classes)
      for (double beta : config.betas)
        for (int s = 0; s < config.seeds; ++s) plan.push_back({CellKey{cls, n, beta}, s});
  return plan;
}

Report assemble_report(const ExperimentConfig& config, std::vector<RunRecord> runs) {
  const auto plan = experiment_plan(config);
  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < plan.size(); ++i)
    order.emplace(plan[i].first.label() + "#" + std::to_string(plan[i].second), i);
  auto pos = [&](const RunRecord& r) {
    auto it = order.find(r.cell.label() + "#" + std::to_string(r.seed_index));
    if (it == order.end()) fail(ErrorKind::kShape, "run record is not part of the plan");
    return it->second;
  };
  for (const auto& r : runs) pos(r);
  std::sort(runs.begin(), runs.end(),
            [&](const RunRecord& a, const RunRecord& b) { return pos(a) < pos(b); });

  Report report;
  report.config = config;
  std::map<double, std::vector<double>> by_beta;
  std::map<double, std::vector<double>> by_size;
  std::vector<double> sizes, scores;
  for (std::size_t i = 0; i < runs.size();) {
    CellSummary cell;
    cell.cell = runs[i].cell;
    std::vector<double> hs;
    const std::string label = cell.cell.label();
    for (; i < runs.size() && runs[i].cell.label() == label; ++i) {
      const RunRecord& r = runs[i];
      cell.seeds.push_back(r.seeds.run);
      if (!r.ok) {
        ++cell.failed;
      } else if (r.collapsed) {
        ++cell.collapsed;
      } else {
        ++cell.stable;
        hs.push_back(r.hellinger);
        by_beta[r.cell.beta].push_back(r.hellinger);
        by_size[r.cell.n].push_back(r.hellinger);
        sizes.push_back(r.cell.n);
        scores.push_back(r.hellinger);
      }
    }
    const MeanSd ms = mean_sd(hs);
    cell.mean = ms.mean;
    cell.sd = ms.sd;
    report.collapsed += cell.collapsed;
    report.stable += cell.stable;
    report.cells.push_back(std::move(cell));
  }
  for (const auto& [beta, hs] : by_beta) {
    const MeanSd ms = mean_sd(hs);
    report.per_beta.push_back({beta, static_cast<int>(hs.size()), ms.mean, ms.sd});
  }
  for (const auto& [n, hs] : by_size) {
    const MeanSd ms = mean_sd(hs);
    report.per_size.push_back({n, static_cast<int>(hs.size()), ms.mean, ms.sd});
  }
  if (by_size.size() > 1) report.size_spearman = spearman(sizes, scores);
  report.runs = std::move(runs);
  return report;
}

Report run_experiment(const ExperimentConfig& config, int jobs, const RunHooks& hooks) {
  check_config(config);
  const auto plan = experiment_plan(config);
  std::vector<RunRecord> records(plan.size());
  std::atomic<std::size_t> next{0};
  std::mutex hook_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < plan.size(); i = next++) {
      const auto& [cell, s] = plan[i];
      if (hooks.cached) {
        std::optional<RunRecord> done;
        {
          std::lock_guard lock(hook_mutex);
          done = hooks.cached(cell, s);
        }
        if (done) {
          records[i] = std::move(*done);
          continue;
        }
      }
      records[i] = run_single(config, cell, s);
      if (hooks.completed) {
        std::lock_guard lock(hook_mutex);
        hooks.completed(records[i]);
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(plan.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return assemble_report(config, std::move(records));
}

Json to_json(const RunRecord& r) {
  return {{"class", std::string(to_string(r.cell.cls))},
          {"n", r.cell.n},
          {"beta", r.cell.beta},
          {"seed_index", r.seed_index},
          {"seeds", {{"run", r.seeds.run},
                     {"graph", r.seeds.graph},
                     {"problem", r.seeds.problem},
                     {"snapshots", r.seeds.snapshots},
                     {"train", r.seeds.train}}},
          {"ok", r.ok},
          {"error", r.error},
          {"hellinger", r.hellinger},
          {"collapsed", r.collapsed},
          {"learned_beta", r.learned_beta},
          {"potential_error", r.potential_error},
          {"failed_intervals", r.failed_intervals},
          {"chain_sha256", r.chain_sha256}};
}

RunRecord run_record_from_json(const Json& j) {
  RunRecord r;
  try {
    r.cell = {parse_graph_class(j.at("class").get<std::string>()), j.at("n").get<int>(),
              j.at("beta").get<double>()};
    r.seed_index = j.at("seed_index").get<int>();
    const auto& s = j.at("seeds");
    r.seeds = {s.at("run").get<std::uint64_t>(), s.at("graph").get<std::uint64_t>(),
               s.at("problem").get<std::uint64_t>(), s.at("snapshots").get<std::uint64_t>(),
               s.at("train").get<std::uint64_t>()};
    r.ok = j.at("ok").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.hellinger = j.at("hellinger").get<double>();
    r.collapsed = j.at("collapsed").get<bool>();
    r.learned_beta = j.at("learned_beta").get<double>();
    r.potential_error = j.at("potential_error").get<double>();
    r.failed_intervals = j.at("failed_intervals").get<int>();
    r.chain_sha256 = j.at("chain_sha256").get<std::string>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::kIntegrity, std::string("malformed run record: ") + e.what());
  }
  return r;
}

Json to_json(const Report& report) {
  Json cells = Json::array();
  for (const auto& c : report.cells)
    cells.push_back({{"class", std::string(to_string(c.cell.cls))},
                     {"n", c.cell.n},
                     {"beta", c.cell.beta},
                     {"seeds", c.seeds},
                     {"stable", c.stable},
                     {"collapsed", c.collapsed},
                     {"failed", c.failed},
                     {"mean", c.mean},
                     {"sd", c.sd}});
  auto groups = [](const std::vector<GroupSummary>& gs, const char* key) {
    Json out = Json::array();
    for (const auto& g : gs)
      out.push_back({{key, g.key}, {"runs", g.runs}, {"mean", g.mean}, {"sd", g.sd}});
    return out;
  };
  Json baseline = Json::array();
  for (const auto& row : kPublishedTable)
    baseline.push_back({{"beta", row.beta},
                        {"published_mean", row.ours_mean},
                        {"published_sd", row.ours_sd},
                        {"openfim_mean", row.openfim_mean},
                        {"openfim_sd", row.openfim_sd}});
  Json runs = Json::array();
  for (const auto& r : report.runs) runs.push_back(to_json(r));
  return {{"kind", "report"},
          {"tool_version", std::string(kToolVersion)},
          {"config", to_json(report.config)},
          {"cells", cells},
          {"per_beta", groups(report.per_beta, "beta")},
          {"per_size", groups(report.per_size, "n")},
          {"size_spearman", report.size_spearman},
          {"stable_runs", report.stable},
          {"collapsed_runs", report.collapsed},
          {"published_reference", baseline},
          {"runs", runs}};
}

std::string report_csv(const Report& report) {
  std::ostringstream out;
  out << "class,n,beta,runs,stable,collapsed,failed,mean_hellinger,sd_hellinger\n";
  for (const auto& c : report.cells)
    out << to_string(c.cell.cls) << ',' << c.cell.n << ',' << fmt(c.cell.beta) << ','
        << c.seeds.size() << ',' << c.stable << ',' << c.collapsed << ',' << c.failed << ','
        << fmt(c.mean) << ',' << fmt(c.sd) << '\n';
  return out.str();
}

std::string plot_csv(const Report& report) {
  std::ostringstream out;
  out << "class,n,beta,seed,metric,value\n";
  for (const auto& r : report.runs) {
    const std::string prefix = std::string(to_string(r.cell.cls)) + ',' +
                               std::to_string(r.cell.n) + ',' + fmt(r.cell.beta) + ',' +
                               std::to_string(r.seed_index) + ',';
    if (!r.ok) {
      out << prefix << "failed,1\n";
      continue;
    }
    out << prefix << "hellinger," << fmt(r.hellinger) << '\n';
    out << prefix << "collapsed," << (r.collapsed ? 1 : 0) << '\n';
    out << prefix << "learned_beta," << fmt(r.learned_beta) << '\n';
    out << prefix << "potential_error," << fmt(r.potential_error) << '\n';
  }
  return out.str();
}

}  // namespace wkflow
