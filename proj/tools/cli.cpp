#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "wkflow/eval.hpp"
#include "wkflow/io.hpp"

namespace wkflow::cli {

namespace fs = std::filesystem;

namespace {

// Line-delimited JSON events behind --log. Disabled when no path is set.
class EventLog {
 public:
  void open(const std::string& path) {
    if (path.empty()) return;
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    file_.open(path, std::ios::app);
    if (!file_) fail(ErrorKind::kMissingInput, "cannot open log file " + path);
  }
  void emit(Json event) {
    if (!file_) return;
    file_ << event.dump() << '\n';
    file_.flush();
  }

 private:
  std::ofstream file_;
};

struct Manifest {
  std::string command;
  std::string config_path;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;  // file names inside the output directory
  std::uint64_t seed = 0;
  Json config = Json::object();
};

void write_manifest(const fs::path& dir, const Manifest& m) {
  Json inputs = Json::array(), outputs = Json::array();
  for (const auto& p : m.inputs) inputs.push_back({{"path", p}, {"sha256", sha256_file(p)}});
  for (const auto& p : m.outputs)
    outputs.push_back({{"path", p}, {"sha256", sha256_file(dir / p)}});
  write_json(dir / "manifest.json", {{"kind", "manifest"},
                                     {"command", m.command},
                                     {"config_path", m.config_path},
                                     {"seed", m.seed},
                                     {"tool_version", std::string(kToolVersion)},
                                     {"config", m.config},
                                     {"inputs", inputs},
                                     {"outputs", outputs}});
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorKind::kParameter, std::string("cannot parse ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) fail(ErrorKind::kParameter, std::string(what) + " is empty");
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

RateScheme parse_scheme(const std::string& s) {
  if (s == "balanced") return RateScheme::kBalanced;
  if (s == "upwind") return RateScheme::kUpwind;
  fail(ErrorKind::kParameter, "unknown rate scheme '" + s + "'");
}

std::string chain_digest(const MarkovChain& chain) { return sha256_hex(to_json(chain).dump()); }

// ---------------------------------------------------------------------------

struct GraphArgs {
  std::string cls, out, config;
  int n = 0;
  std::uint64_t seed = 0;
  GraphParams params;
};

int cmd_graph(const GraphArgs& a, const CLI::App& sub, std::ostream& out, EventLog& log) {
  GraphParams params;
  if (!a.config.empty()) params = graph_params_from_json(read_json(a.config));
  // Explicit flags override the config file.
  auto take = [&](const char* flag, auto& dst, const auto& src) {
    if (sub.count(flag) > 0) dst = src;
  };
  take("--p", params.p, a.params.p);
  take("--d", params.d, a.params.d);
  take("--ring-k", params.ring_k, a.params.ring_k);
  take("--rewire", params.rewire, a.params.rewire);
  take("--blocks", params.blocks, a.params.blocks);
  take("--p-in", params.p_in, a.params.p_in);
  take("--p-out", params.p_out, a.params.p_out);
  take("--parts", params.parts, a.params.parts);
  take("--p-cross", params.p_cross, a.params.p_cross);
  take("--rows", params.rows, a.params.rows);
  take("--weight-lo", params.weight_lo, a.params.weight_lo);
  take("--weight-hi", params.weight_hi, a.params.weight_hi);

  const GraphClass cls = parse_graph_class(a.cls);
  const WeightedGraph g = generate_graph(cls, a.n, params, a.seed);
  const MarkovChain chain = to_markov_chain(g);
  const fs::path dir(a.out);
  write_json(dir / "graph.json", to_json(g));
  write_json(dir / "chain.json", to_json(chain));
  Manifest m{"graph", a.config, {}, {"graph.json", "chain.json"}, a.seed, {}};
  if (!a.config.empty()) m.inputs.push_back(a.config);
  m.config = {{"class", a.cls}, {"n", a.n}, {"params", to_json(params)}};
  write_manifest(dir, m);
  log.emit({{"event", "graph"}, {"class", a.cls}, {"n", a.n}, {"edges", g.edges.size()}});
  out << "graph: " << a.cls << " n=" << a.n << " edges=" << g.edges.size() << " -> "
      << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string chain, out, potential, p0, scheme = "balanced";
  double beta = 0.1;
  double v_lo = -1.0, v_hi = 1.0;
  double horizon = 1.0;
  int steps = 100;
  bool log_grid = false;
  bool exact = false;
  std::int64_t samples = 10000;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, EventLog& log) {
  const MarkovChain chain = chain_from_json(read_json(a.chain));
  const int n = chain.n();
  if (a.v_hi < a.v_lo) fail(ErrorKind::kParameter, "--v-range must be ordered");
  Rng rng(derive_seed(a.seed, stream_tag("problem")));
  Vector v(n), p0(n);
  if (a.potential.empty()) {
    for (int i = 0; i < n; ++i) v(i) = rng.uniform(a.v_lo, a.v_hi);
  } else {
    const auto raw = parse_list(a.potential, "--potential");
    if (raw.size() == 1) v.setConstant(raw[0]);
    else if (static_cast<int>(raw.size()) == n) v = to_vector(raw);
    else fail(ErrorKind::kShape, "--potential needs 1 or n entries");
  }
  if (a.p0.empty()) {
    for (int i = 0; i < n; ++i) p0(i) = rng.exponential();
    p0 /= p0.sum();
  } else {
    const auto raw = parse_list(a.p0, "--p0");
    if (static_cast<int>(raw.size()) != n) fail(ErrorKind::kShape, "--p0 needs n entries");
    p0 = to_vector(raw);
  }
  const FreeEnergyParams params{v, a.beta};
  check_params(params, n);
  const auto grid = a.log_grid ? log_grid(a.horizon, a.steps) : uniform_grid(a.horizon, a.steps);
  EvolveOptions opts;
  opts.scheme = parse_scheme(a.scheme);
  const DensityTrajectory traj = evolve_density(chain, p0, params, grid, opts);
  SnapshotDataset ds = a.exact ? exact_snapshots(traj, chain, a.samples)
                               : sample_snapshots(traj, chain, a.samples,
                                                  derive_seed(a.seed, stream_tag("snapshots")));
  ds.chain_ref = chain_digest(chain);
  ds.seed = a.seed;

  const fs::path dir(a.out);
  Json truth = to_json(params);
  truth["kind"] = "truth";
  truth["p0"] = vector_to_json(p0);
  write_json(dir / "truth.json", truth);
  write_json(dir / "trajectory.json", to_json(traj));
  write_json(dir / "dataset.json", seal(to_json(ds)));
  Manifest m{"simulate", "", {a.chain}, {"truth.json", "trajectory.json", "dataset.json"},
             a.seed, {}};
  m.config = {{"beta", a.beta},          {"potential", a.potential},
              {"v_range", {a.v_lo, a.v_hi}}, {"p0", a.p0},
              {"horizon", a.horizon},    {"steps", a.steps},
              {"log_grid", a.log_grid},  {"samples", a.samples},
              {"exact", a.exact},        {"scheme", a.scheme}};
  write_manifest(dir, m);
  log.emit({{"event", "simulate"}, {"n", n}, {"steps", a.steps},
            {"clip_events", traj.clip_events.size()}});
  out << "simulate: n=" << n << " steps=" << a.steps << " samples=" << a.samples
      << (a.exact ? " (exact)" : "") << " -> " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string dataset, chain, out, config, variant, sign, velocity_mode;
  TrainConfig flags;
  double tau = 0.0;
};

int cmd_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out, EventLog& log) {
  const Json raw = read_json(a.dataset);
  verify_seal(raw);
  const SnapshotDataset ds = dataset_from_json(raw);
  const MarkovChain chain = chain_from_json(read_json(a.chain));
  const std::string chain_sha = chain_digest(chain);
  if (!ds.chain_ref.empty() && ds.chain_ref != chain_sha)
    fail(ErrorKind::kIntegrity, "dataset was generated from a different chain");

  TrainConfig c;
  if (!a.config.empty()) c = train_config_from_json(read_json(a.config));
  auto take = [&](const char* flag, auto& dst, const auto& src) {
    if (sub.count(flag) > 0) dst = src;
  };
  take("--epochs", c.epochs, a.flags.epochs);
  take("--batch-size", c.batch_size, a.flags.batch_size);
  take("--lr", c.learning_rate, a.flags.learning_rate);
  take("--weight-decay", c.weight_decay, a.flags.weight_decay);
  take("--seed", c.seed, a.flags.seed);
  take("--hidden", c.hidden, a.flags.hidden);
  take("--max-steps", c.max_steps, a.flags.max_steps);
  take("--epsilon", c.precompute.epsilon, a.flags.precompute.epsilon);
  if (sub.count("--tau") > 0) c.tau = a.tau;
  Json overrides = Json::object();
  if (!a.variant.empty()) overrides["variant"] = a.variant;
  if (!a.sign.empty()) overrides["sign"] = a.sign;
  if (!a.velocity_mode.empty()) overrides["velocity_mode"] = a.velocity_mode;
  c = train_config_from_json(overrides, c);

  const TrainResult fit = train(ds, chain, c);
  const fs::path dir(a.out);
  Json ckpt = to_json(fit.params);
  ckpt["config"] = to_json(c);
  ckpt["dataset_sha256"] = sha256_file(a.dataset);
  ckpt["chain_sha256"] = chain_sha;
  write_json(dir / "checkpoint.json", seal(ckpt));

  std::ostringstream csv;
  csv << "step,loss,beta\n";
  csv.precision(10);
  for (const auto& e : fit.log) {
    csv << e.step << ',' << e.loss << ',';
    if (std::isfinite(e.beta)) csv << e.beta;
    csv << '\n';
  }
  write_text(dir / "train_log.csv", csv.str());
  write_json(dir / "geodesics.json", to_json(fit.table));

  Manifest m{"train", a.config, {a.dataset, a.chain},
             {"checkpoint.json", "train_log.csv", "geodesics.json"}, c.seed, to_json(c)};
  if (!a.config.empty()) m.inputs.push_back(a.config);
  write_manifest(dir, m);
  int failed = 0;
  for (bool f : fit.table.failed) failed += f ? 1 : 0;
  log.emit({{"event", "train"}, {"steps", fit.log.size()},
            {"final_loss", fit.log.empty() ? 0.0 : fit.log.back().loss},
            {"failed_intervals", failed}});
  out << "train: " << to_string(c.variant) << " steps=" << fit.log.size()
      << " beta=" << fit.params.beta() << " failed_intervals=" << failed << " -> "
      << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string chain, truth, checkpoint, params, pred, out, scheme = "balanced";
};

int cmd_eval(const EvalArgs& a, std::ostream& out, EventLog& log) {
  const int sources = !a.checkpoint.empty() + !a.params.empty() + !a.pred.empty();
  if (sources != 1)
    fail(ErrorKind::kParameter, "give exactly one of --checkpoint, --params, --pred");
  const MarkovChain chain = chain_from_json(read_json(a.chain));
  const DensityTrajectory truth = trajectory_from_json(read_json(a.truth));
  if (truth.size() == 0) fail(ErrorKind::kShape, "truth trajectory is empty");

  std::vector<std::string> inputs{a.chain, a.truth};
  DensityTrajectory pred;
  std::optional<FreeEnergyParams> learned;
  if (!a.pred.empty()) {
    pred = trajectory_from_json(read_json(a.pred));
    inputs.push_back(a.pred);
  } else {
    if (!a.checkpoint.empty()) {
      const Json ck = read_json(a.checkpoint);
      verify_seal(ck);
      learned = model_params_from_json(ck).free_energy();
      inputs.push_back(a.checkpoint);
    } else {
      learned = free_energy_params_from_json(read_json(a.params));
      inputs.push_back(a.params);
    }
    EvolveOptions opts;
    opts.scheme = parse_scheme(a.scheme);
    const Vector p0 = truth.densities.front().probabilities(chain.pi);
    pred = evolve_density(chain, p0 / p0.sum(), *learned, truth.grid, opts);
  }
  const double score = time_avg_hellinger(pred, truth, chain);
  const bool collapsed = detect_collapse(pred, chain.pi, &truth);

  std::vector<double> per_step;
  std::ostringstream plot;
  plot << "t,hellinger\n";
  plot.precision(10);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    per_step.push_back(hellinger(pred.densities[k].probabilities(chain.pi),
                                 truth.densities[k].probabilities(chain.pi)));
    plot << truth.grid[k] << ',' << per_step.back() << '\n';
  }
  Json report = {{"kind", "eval_report"},
                 {"time_avg_hellinger", score},
                 {"collapsed", collapsed},
                 {"per_step_hellinger", per_step},
                 {"grid", truth.grid}};
  if (learned) report["params"] = to_json(*learned);
  const fs::path dir(a.out);
  write_json(dir / "report.json", report);
  std::ostringstream csv;
  csv.precision(10);
  csv << "metric,value\ntime_avg_hellinger," << score << "\ncollapsed," << (collapsed ? 1 : 0)
      << "\n";
  write_text(dir / "report.csv", csv.str());
  write_text(dir / "plot.csv", plot.str());
  Manifest m{"eval", "", inputs, {"report.json", "report.csv", "plot.csv"}, 0, {}};
  m.config = {{"scheme", a.scheme}};
  write_manifest(dir, m);
  log.emit({{"event", "eval"}, {"time_avg_hellinger", score}, {"collapsed", collapsed}});
  out << "eval: time_avg_hellinger=" << score << (collapsed ? " (collapsed)" : "") << " -> "
      << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string config, out, mode;
  int jobs = 1;
  int seeds = 0;
  bool dry_run = false;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, EventLog& log) {
  ExperimentConfig config = experiment_config_from_json(read_json(a.config));
  if (!a.mode.empty()) config.mode = parse_eval_mode(a.mode);
  if (a.seeds > 0) config.seeds = a.seeds;
  check_config(config);
  const auto plan = experiment_plan(config);
  if (a.dry_run) {
    out << "bench plan: " << config.name << " runs=" << plan.size() << " mode="
        << to_string(config.mode) << "\n";
    for (const auto& [cell, s] : plan) out << "  " << cell.label() << " seed=" << s << "\n";
    return 0;
  }
  if (a.jobs < 1) fail(ErrorKind::kParameter, "--jobs must be >= 1");

  const fs::path dir(a.out);
  const fs::path runs_dir = dir / "runs";
  fs::create_directories(runs_dir);
  const Json config_json = to_json(config);
  const std::string config_sha = sha256_hex(config_json.dump());
  auto marker = [&](const CellKey& cell, int s) {
    return runs_dir / (cell.label() + "_s" + std::to_string(s) + ".json");
  };

  // Completed runs leave a marker keyed by the config digest; a rerun with the
  // same config resumes from them.
  int resumed = 0;
  RunHooks hooks;
  hooks.cached = [&](const CellKey& cell, int s) -> std::optional<RunRecord> {
    const fs::path p = marker(cell, s);
    if (!fs::exists(p)) return std::nullopt;
    try {
      const Json j = read_json(p);
      if (j.value("config_sha256", "") != config_sha) return std::nullopt;
      ++resumed;
      return run_record_from_json(j.at("record"));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };
  hooks.completed = [&](const RunRecord& r) {
    write_json(marker(r.cell, r.seed_index), {{"config_sha256", config_sha}, {"record", to_json(r)}});
    log.emit({{"event", "run"}, {"cell", r.cell.label()}, {"seed", r.seed_index}, {"ok", r.ok},
              {"hellinger", r.hellinger}, {"collapsed", r.collapsed}});
  };

  const auto start = std::chrono::steady_clock::now();
  const Report report = run_experiment(config, a.jobs, hooks);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_json(dir / "report.json", to_json(report));
  write_text(dir / "report.csv", report_csv(report));
  write_text(dir / "plot.csv", plot_csv(report));
  // Wall-clock lives apart from the report so that reports stay reproducible.
  write_json(dir / "timing.json", {{"wall_clock_seconds", seconds},
                                   {"jobs", a.jobs},
                                   {"resumed_runs", resumed}});
  Manifest m{"bench", a.config, {a.config}, {"report.json", "report.csv", "plot.csv"},
             config.root_seed, config_json};
  write_manifest(dir, m);

  out << "bench: " << config.name << " runs=" << report.runs.size()
      << " stable=" << report.stable << " collapsed=" << report.collapsed;
  for (const auto& g : report.per_beta) out << " H[beta=" << g.key << "]=" << g.mean;
  out << " -> " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_verify(const std::string& manifest_path, std::ostream& out) {
  const Json m = read_json(manifest_path);
  const fs::path dir = fs::path(manifest_path).parent_path();
  int checked = 0;
  for (const auto& o : m.at("outputs")) {
    const auto name = o.at("path").get<std::string>();
    if (sha256_file(dir / name) != o.at("sha256").get<std::string>())
      fail(ErrorKind::kIntegrity, "output " + name + " does not match its manifest hash");
    ++checked;
  }
  for (const auto& i : m.at("inputs")) {
    const auto path = i.at("path").get<std::string>();
    if (!fs::exists(path)) continue;
    if (sha256_file(path) != i.at("sha256").get<std::string>())
      fail(ErrorKind::kIntegrity, "input " + path + " changed since the run");
    ++checked;
  }
  out << "verify: " << checked << " files match " << manifest_path << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn free-energy gradient flows on graphs from population snapshots", "wkflow"};
  app.require_subcommand(1);
  // Lets the global --log appear after the subcommand too.
  app.fallthrough();
  std::string log_path;
  app.add_option("--log", log_path, "Append line-delimited JSON events to this file");

  GraphArgs ga;
  auto* graph = app.add_subcommand("graph", "Sample a weighted graph and its random-walk chain");
  graph->add_option("--class", ga.cls, "Graph class")->required();
  graph->add_option("--n", ga.n, "Number of vertices")->required();
  graph->add_option("--seed", ga.seed, "Root seed");
  graph->add_option("--out", ga.out, "Output directory")->required();
  graph->add_option("--config", ga.config, "JSON file with graph parameters");
  graph->add_option("--p", ga.params.p);
  graph->add_option("--d", ga.params.d);
  graph->add_option("--ring-k", ga.params.ring_k);
  graph->add_option("--rewire", ga.params.rewire);
  graph->add_option("--blocks", ga.params.blocks);
  graph->add_option("--p-in", ga.params.p_in);
  graph->add_option("--p-out", ga.params.p_out);
  graph->add_option("--parts", ga.params.parts);
  graph->add_option("--p-cross", ga.params.p_cross);
  graph->add_option("--rows", ga.params.rows);
  graph->add_option("--weight-lo", ga.params.weight_lo);
  graph->add_option("--weight-hi", ga.params.weight_hi);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Simulate a ground-truth trajectory and snapshots");
  sim->add_option("--chain", sa.chain, "Chain file")->required();
  sim->add_option("--out", sa.out, "Output directory")->required();
  sim->add_option("--potential", sa.potential, "Comma-separated V, or one value for all states");
  sim->add_option("--v-range", [&sa](const CLI::results_t& r) {
    sa.v_lo = std::stod(r.at(0));
    sa.v_hi = std::stod(r.at(1));
    return true;
  }, "Range for sampling V when --potential is absent")->expected(2);
  sim->add_option("--beta", sa.beta, "Entropy weight");
  sim->add_option("--p0", sa.p0, "Comma-separated initial probabilities (default: Dirichlet(1))");
  sim->add_option("--horizon", sa.horizon);
  sim->add_option("--steps", sa.steps);
  sim->add_flag("--log-grid", sa.log_grid, "Log-spaced time grid");
  sim->add_option("--samples", sa.samples, "Samples per time point");
  sim->add_flag("--exact", sa.exact, "Store exact probabilities instead of samples");
  sim->add_option("--seed", sa.seed);
  sim->add_option("--scheme", sa.scheme, "Rate scheme: balanced or upwind");

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Fit (V, beta) to a snapshot dataset");
  tr->add_option("--dataset", ta.dataset)->required();
  tr->add_option("--chain", ta.chain)->required();
  tr->add_option("--out", ta.out, "Output directory")->required();
  tr->add_option("--config", ta.config, "JSON file with training settings");
  tr->add_option("--epochs", ta.flags.epochs);
  tr->add_option("--batch-size", ta.flags.batch_size);
  tr->add_option("--lr", ta.flags.learning_rate);
  tr->add_option("--weight-decay", ta.flags.weight_decay);
  tr->add_option("--tau", ta.tau);
  tr->add_option("--seed", ta.flags.seed);
  tr->add_option("--variant", ta.variant, "tabular or mlp");
  tr->add_option("--hidden", ta.flags.hidden);
  tr->add_option("--max-steps", ta.flags.max_steps);
  tr->add_option("--epsilon", ta.flags.precompute.epsilon, "Count smoothing");
  tr->add_option("--sign", ta.sign, "consistent or mixed_literal");
  tr->add_option("--velocity-mode", ta.velocity_mode, "single_step or shooting");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Score a model or trajectory against the ground truth");
  ev->add_option("--chain", ea.chain)->required();
  ev->add_option("--truth", ea.truth, "Ground-truth trajectory")->required();
  ev->add_option("--checkpoint", ea.checkpoint);
  ev->add_option("--params", ea.params, "Free-energy parameters (e.g. truth.json)");
  ev->add_option("--pred", ea.pred, "Predicted trajectory");
  ev->add_option("--out", ea.out, "Output directory")->required();
  ev->add_option("--scheme", ea.scheme);

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Run an experiment sweep from a config file");
  bench->add_option("--config", ba.config)->required();
  bench->add_option("--out", ba.out, "Output directory");
  bench->add_option("--jobs", ba.jobs, "Concurrent runs");
  bench->add_option("--mode", ba.mode, "trained, oracle or untrained");
  bench->add_option("--seeds", ba.seeds, "Override seeds per cell");
  bench->add_flag("--dry-run", ba.dry_run, "Print the run plan and exit");

  std::string manifest;
  auto* verify = app.add_subcommand("verify", "Check files against a run manifest");
  verify->add_option("--manifest", manifest)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::kParameter);
  }

  try {
    EventLog log;
    log.open(log_path);
    if (*graph) return cmd_graph(ga, *graph, out, log);
    if (*sim) return cmd_simulate(sa, out, log);
    if (*tr) return cmd_train(ta, *tr, out, log);
    if (*ev) return cmd_eval(ea, out, log);
    if (*bench) {
      if (!ba.dry_run && ba.out.empty()) fail(ErrorKind::kParameter, "bench needs --out");
      return cmd_bench(ba, out, log);
    }
    if (*verify) return cmd_verify(manifest, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::kMissingInput);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::kParameter);
  }
  return 0;
}

}  // namespace wkflow::cli
