#include "wkflow/io.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace wkflow {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorKind::kNumerical, "sha256 computation failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i)
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kMissingInput, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    fail(ErrorKind::kIntegrity, path.string() + " is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // Write-then-rename so an interrupted run never leaves a truncated file.
  const fs::path tmp = path.string() + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kMissingInput, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) fail(ErrorKind::kMissingInput, "short write to " + path.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const Json& j) { write_text(path, dump(j)); }

Json seal(Json j) {
  j.erase("sha256");
  const std::string digest = sha256_hex(j.dump());
  j["sha256"] = digest;
  return j;
}

void verify_seal(const Json& j) {
  if (!j.is_object() || !j.contains("sha256") || !j["sha256"].is_string())
    fail(ErrorKind::kIntegrity, "file carries no sha256 digest");
  Json body = j;
  body.erase("sha256");
  if (sha256_hex(body.dump()) != j["sha256"].get<std::string>())
    fail(ErrorKind::kIntegrity, "sha256 digest mismatch; file was modified or corrupted");
}

namespace {

// Field access that maps schema problems to integrity errors.
const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    fail(ErrorKind::kIntegrity, std::string("missing field '") + key + "'");
  return j.at(key);
}

template <typename T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::kIntegrity, std::string("bad field '") + key + "': " + e.what());
  }
}

void expect_kind(const Json& j, std::string_view kind) {
  if (get<std::string>(j, "kind") != kind)
    fail(ErrorKind::kIntegrity, "expected a '" + std::string(kind) + "' file");
}

}  // namespace

Json vector_to_json(const Vector& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector vector_from_json(const Json& j) {
  std::vector<double> raw;
  try {
    raw = j.get<std::vector<double>>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::kIntegrity, std::string("expected a numeric array: ") + e.what());
  }
  return Eigen::Map<Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_to_json(m.row(i).transpose()));
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) fail(ErrorKind::kIntegrity, "expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const Vector first = vector_from_json(j[0]);
  Matrix m(rows, first.size());
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Vector r = vector_from_json(j[i]);
    if (r.size() != m.cols()) fail(ErrorKind::kShape, "ragged matrix rows");
    m.row(i) = r.transpose();
  }
  return m;
}

Json to_json(const GraphParams& g) {
  Json j = {{"p", g.p},           {"d", g.d},           {"ring_k", g.ring_k},
            {"rewire", g.rewire}, {"blocks", g.blocks}, {"p_in", g.p_in},
            {"p_out", g.p_out},   {"parts", g.parts},   {"p_cross", g.p_cross},
            {"weight_lo", g.weight_lo}, {"weight_hi", g.weight_hi},
            {"max_resamples", g.max_resamples}};
  j["rows"] = g.rows ? Json(*g.rows) : Json(nullptr);
  return j;
}

GraphParams graph_params_from_json(const Json& j, GraphParams p) {
  if (!j.is_object()) fail(ErrorKind::kParameter, "graph parameters must be an object");
  auto opt = [&](const char* key, auto& dst) {
    if (!j.contains(key)) return;
    try {
      dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    } catch (const Json::exception& e) {
      fail(ErrorKind::kParameter, std::string("bad value for '") + key + "': " + e.what());
    }
  };
  opt("p", p.p);
  opt("d", p.d);
  opt("ring_k", p.ring_k);
  opt("rewire", p.rewire);
  opt("blocks", p.blocks);
  opt("p_in", p.p_in);
  opt("p_out", p.p_out);
  opt("parts", p.parts);
  opt("p_cross", p.p_cross);
  opt("weight_lo", p.weight_lo);
  opt("weight_hi", p.weight_hi);
  opt("max_resamples", p.max_resamples);
  if (j.contains("rows")) {
    if (j["rows"].is_null()) p.rows.reset();
    else p.rows = j["rows"].get<int>();
  }
  return p;
}

Json to_json(const WeightedGraph& g) {
  Json edges = Json::array();
  for (const auto& e : g.edges) edges.push_back({e.i, e.j, e.weight});
  return {{"kind", "graph"},
          {"class", std::string(to_string(g.class_tag))},
          {"n", g.n},
          {"seed", g.seed},
          {"edges", edges}};
}

WeightedGraph graph_from_json(const Json& j) {
  expect_kind(j, "graph");
  WeightedGraph g;
  g.n = get<int>(j, "n");
  g.class_tag = parse_graph_class(get<std::string>(j, "class"));
  g.seed = get<std::uint64_t>(j, "seed");
  for (const auto& e : field(j, "edges")) {
    if (!e.is_array() || e.size() != 3) fail(ErrorKind::kIntegrity, "edge must be [i, j, w]");
    Edge edge{e[0].get<int>(), e[1].get<int>(), e[2].get<double>()};
    if (edge.i < 0 || edge.j >= g.n || edge.i >= edge.j || !(edge.weight > 0.0))
      fail(ErrorKind::kIntegrity, "invalid edge in graph file");
    g.edges.push_back(edge);
  }
  return g;
}

Json to_json(const MarkovChain& chain) {
  return {{"kind", "chain"},
          {"n", chain.n()},
          {"K", matrix_to_json(chain.K)},
          {"pi", vector_to_json(chain.pi)}};
}

MarkovChain chain_from_json(const Json& j) {
  expect_kind(j, "chain");
  MarkovChain chain{matrix_from_json(field(j, "K")), vector_from_json(field(j, "pi"))};
  const int n = get<int>(j, "n");
  if (chain.K.rows() != n || chain.K.cols() != n || chain.pi.size() != n)
    fail(ErrorKind::kShape, "chain dimensions disagree with n");
  if (!validate_chain(chain, 1e-10).ok())
    fail(ErrorKind::kIntegrity, "chain file does not describe a valid reversible chain");
  return chain;
}

Json to_json(const DensityTrajectory& traj) {
  Json dens = Json::array();
  for (const auto& d : traj.densities) dens.push_back(vector_to_json(d.rho));
  return {{"kind", "trajectory"},
          {"grid", traj.grid},
          {"densities", dens},
          {"clip_events", traj.clip_events}};
}

DensityTrajectory trajectory_from_json(const Json& j) {
  expect_kind(j, "trajectory");
  DensityTrajectory t;
  t.grid = get<std::vector<double>>(j, "grid");
  for (const auto& d : field(j, "densities")) t.densities.push_back(Density{vector_from_json(d)});
  if (j.contains("clip_events")) t.clip_events = get<std::vector<int>>(j, "clip_events");
  if (t.densities.size() != t.grid.size())
    fail(ErrorKind::kShape, "trajectory has a different number of densities and grid points");
  return t;
}

Json to_json(const FreeEnergyParams& params) {
  return {{"V", vector_to_json(params.V)}, {"beta", params.beta}};
}

FreeEnergyParams free_energy_params_from_json(const Json& j) {
  return {vector_from_json(field(j, "V")), get<double>(j, "beta")};
}

Json to_json(const SnapshotDataset& ds) {
  Json j = {{"kind", "dataset"},
            {"grid", ds.grid},
            {"total_per_step", ds.total_per_step},
            {"chain_ref", ds.chain_ref},
            {"seed", ds.seed}};
  if (ds.is_exact()) {
    Json probs = Json::array();
    for (const auto& p : *ds.exact) probs.push_back(vector_to_json(p));
    j["exact"] = probs;
  } else {
    j["counts"] = ds.counts;
  }
  return j;
}

SnapshotDataset dataset_from_json(const Json& j) {
  expect_kind(j, "dataset");
  SnapshotDataset ds;
  ds.grid = get<std::vector<double>>(j, "grid");
  ds.total_per_step = get<std::int64_t>(j, "total_per_step");
  ds.chain_ref = get<std::string>(j, "chain_ref");
  ds.seed = get<std::uint64_t>(j, "seed");
  if (j.contains("exact")) {
    std::vector<Vector> probs;
    for (const auto& p : j["exact"]) probs.push_back(vector_from_json(p));
    if (probs.size() != ds.grid.size()) fail(ErrorKind::kShape, "dataset/grid length mismatch");
    ds.exact = std::move(probs);
  } else {
    ds.counts = get<std::vector<std::vector<std::int64_t>>>(j, "counts");
    if (ds.counts.size() != ds.grid.size())
      fail(ErrorKind::kShape, "dataset/grid length mismatch");
  }
  return ds;
}

Json to_json(const GeodesicTable& t) {
  Json dens = Json::array(), vel = Json::array(), pot = Json::array();
  for (const auto& d : t.densities) dens.push_back(vector_to_json(d.rho));
  for (const auto& v : t.velocities) vel.push_back(matrix_to_json(v.phi));
  for (const auto& p : t.potentials) pot.push_back(vector_to_json(p));
  return {{"kind", "geodesics"},
          {"convention", t.convention == VelocityConvention::kRate ? "rate" : "displacement"},
          {"densities", dens},
          {"velocities", vel},
          {"potentials", pot},
          {"dt", t.dt},
          {"failed", t.failed},
          {"failure_reasons", t.failure_reasons}};
}

GeodesicTable geodesic_table_from_json(const Json& j) {
  expect_kind(j, "geodesics");
  GeodesicTable t;
  t.convention = get<std::string>(j, "convention") == "rate" ? VelocityConvention::kRate
                                                              : VelocityConvention::kDisplacement;
  for (const auto& d : field(j, "densities")) t.densities.push_back(Density{vector_from_json(d)});
  for (const auto& v : field(j, "velocities")) t.velocities.push_back(EdgeField{matrix_from_json(v)});
  for (const auto& p : field(j, "potentials")) t.potentials.push_back(vector_from_json(p));
  t.dt = get<std::vector<double>>(j, "dt");
  t.failed = get<std::vector<bool>>(j, "failed");
  t.failure_reasons = get<std::vector<std::string>>(j, "failure_reasons");
  const auto m = t.velocities.size();
  if (t.densities.size() != m + 1 || t.potentials.size() != m || t.dt.size() != m ||
      t.failed.size() != m || t.failure_reasons.size() != m)
    fail(ErrorKind::kShape, "geodesic table arrays disagree in length");
  return t;
}

std::string to_string(ModelVariant v) { return v == ModelVariant::kMlp ? "mlp" : "tabular"; }

ModelVariant parse_model_variant(std::string_view s) {
  if (s == "tabular") return ModelVariant::kTabular;
  if (s == "mlp") return ModelVariant::kMlp;
  fail(ErrorKind::kParameter, "unknown model variant '" + std::string(s) + "'");
}

Json to_json(const TrainConfig& c) {
  Json j = {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_eps", c.adam_eps},
            {"weight_decay", c.weight_decay},
            {"seed", c.seed},
            {"variant", to_string(c.variant)},
            {"hidden", c.hidden},
            {"initial_beta", c.initial_beta},
            {"sign", c.sign == SignConvention::kMixedLiteral ? "mixed_literal" : "consistent"},
            {"epsilon", c.precompute.epsilon},
            {"velocity_mode",
             c.precompute.geodesic.mode == VelocityMode::kShooting ? "shooting" : "single_step"},
            {"max_steps", c.max_steps}};
  j["tau"] = c.tau ? Json(*c.tau) : Json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  if (!j.is_object()) fail(ErrorKind::kParameter, "train config must be an object");
  auto num = [&](const char* key, auto& dst) {
    if (j.contains(key)) {
      try {
        dst = j.at(key).get<std::decay_t<decltype(dst)>>();
      } catch (const Json::exception& e) {
        fail(ErrorKind::kParameter, std::string("bad value for '") + key + "': " + e.what());
      }
    }
  };
  num("epochs", c.epochs);
  num("batch_size", c.batch_size);
  num("learning_rate", c.learning_rate);
  num("adam_beta1", c.adam_beta1);
  num("adam_beta2", c.adam_beta2);
  num("adam_eps", c.adam_eps);
  num("weight_decay", c.weight_decay);
  num("seed", c.seed);
  num("hidden", c.hidden);
  num("initial_beta", c.initial_beta);
  num("epsilon", c.precompute.epsilon);
  num("max_steps", c.max_steps);
  if (j.contains("variant")) c.variant = parse_model_variant(j["variant"].get<std::string>());
  if (j.contains("sign")) {
    const auto s = j["sign"].get<std::string>();
    if (s == "consistent") c.sign = SignConvention::kConsistent;
    else if (s == "mixed_literal") c.sign = SignConvention::kMixedLiteral;
    else fail(ErrorKind::kParameter, "unknown sign convention '" + s + "'");
  }
  if (j.contains("velocity_mode")) {
    const auto s = j["velocity_mode"].get<std::string>();
    if (s == "single_step") c.precompute.geodesic.mode = VelocityMode::kSingleStep;
    else if (s == "shooting") c.precompute.geodesic.mode = VelocityMode::kShooting;
    else fail(ErrorKind::kParameter, "unknown velocity mode '" + s + "'");
  }
  if (j.contains("tau")) {
    if (j["tau"].is_null()) c.tau.reset();
    else c.tau = j["tau"].get<double>();
  }
  check_config(c);
  return c;
}

Json to_json(const ModelParams& p) {
  Json j = {{"kind", "checkpoint"},
            {"variant", to_string(p.variant)},
            {"n", p.n},
            {"hidden", p.hidden},
            {"beta", p.beta()},
            {"potential", vector_to_json(p.potential())}};
  if (p.variant == ModelVariant::kTabular) {
    j["V_table"] = std::vector<double>(p.values.begin(), p.values.begin() + p.n);
    j["raw_beta"] = p.values[p.n];
  } else {
    j["values"] = p.values;
  }
  return j;
}

ModelParams model_params_from_json(const Json& j) {
  expect_kind(j, "checkpoint");
  ModelParams p;
  p.variant = parse_model_variant(get<std::string>(j, "variant"));
  p.n = get<int>(j, "n");
  p.hidden = get<int>(j, "hidden");
  if (p.variant == ModelVariant::kTabular) {
    p.values = get<std::vector<double>>(j, "V_table");
    if (static_cast<int>(p.values.size()) != p.n) fail(ErrorKind::kShape, "V_table length != n");
    p.values.push_back(get<double>(j, "raw_beta"));
  } else {
    p.values = get<std::vector<double>>(j, "values");
    if (p.values.size() != ModelParams::mlp(p.n, 0, p.hidden).size())
      fail(ErrorKind::kShape, "mlp parameter count does not match n and hidden");
  }
  return p;
}

}  // namespace wkflow
