#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "wkflow/data.hpp"
#include "wkflow/dynamics.hpp"
#include "wkflow/graph.hpp"
#include "wkflow/learning.hpp"

namespace wkflow {

using Json = nlohmann::json;

inline constexpr std::string_view kToolVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Canonical serialisation: two-space indent and a trailing newline.
std::string dump(const Json& j);

/// Missing file -> kMissingInput, unparseable -> kIntegrity.
Json read_json(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);
void write_json(const std::filesystem::path& path, const Json& j);

/// Adds "sha256" over the canonical dump of the object without that key.
Json seal(Json j);
/// Throws kIntegrity if the stored digest is absent or does not match.
void verify_seal(const Json& j);

Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json to_json(const GraphParams& params);
/// Keys absent from `j` keep the values already in `base`.
GraphParams graph_params_from_json(const Json& j, GraphParams base = {});

Json to_json(const WeightedGraph& g);
WeightedGraph graph_from_json(const Json& j);

Json to_json(const MarkovChain& chain);
/// Re-validates the chain; a failing chain is reported as kIntegrity.
MarkovChain chain_from_json(const Json& j);

Json to_json(const DensityTrajectory& traj);
DensityTrajectory trajectory_from_json(const Json& j);

Json to_json(const FreeEnergyParams& params);
FreeEnergyParams free_energy_params_from_json(const Json& j);

Json to_json(const SnapshotDataset& ds);
SnapshotDataset dataset_from_json(const Json& j);

Json to_json(const GeodesicTable& table);
GeodesicTable geodesic_table_from_json(const Json& j);

Json to_json(const TrainConfig& config);
/// Fields absent from `j` keep the values already in `base`.
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

Json to_json(const ModelParams& params);
ModelParams model_params_from_json(const Json& j);

std::string to_string(ModelVariant v);
ModelVariant parse_model_variant(std::string_view s);

}  // namespace wkflow
