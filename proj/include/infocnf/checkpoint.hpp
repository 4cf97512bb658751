#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "infocnf/condition.hpp"
#include "infocnf/config.hpp"
#include "infocnf/latentode.hpp"

namespace infocnf {

inline constexpr int kCheckpointVersion = 1;

/// A checkpoint is `<name>.json` (format version, model kind, architecture,
/// training config, parameter registry) next to `<name>.bin`, the flat
/// parameter vector as little-endian float64.
struct Checkpoint {
  nlohmann::json manifest;
  std::vector<double> values;
};

void write_checkpoint(const std::filesystem::path& manifest_path, nlohmann::json manifest, const ParamStore& params);
/// Raises IoError for unreadable files and VersionError for a format mismatch.
Checkpoint read_checkpoint(const std::filesystem::path& manifest_path);
/// Copies values into `params`, checking names, shapes and sizes against the registry.
void restore_params(const Checkpoint& ckpt, ParamStore& params);

nlohmann::json cnf_spec_to_json(const CnfSpec& spec);
CnfSpec cnf_spec_from_json(const nlohmann::json& j);
nlohmann::json latent_spec_to_json(const LatentOdeSpec& spec);
LatentOdeSpec latent_spec_from_json(const nlohmann::json& j);

void save_cnf(const std::filesystem::path& path, const CnfModel& model, const TrainConfig& cfg);
CnfModel load_cnf(const std::filesystem::path& path, TrainConfig* cfg = nullptr);
void save_latentode(const std::filesystem::path& path, const LatentOdeModel& model, const TrainConfig& cfg);
LatentOdeModel load_latentode(const std::filesystem::path& path, TrainConfig* cfg = nullptr);

/// "cnf" or "latentode".
std::string checkpoint_kind(const Checkpoint& ckpt);

}  // namespace infocnf
