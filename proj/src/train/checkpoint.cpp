#include "infocnf/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include <fmt/format.h>

#include "infocnf/errors.hpp"

namespace infocnf {

using nlohmann::json;

namespace {

std::filesystem::path blob_path(const std::filesystem::path& manifest_path) {
  auto p = manifest_path;
  p.replace_extension(".bin");
  return p;
}

void put_le(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(bytes, 8);
}

double get_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& manifest_path, json manifest, const ParamStore& params) {
  const auto blob = blob_path(manifest_path);
  json registry = json::array();
  for (const auto& e : params.entries()) {
    registry.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}, {"size", e.size}});
  }
  manifest["format"] = "infocnf-checkpoint";
  manifest["format_version"] = kCheckpointVersion;
  manifest["parameters"] = std::move(registry);
  manifest["parameter_count"] = params.size();
  manifest["blob"] = blob.filename().string();

  std::ofstream bin(blob, std::ios::binary);
  if (!bin) throw IoError(fmt::format("cannot write '{}'", blob.string()));
  for (double v : params.flat()) put_le(bin, v);
  if (!bin) throw IoError(fmt::format("write failed for '{}'", blob.string()));

  std::ofstream out(manifest_path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", manifest_path.string()));
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError(fmt::format("write failed for '{}'", manifest_path.string()));
}

Checkpoint read_checkpoint(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError(fmt::format("cannot read checkpoint '{}'", manifest_path.string()));
  Checkpoint ck;
  try {
    ck.manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(fmt::format("checkpoint '{}' is not valid JSON: {}", manifest_path.string(), e.what()));
  }
  const auto& m = ck.manifest;
  if (!m.is_object() || m.value("format", "") != "infocnf-checkpoint") {
    throw IoError(fmt::format("'{}' is not a checkpoint manifest", manifest_path.string()));
  }
  const int version = m.value("format_version", -1);
  if (version != kCheckpointVersion) {
    throw VersionError(fmt::format("checkpoint '{}' has format version {}, this build reads version {}",
                                   manifest_path.string(), version, kCheckpointVersion));
  }
  const auto blob = manifest_path.parent_path() / m.at("blob").get<std::string>();
  std::ifstream bin(blob, std::ios::binary);
  if (!bin) throw IoError(fmt::format("cannot read checkpoint blob '{}'", blob.string()));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  const auto count = m.at("parameter_count").get<std::size_t>();
  if (bytes.size() != 8 * count) {
    throw IoError(fmt::format("checkpoint blob '{}' holds {} bytes, expected {}", blob.string(), bytes.size(), 8 * count));
  }
  ck.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) ck.values[i] = get_le(bytes.data() + 8 * i);
  return ck;
}

void restore_params(const Checkpoint& ck, ParamStore& params) {
  const auto& reg = ck.manifest.at("parameters");
  if (reg.size() != params.count() || ck.values.size() != params.size()) {
    throw IoError(fmt::format("checkpoint registry ({} tensors, {} values) does not match the model ({} tensors, {} values)",
                              reg.size(), ck.values.size(), params.count(), params.size()));
  }
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const auto& e = params.entries()[i];
    const auto name = reg[i].at("name").get<std::string>();
    const auto shape = reg[i].at("shape").get<Shape>();
    if (name != e.name || shape != e.shape || reg[i].at("offset").get<std::size_t>() != e.offset) {
      throw IoError(fmt::format("checkpoint tensor {} is '{}' {}, the model expects '{}' {}", i, name,
                                shape_string(shape), e.name, shape_string(e.shape)));
    }
  }
  params.flat() = ck.values;
}

std::string checkpoint_kind(const Checkpoint& ck) { return ck.manifest.value("kind", ""); }

json cnf_spec_to_json(const CnfSpec& s) {
  return {{"dim", s.dim},
          {"num_layers", s.num_layers},
          {"hidden", s.hidden},
          {"activation", activation_name(s.activation)},
          {"num_classes", s.num_classes},
          {"d_y", s.d_y},
          {"dropout", s.dropout},
          {"gated", s.gated},
          {"init_gain", s.init_gain},
          {"gate",
           {{"hidden", s.gate.hidden},
            {"init_log10_tol", s.gate.init_log10_tol},
            {"init_sigma", s.gate.init_sigma},
            {"min_log10", s.gate.min_log10},
            {"max_log10", s.gate.max_log10},
            {"baseline", s.gate.baseline},
            {"baseline_decay", s.gate.baseline_decay}}}};
}

CnfSpec cnf_spec_from_json(const json& j) {
  CnfSpec s;
  s.dim = j.at("dim").get<std::size_t>();
  s.num_layers = j.at("num_layers").get<std::size_t>();
  s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  s.activation = parse_activation(j.at("activation").get<std::string>());
  s.num_classes = j.at("num_classes").get<std::size_t>();
  s.d_y = j.at("d_y").get<std::size_t>();
  s.dropout = j.at("dropout").get<double>();
  s.gated = j.at("gated").get<bool>();
  s.init_gain = j.at("init_gain").get<double>();
  const auto& g = j.at("gate");
  s.gate.hidden = g.at("hidden").get<std::size_t>();
  s.gate.init_log10_tol = g.at("init_log10_tol").get<double>();
  s.gate.init_sigma = g.at("init_sigma").get<double>();
  s.gate.min_log10 = g.at("min_log10").get<double>();
  s.gate.max_log10 = g.at("max_log10").get<double>();
  s.gate.baseline = g.at("baseline").get<bool>();
  s.gate.baseline_decay = g.at("baseline_decay").get<double>();
  return s;
}

json latent_spec_to_json(const LatentOdeSpec& s) {
  return {{"obs_dim", s.obs_dim},       {"latent_dim", s.latent_dim}, {"d_y", s.d_y},
          {"rnn_hidden", s.rnn_hidden}, {"dyn_hidden", s.dyn_hidden}, {"dec_hidden", s.dec_hidden},
          {"partitioned", s.partitioned}, {"sigma_obs", s.sigma_obs}, {"beta_sup", s.beta_sup}};
}

LatentOdeSpec latent_spec_from_json(const json& j) {
  LatentOdeSpec s;
  s.obs_dim = j.at("obs_dim").get<std::size_t>();
  s.latent_dim = j.at("latent_dim").get<std::size_t>();
  s.d_y = j.at("d_y").get<std::size_t>();
  s.rnn_hidden = j.at("rnn_hidden").get<std::size_t>();
  s.dyn_hidden = j.at("dyn_hidden").get<std::size_t>();
  s.dec_hidden = j.at("dec_hidden").get<std::size_t>();
  s.partitioned = j.at("partitioned").get<bool>();
  s.sigma_obs = j.at("sigma_obs").get<double>();
  s.beta_sup = j.at("beta_sup").get<double>();
  return s;
}

namespace {

template <typename F>
auto guarded(const std::filesystem::path& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw IoError(fmt::format("checkpoint '{}' is malformed: {}", path.string(), e.what()));
  }
}

TrainConfig config_from_manifest(const json& m) {
  const Task task = parse_task(m.at("config").at("task").get<std::string>());
  return parse_config(m.at("config"), task);
}

}  // namespace

void save_cnf(const std::filesystem::path& path, const CnfModel& model, const TrainConfig& cfg) {
  json m;
  m["kind"] = "cnf";
  m["spec"] = cnf_spec_to_json(model.spec);
  m["config"] = config_to_json(cfg);
  write_checkpoint(path, std::move(m), model.params);
}

CnfModel load_cnf(const std::filesystem::path& path, TrainConfig* cfg) {
  const Checkpoint ck = read_checkpoint(path);
  if (checkpoint_kind(ck) != "cnf") throw IoError(fmt::format("'{}' is not a flow checkpoint", path.string()));
  return guarded(path, [&] {
    CnfModel model = build_cnf_skeleton(cnf_spec_from_json(ck.manifest.at("spec")));
    restore_params(ck, model.params);
    if (cfg) *cfg = config_from_manifest(ck.manifest);
    return model;
  });
}

void save_latentode(const std::filesystem::path& path, const LatentOdeModel& model, const TrainConfig& cfg) {
  json m;
  m["kind"] = "latentode";
  m["spec"] = latent_spec_to_json(model.spec());
  m["config"] = config_to_json(cfg);
  write_checkpoint(path, std::move(m), model.params());
}

LatentOdeModel load_latentode(const std::filesystem::path& path, TrainConfig* cfg) {
  const Checkpoint ck = read_checkpoint(path);
  if (checkpoint_kind(ck) != "latentode") {
    throw IoError(fmt::format("'{}' is not a latent ODE checkpoint", path.string()));
  }
  return guarded(path, [&] {
    LatentOdeModel model(latent_spec_from_json(ck.manifest.at("spec")));
    restore_params(ck, model.params());
    if (cfg) *cfg = config_from_manifest(ck.manifest);
    return model;
  });
}

}  // namespace infocnf
