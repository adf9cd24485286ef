#include "advmal/checkpoint.hpp"

#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace advmal {

namespace {

using nlohmann::json;

json mlp_json(const Mlp& model) {
  json layers = json::array();
  for (const Layer& layer : model.layers())
    layers.push_back({{"weights", layer.weights.values}, {"bias", layer.bias}});
  return {{"layer_sizes", model.layer_sizes()},
          {"hidden", std::string(to_string(model.hidden_activation()))},
          {"output", std::string(to_string(model.output_activation()))},
          {"layers", std::move(layers)}};
}

Mlp mlp_from(const json& j) {
  Mlp model(j.at("layer_sizes").get<std::vector<std::size_t>>(),
            parse_activation(j.at("hidden").get<std::string>()),
            parse_activation(j.at("output").get<std::string>()));
  const json& layers = j.at("layers");
  if (layers.size() != model.layers().size())
    throw ShapeError("checkpoint lists the wrong number of layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Layer& layer = model.layers()[l];
    auto w = layers[l].at("weights").get<std::vector<double>>();
    auto b = layers[l].at("bias").get<std::vector<double>>();
    if (w.size() != layer.weights.values.size() || b.size() != layer.bias.size())
      throw ShapeError("checkpoint layer " + std::to_string(l) + " has the wrong shape");
    layer.weights.values = std::move(w);
    layer.bias = std::move(b);
  }
  model.validate();
  return model;
}

json envelope(std::string_view kind) {
  return {{"format", "advmal-checkpoint"},
          {"format_version", kCheckpointVersion},
          {"kind", std::string(kind)}};
}

json parse_document(std::string_view text, std::string_view expected_kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format_version"))
    throw VersionError("checkpoint carries no format_version");
  const json& v = j.at("format_version");
  if (!v.is_number_integer() || v.get<int>() != kCheckpointVersion)
    throw VersionError("checkpoint format_version " + v.dump() + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  if (!expected_kind.empty() && j.value("kind", "") != expected_kind)
    throw std::runtime_error("checkpoint kind '" + j.value("kind", "") + "' where '" +
                             std::string(expected_kind) + "' was expected");
  return j;
}

json hardened_json(const HardenedClassifier& model) {
  json j = envelope("hardened");
  j["input_dim"] = model.input_dim();
  j["features"] = model.features();
  j["thresholds"] = model.thresholds() ? json(model.thresholds()->theta) : json(nullptr);
  j["dae"] = model.dae() ? json{{"encoder", mlp_json(model.dae()->encoder)},
                                {"decoder", mlp_json(model.dae()->decoder)}}
                         : json(nullptr);
  j["head"] = mlp_json(model.head());
  return j;
}

HardenedClassifier hardened_from(const json& j) {
  std::optional<BinarizationThresholds> thresholds;
  if (!j.at("thresholds").is_null())
    thresholds = BinarizationThresholds{j.at("thresholds").get<std::vector<double>>()};
  std::optional<DenoisingAutoencoder> dae;
  if (!j.at("dae").is_null()) {
    dae.emplace();
    dae->encoder = mlp_from(j.at("dae").at("encoder"));
    dae->decoder = mlp_from(j.at("dae").at("decoder"));
  }
  return HardenedClassifier(j.at("input_dim").get<std::size_t>(),
                            j.at("features").get<std::vector<std::size_t>>(),
                            std::move(thresholds), std::move(dae), mlp_from(j.at("head")));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out << text << '\n';
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

}  // namespace

std::string mlp_to_json(const Mlp& model) {
  json j = envelope("mlp");
  j["model"] = mlp_json(model);
  return j.dump();
}

Mlp mlp_from_json(std::string_view text) {
  return mlp_from(parse_document(text, "mlp").at("model"));
}

std::string hardened_to_json(const HardenedClassifier& model) {
  return hardened_json(model).dump();
}

HardenedClassifier hardened_from_json(std::string_view text) {
  return hardened_from(parse_document(text, "hardened"));
}

void save_mlp(const std::filesystem::path& path, const Mlp& model) {
  write_text(path, mlp_to_json(model));
}

Mlp load_mlp(const std::filesystem::path& path) { return mlp_from_json(read_text(path)); }

void save_hardened(const std::filesystem::path& path, const HardenedClassifier& model) {
  write_text(path, hardened_to_json(model));
}

HardenedClassifier load_hardened(const std::filesystem::path& path) {
  return hardened_from_json(read_text(path));
}

void save_ensemble(const std::filesystem::path& manifest, const EnsembleClassifier& ensemble,
                   double subspace_ratio) {
  json j = envelope("ensemble");
  j["members"] = ensemble.size();
  j["subspace_ratio"] = subspace_ratio;
  json subsets = json::array();
  json files = json::array();
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const std::string name =
        manifest.stem().string() + ".member" + std::to_string(i) + ".json";
    save_hardened(manifest.parent_path() / name, ensemble.members()[i]);
    subsets.push_back(ensemble.members()[i].features());
    files.push_back(name);
  }
  j["feature_subsets"] = std::move(subsets);
  j["member_files"] = std::move(files);
  write_text(manifest, j.dump(2));
}

EnsembleClassifier load_ensemble(const std::filesystem::path& manifest) {
  const json j = parse_document(read_text(manifest), "ensemble");
  const auto files = j.at("member_files").get<std::vector<std::string>>();
  const auto subsets = j.at("feature_subsets").get<std::vector<std::vector<std::size_t>>>();
  if (files.size() != j.at("members").get<std::size_t>() || subsets.size() != files.size())
    throw std::runtime_error("ensemble manifest is inconsistent");
  std::vector<HardenedClassifier> members;
  for (std::size_t i = 0; i < files.size(); ++i) {
    members.push_back(load_hardened(manifest.parent_path() / files[i]));
    if (members.back().features() != subsets[i])
      throw std::runtime_error("ensemble member " + std::to_string(i) +
                               " does not match its manifest feature subset");
  }
  return EnsembleClassifier(std::move(members));
}

std::string checkpoint_kind(const std::filesystem::path& path) {
  return parse_document(read_text(path), "").value("kind", "");
}

std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path) {
  const std::string kind = checkpoint_kind(path);
  if (kind == "ensemble") return std::make_unique<EnsembleClassifier>(load_ensemble(path));
  if (kind == "hardened") return std::make_unique<HardenedClassifier>(load_hardened(path));
  if (kind == "mlp") {
    Mlp model = load_mlp(path);
    std::vector<std::size_t> all(model.input_dim());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const std::size_t dim = model.input_dim();
    return std::make_unique<HardenedClassifier>(dim, std::move(all), std::nullopt, std::nullopt,
                                                std::move(model));
  }
  throw std::runtime_error("unknown checkpoint kind '" + kind + "'");
}

}  // namespace advmal
