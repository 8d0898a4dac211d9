#include "m3h/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "m3h/error.hpp"
#include "m3h/text_io.hpp"

namespace m3h {

namespace {

using nlohmann::json;

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>(v >> (8 * b) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>(v >> (8 * b) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw FormatError("checkpoint is truncated");
    const auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t u64() {
    const auto s = take(8);
    std::uint64_t v = 0;
    for (int b = 7; b >= 0; --b) v = v << 8 | static_cast<unsigned char>(s[b]);
    return v;
  }
  std::uint32_t u32() {
    const auto s = take(4);
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) v = v << 8 | static_cast<unsigned char>(s[b]);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

json task_to_json(const TaskSpec& t) {
  json j{{"name", t.name}, {"class", std::string(to_string(t.problem))}};
  if (t.problem == ProblemClass::multiclass) j["num_classes"] = t.num_classes;
  if (t.problem == ProblemClass::cluster) j["cluster_k"] = t.cluster_k;
  return j;
}

}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"modality_hidden", cfg.modality_hidden},
              {"shared_hidden", cfg.shared_hidden},
              {"task_embed_dim", cfg.task_embed_dim},
              {"contrastive_proj_dim", cfg.contrastive_proj_dim},
              {"contrastive_temperature", cfg.contrastive_temperature},
              {"alpha", cfg.alpha},
              {"autoencoder_hidden", cfg.autoencoder_hidden},
              {"autoencoder_latent", cfg.autoencoder_latent},
              {"seed", cfg.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "modality_hidden") cfg.modality_hidden = value.get<std::vector<std::size_t>>();
      else if (key == "shared_hidden") cfg.shared_hidden = value.get<std::vector<std::size_t>>();
      else if (key == "task_embed_dim") cfg.task_embed_dim = value.get<std::size_t>();
      else if (key == "contrastive_proj_dim") cfg.contrastive_proj_dim = value.get<std::size_t>();
      else if (key == "contrastive_temperature") cfg.contrastive_temperature = value.get<double>();
      else if (key == "alpha") cfg.alpha = value.get<double>();
      else if (key == "autoencoder_hidden") cfg.autoencoder_hidden = value.get<std::size_t>();
      else if (key == "autoencoder_latent") cfg.autoencoder_latent = value.get<std::size_t>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown model config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string serialize_checkpoint(const Model& model, const json& extra) {
  json meta;
  meta["modalities"] = json::array();
  for (const auto& s : model.schemas()) meta["modalities"].push_back({{"name", s.name}, {"dim", s.dim}});
  meta["tasks"] = json::array();
  for (const auto& t : model.tasks()) meta["tasks"].push_back(task_to_json(t));
  meta["model"] = model_config_to_json(model.config());
  meta["extra"] = extra;
  const std::string meta_text = meta.dump();

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u64(out, meta_text.size());
  out += meta_text;
  const ParameterStore& params = model.params();
  put_u64(out, params.size());
  for (std::size_t id = 0; id < params.size(); ++id) {
    const std::string& name = params.name(id);
    const Matrix& v = params.value(id);
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u64(out, v.rows());
    put_u64(out, v.cols());
    for (std::size_t k = 0; k < v.size(); ++k) put_u64(out, std::bit_cast<std::uint64_t>(v.data()[k]));
  }
  return out;
}

Model deserialize_checkpoint(std::string_view bytes, json* extra) {
  Reader in(bytes);
  if (in.take(4) != std::string_view(kCheckpointMagic, 4)) throw FormatError("not a checkpoint (bad magic)");
  const std::uint64_t meta_len = in.u64();
  json meta;
  std::vector<ModalitySchema> schemas;
  std::vector<TaskSpec> tasks;
  ModelConfig cfg;
  try {
    meta = json::parse(in.take(meta_len));
    for (const auto& m : meta.at("modalities"))
      schemas.push_back({m.at("name").get<std::string>(), m.at("dim").get<std::size_t>()});
    for (const auto& t : meta.at("tasks")) {
      TaskSpec spec;
      spec.name = t.at("name").get<std::string>();
      spec.problem = parse_problem_class(t.at("class").get<std::string>());
      if (t.contains("num_classes")) spec.num_classes = t["num_classes"].get<std::size_t>();
      if (t.contains("cluster_k")) spec.cluster_k = t["cluster_k"].get<std::size_t>();
      tasks.push_back(spec);
    }
    cfg = model_config_from_json(meta.at("model"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  if (extra) *extra = meta.value("extra", json::object());

  Model model(std::move(schemas), std::move(tasks), cfg);
  ParameterStore& params = model.params();
  const std::uint64_t count = in.u64();
  if (count != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " parameters, model expects " +
                      std::to_string(params.size()));
  }
  for (std::size_t id = 0; id < count; ++id) {
    const std::string name(in.take(in.u32()));
    if (name != params.name(id)) {
      throw FormatError("parameter " + std::to_string(id) + " is '" + name + "', expected '" +
                        params.name(id) + "'");
    }
    const std::uint64_t rows = in.u64();
    const std::uint64_t cols = in.u64();
    Matrix& v = params.value(id);
    if (rows != v.rows() || cols != v.cols()) {
      throw FormatError("parameter '" + name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + v.shape_string());
    }
    for (std::size_t k = 0; k < v.size(); ++k) v.data()[k] = std::bit_cast<double>(in.u64());
  }
  if (!in.done()) throw FormatError("trailing bytes after checkpoint");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const json& extra) {
  write_file_atomic(path, serialize_checkpoint(model, extra));
}

Model load_checkpoint(const std::filesystem::path& path, json* extra) {
  return deserialize_checkpoint(read_file(path), extra);
}

}  // namespace m3h
