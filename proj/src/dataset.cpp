#include "m3h/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "m3h/error.hpp"
#include "m3h/text_io.hpp"

namespace m3h {

void TaskSpec::validate() const {
  if (name.empty()) throw ConfigError("task with an empty name");
  if (problem == ProblemClass::multiclass && num_classes < 3) {
    throw ConfigError("multiclass task '" + name + "' needs num_classes >= 3");
  }
  if (problem == ProblemClass::cluster && cluster_k < 2) {
    throw ConfigError("cluster task '" + name + "' needs cluster_k >= 2");
  }
}

Dataset::Dataset(std::vector<ModalitySchema> schemas, std::vector<TaskSpec> tasks)
    : schemas_(std::move(schemas)), tasks_(std::move(tasks)) {
  std::set<std::string> names;
  for (const auto& s : schemas_) {
    if (s.name.empty()) throw ConfigError("modality with an empty name");
    if (s.dim < 1) throw ConfigError("modality '" + s.name + "' has dim 0");
    if (!names.insert(s.name).second) throw ConfigError("duplicate modality '" + s.name + "'");
  }
  std::set<std::string> task_names;
  std::size_t clusters = 0;
  for (const auto& t : tasks_) {
    t.validate();
    if (!task_names.insert(t.name).second) throw ConfigError("duplicate task '" + t.name + "'");
    if (t.problem == ProblemClass::cluster) ++clusters;
  }
  if (clusters > 1) throw ConfigError("at most one cluster task per dataset");
  embeddings_.resize(schemas_.size());
  labels_.resize(tasks_.size());
}

void Dataset::add_sample(std::string sample_id, std::string patient_id,
                         const std::vector<std::vector<double>>& embeddings,
                         std::vector<std::optional<double>> labels) {
  if (sample_id.empty()) throw FormatError("empty sample_id");
  if (patient_id.empty()) throw FormatError("sample '" + sample_id + "' has an empty patient_id");
  if (id_set_.contains(sample_id)) {
    throw FormatError("duplicate sample_id '" + sample_id + "'");
  }
  if (embeddings.size() != schemas_.size()) {
    throw FormatError("sample '" + sample_id + "' has " + std::to_string(embeddings.size()) +
                      " modalities, expected " + std::to_string(schemas_.size()));
  }
  for (std::size_t m = 0; m < schemas_.size(); ++m) {
    if (embeddings[m].size() != schemas_[m].dim) {
      throw FormatError("sample '" + sample_id + "' modality '" + schemas_[m].name + "' has dim " +
                        std::to_string(embeddings[m].size()) + ", expected " +
                        std::to_string(schemas_[m].dim));
    }
    if (!all_finite(embeddings[m])) {
      throw FormatError("sample '" + sample_id + "' has a non-finite embedding value");
    }
  }
  if (labels.size() != tasks_.size()) {
    throw FormatError("sample '" + sample_id + "' has " + std::to_string(labels.size()) +
                      " label slots, expected " + std::to_string(tasks_.size()));
  }
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    if (!labels[t]) continue;
    const double y = *labels[t];
    const TaskSpec& task = tasks_[t];
    const std::string where = "sample '" + sample_id + "' task '" + task.name + "'";
    switch (task.problem) {
      case ProblemClass::binary:
        if (y != 0.0 && y != 1.0) throw FormatError(where + ": binary label must be 0 or 1");
        break;
      case ProblemClass::multiclass:
        if (!(y >= 0.0) || y != std::floor(y) || y >= static_cast<double>(task.num_classes)) {
          throw FormatError(where + ": class index out of range");
        }
        break;
      case ProblemClass::regression:
        if (!std::isfinite(y)) throw FormatError(where + ": non-finite regression target");
        break;
      case ProblemClass::cluster:
        throw FormatError(where + ": cluster tasks carry no labels");
    }
  }
  id_set_.insert(sample_id);
  sample_ids_.push_back(std::move(sample_id));
  patient_ids_.push_back(std::move(patient_id));
  for (std::size_t m = 0; m < schemas_.size(); ++m)
    embeddings_[m].insert(embeddings_[m].end(), embeddings[m].begin(), embeddings[m].end());
  for (std::size_t t = 0; t < tasks_.size(); ++t) labels_[t].push_back(labels[t]);
}

std::span<const double> Dataset::embedding(std::size_t modality, std::size_t sample) const {
  const std::size_t dim = schemas_.at(modality).dim;
  return {embeddings_[modality].data() + sample * dim, dim};
}

Matrix Dataset::embedding_rows(std::size_t modality, std::span<const std::size_t> samples) const {
  const std::size_t dim = schemas_.at(modality).dim;
  Matrix out(samples.size(), dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto src = embedding(modality, samples[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::size_t Dataset::total_dim() const {
  std::size_t d = 0;
  for (const auto& s : schemas_) d += s.dim;
  return d;
}

Matrix Dataset::concatenated_rows(std::span<const std::size_t> samples) const {
  Matrix out(samples.size(), total_dim());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::size_t offset = 0;
    for (std::size_t m = 0; m < schemas_.size(); ++m) {
      auto src = embedding(m, samples[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin() + static_cast<long>(offset));
      offset += src.size();
    }
  }
  return out;
}

std::optional<std::size_t> Dataset::find_task(std::string_view name) const {
  for (std::size_t t = 0; t < tasks_.size(); ++t)
    if (tasks_[t].name == name) return t;
  return std::nullopt;
}

std::size_t Dataset::task_index(std::string_view name) const {
  auto found = find_task(name);
  if (!found) throw ContractError("unknown task '" + std::string(name) + "'");
  return *found;
}

std::size_t Dataset::labeled_count(std::size_t task) const {
  const auto& col = labels_.at(task);
  return static_cast<std::size_t>(std::count_if(col.begin(), col.end(), [](const auto& v) {
    return v.has_value();
  }));
}

std::size_t Dataset::positive_count(std::size_t task) const {
  const auto& col = labels_.at(task);
  return static_cast<std::size_t>(std::count_if(col.begin(), col.end(), [](const auto& v) {
    return v.has_value() && *v == 1.0;
  }));
}

std::vector<std::string> Dataset::patients() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& p : patient_ids_)
    if (seen.insert(p).second) out.push_back(p);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> samples) const {
  Dataset out(schemas_, tasks_);
  out.sample_ids_.reserve(samples.size());
  for (std::size_t idx : samples) {
    if (idx >= size()) throw IndexError("subset index " + std::to_string(idx) + " out of range");
    if (!out.id_set_.insert(sample_ids_[idx]).second) {
      throw ContractError("subset repeats sample '" + sample_ids_[idx] + "'");
    }
    out.sample_ids_.push_back(sample_ids_[idx]);
    out.patient_ids_.push_back(patient_ids_[idx]);
    for (std::size_t m = 0; m < schemas_.size(); ++m) {
      auto src = embedding(m, idx);
      out.embeddings_[m].insert(out.embeddings_[m].end(), src.begin(), src.end());
    }
    for (std::size_t t = 0; t < tasks_.size(); ++t) out.labels_[t].push_back(labels_[t][idx]);
  }
  return out;
}

Dataset Dataset::with_tasks(std::span<const std::string> task_names) const {
  std::vector<TaskSpec> tasks;
  std::vector<std::size_t> source;
  for (const auto& name : task_names) {
    const std::size_t t = task_index(name);
    tasks.push_back(tasks_[t]);
    source.push_back(t);
  }
  Dataset out(schemas_, std::move(tasks));
  out.sample_ids_ = sample_ids_;
  out.patient_ids_ = patient_ids_;
  out.id_set_ = id_set_;
  out.embeddings_ = embeddings_;
  for (std::size_t k = 0; k < source.size(); ++k) out.labels_[k] = labels_[source[k]];
  return out;
}

// ---------------------------------------------------------------------------
// Files

namespace {

using nlohmann::json;

std::string at_row(const std::filesystem::path& file, std::size_t row) {
  return "'" + file.string() + "' row " + std::to_string(row);
}

template <typename T>
T require_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw FormatError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  json manifest;
  try {
    manifest = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw FormatError("manifest '" + manifest_path.string() + "': " + e.what());
  }
  const std::string where = "manifest '" + manifest_path.string() + "'";
  const auto base = manifest_path.parent_path();

  std::vector<ModalitySchema> schemas;
  std::vector<std::filesystem::path> files;
  if (!manifest.contains("modalities") || !manifest["modalities"].is_array()) {
    throw FormatError(where + ": 'modalities' must be a list");
  }
  for (const auto& m : manifest["modalities"]) {
    const auto dim = require_field<long long>(m, "dim", where);
    if (dim < 1) throw FormatError(where + ": modality dim must be >= 1");
    schemas.push_back({require_field<std::string>(m, "name", where), static_cast<std::size_t>(dim)});
    files.push_back(base / require_field<std::string>(m, "file", where));
  }
  std::vector<TaskSpec> tasks;
  if (!manifest.contains("tasks") || !manifest["tasks"].is_array()) {
    throw FormatError(where + ": 'tasks' must be a list");
  }
  for (const auto& t : manifest["tasks"]) {
    TaskSpec spec;
    spec.name = require_field<std::string>(t, "name", where);
    spec.problem = parse_problem_class(require_field<std::string>(t, "class", where));
    if (t.contains("num_classes")) spec.num_classes = t["num_classes"].get<std::size_t>();
    if (t.contains("cluster_k")) spec.cluster_k = t["cluster_k"].get<std::size_t>();
    tasks.push_back(spec);
  }
  const auto labels_file = base / require_field<std::string>(manifest, "labels_file", where);
  const std::string sid_col = manifest.value("sample_id_column", std::string("sample_id"));
  const std::string pid_col = manifest.value("patient_id_column", std::string("patient_id"));

  Dataset shape_check = [&] {
    try {
      return Dataset(schemas, tasks);
    } catch (const ConfigError& e) {
      throw FormatError(where + ": " + e.what());
    }
  }();
  (void)shape_check;

  // Embeddings, keyed by sample id.
  std::vector<std::unordered_map<std::string, std::vector<double>>> emb(schemas.size());
  for (std::size_t m = 0; m < schemas.size(); ++m) {
    const auto lines = read_lines(files[m]);
    if (lines.empty()) throw FormatError("'" + files[m].string() + "' has no header row");
    const auto header = split_csv_line(lines[0]);
    if (header.size() != schemas[m].dim + 1) {
      throw FormatError(at_row(files[m], 0) + ": header has " + std::to_string(header.size() - 1) +
                        " feature columns, manifest dim is " + std::to_string(schemas[m].dim));
    }
    if (header[0] != sid_col) {
      throw FormatError(at_row(files[m], 0) + ": first column must be '" + sid_col + "'");
    }
    for (std::size_t r = 1; r < lines.size(); ++r) {
      if (lines[r].empty()) continue;
      const auto fields = split_csv_line(lines[r]);
      if (fields.size() != schemas[m].dim + 1) {
        throw FormatError(at_row(files[m], r) + ": " + std::to_string(fields.size() - 1) +
                          " embedding values, manifest dim is " + std::to_string(schemas[m].dim));
      }
      std::vector<double> values(schemas[m].dim);
      for (std::size_t k = 0; k < values.size(); ++k) {
        auto v = parse_double(fields[k + 1]);
        if (!v) throw FormatError(at_row(files[m], r) + ": bad number '" + std::string(fields[k + 1]) + "'");
        values[k] = *v;
      }
      if (!emb[m].emplace(std::string(fields[0]), std::move(values)).second) {
        throw FormatError(at_row(files[m], r) + ": duplicate sample_id '" + std::string(fields[0]) + "'");
      }
    }
  }

  const auto lines = read_lines(labels_file);
  if (lines.empty()) throw FormatError("'" + labels_file.string() + "' has no header row");
  const auto header = split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != sid_col || header[1] != pid_col) {
    throw FormatError(at_row(labels_file, 0) + ": header must start with '" + sid_col + "," +
                      pid_col + "'");
  }
  std::vector<std::size_t> column_task;
  for (std::size_t c = 2; c < header.size(); ++c) {
    auto it = std::find_if(tasks.begin(), tasks.end(),
                           [&](const TaskSpec& t) { return t.name == header[c]; });
    if (it == tasks.end()) {
      throw FormatError(at_row(labels_file, 0) + ": column '" + std::string(header[c]) +
                        "' is not a declared task");
    }
    column_task.push_back(static_cast<std::size_t>(it - tasks.begin()));
  }
  for (const auto& t : tasks) {
    if (!t.supervised()) continue;
    if (std::find(header.begin() + 2, header.end(), t.name) == header.end()) {
      throw FormatError(at_row(labels_file, 0) + ": no column for task '" + t.name + "'");
    }
  }

  Dataset ds(schemas, tasks);
  const bool any_supervised =
      std::any_of(tasks.begin(), tasks.end(), [](const TaskSpec& t) { return t.supervised(); });
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].empty()) continue;
    const auto fields = split_csv_line(lines[r]);
    if (fields.size() != header.size()) {
      throw FormatError(at_row(labels_file, r) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    const std::string sid(fields[0]);
    std::vector<std::vector<double>> embeddings;
    for (std::size_t m = 0; m < schemas.size(); ++m) {
      auto it = emb[m].find(sid);
      if (it == emb[m].end()) {
        throw FormatError(at_row(labels_file, r) + ": sample '" + sid + "' missing from '" +
                          files[m].string() + "'");
      }
      embeddings.push_back(it->second);
    }
    std::vector<std::optional<double>> labels(tasks.size());
    bool has_label = false;
    for (std::size_t c = 2; c < fields.size(); ++c) {
      if (fields[c].empty()) continue;
      auto v = parse_double(fields[c]);
      if (!v) throw FormatError(at_row(labels_file, r) + ": bad label '" + std::string(fields[c]) + "'");
      const std::size_t t = column_task[c - 2];
      if (!tasks[t].supervised()) {
        throw FormatError(at_row(labels_file, r) + ": cluster task '" + tasks[t].name +
                          "' carries no labels");
      }
      labels[t] = *v;
      has_label = true;
    }
    if (any_supervised && !has_label) {
      throw FormatError(at_row(labels_file, r) + ": sample '" + sid + "' has no label");
    }
    try {
      ds.add_sample(sid, std::string(fields[1]), embeddings, std::move(labels));
    } catch (const FormatError& e) {
      throw FormatError(at_row(labels_file, r) + ": " + e.what());
    }
  }
  for (std::size_t m = 0; m < schemas.size(); ++m) {
    if (emb[m].size() != ds.size()) {
      throw FormatError("'" + files[m].string() + "' has " + std::to_string(emb[m].size()) +
                        " rows but the labels file lists " + std::to_string(ds.size()) + " samples");
    }
  }
  return ds;
}

std::filesystem::path write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format"] = "m3h-manifest";
  manifest["version"] = 1;
  manifest["modalities"] = json::array();
  for (const auto& s : ds.schemas()) {
    manifest["modalities"].push_back({{"name", s.name}, {"dim", s.dim}, {"file", s.name + ".csv"}});
  }
  manifest["tasks"] = json::array();
  for (const auto& t : ds.tasks()) {
    json jt = {{"name", t.name}, {"class", std::string(to_string(t.problem))}};
    if (t.problem == ProblemClass::multiclass) jt["num_classes"] = t.num_classes;
    if (t.problem == ProblemClass::cluster) jt["cluster_k"] = t.cluster_k;
    manifest["tasks"].push_back(jt);
  }
  manifest["labels_file"] = "labels.csv";
  manifest["sample_id_column"] = "sample_id";
  manifest["patient_id_column"] = "patient_id";

  for (std::size_t m = 0; m < ds.schemas().size(); ++m) {
    std::string text = "sample_id";
    for (std::size_t k = 0; k < ds.schemas()[m].dim; ++k) text += ",f" + std::to_string(k);
    text += '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
      text += ds.sample_id(i);
      for (double v : ds.embedding(m, i)) {
        text += ',';
        text += format_double(v);
      }
      text += '\n';
    }
    write_file_atomic(dir / (ds.schemas()[m].name + ".csv"), text);
  }

  std::string text = "sample_id,patient_id";
  for (const auto& t : ds.tasks())
    if (t.supervised()) text += "," + t.name;
  text += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    text += ds.sample_id(i) + "," + ds.patient_id(i);
    for (std::size_t t = 0; t < ds.tasks().size(); ++t) {
      if (!ds.tasks()[t].supervised()) continue;
      text += ',';
      if (auto y = ds.label(t, i)) text += format_double(*y);
    }
    text += '\n';
  }
  write_file_atomic(dir / "labels.csv", text);
  const auto manifest_path = dir / "manifest.json";
  write_file_atomic(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

}  // namespace m3h
