#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "m3h/losses.hpp"
#include "m3h/matrix.hpp"

namespace m3h {

struct ModalitySchema {
  std::string name;
  std::size_t dim = 0;
  friend bool operator==(const ModalitySchema&, const ModalitySchema&) = default;
};

inline constexpr std::size_t kDefaultClusterK = 15;

struct TaskSpec {
  std::string name;
  ProblemClass problem = ProblemClass::binary;
  std::size_t num_classes = 0;               // multiclass only
  std::size_t cluster_k = kDefaultClusterK;  // cluster only

  bool supervised() const { return problem != ProblemClass::cluster; }
  // Throws ConfigError when a class-specific count is invalid.
  void validate() const;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

// Columnar store of patient-grouped samples. Embeddings are held per modality,
// labels per task; an absent label is std::nullopt and cluster tasks carry none.
class Dataset {
 public:
  Dataset() = default;
  // Validates names, dims and the one-cluster-task rule; throws ConfigError.
  Dataset(std::vector<ModalitySchema> schemas, std::vector<TaskSpec> tasks);

  // Throws FormatError on duplicate ids, bad dims or invalid label values.
  void add_sample(std::string sample_id, std::string patient_id,
                  const std::vector<std::vector<double>>& embeddings,
                  std::vector<std::optional<double>> labels);

  std::size_t size() const { return sample_ids_.size(); }
  const std::vector<ModalitySchema>& schemas() const { return schemas_; }
  const std::vector<TaskSpec>& tasks() const { return tasks_; }

  const std::string& sample_id(std::size_t i) const { return sample_ids_.at(i); }
  const std::string& patient_id(std::size_t i) const { return patient_ids_.at(i); }
  std::span<const double> embedding(std::size_t modality, std::size_t sample) const;
  std::optional<double> label(std::size_t task, std::size_t sample) const {
    return labels_.at(task).at(sample);
  }

  // Rows `samples` of one modality as a matrix.
  Matrix embedding_rows(std::size_t modality, std::span<const std::size_t> samples) const;
  // All modalities concatenated in declared order.
  Matrix concatenated_rows(std::span<const std::size_t> samples) const;
  std::size_t total_dim() const;

  std::optional<std::size_t> find_task(std::string_view name) const;
  std::size_t task_index(std::string_view name) const;  // throws ContractError
  std::size_t labeled_count(std::size_t task) const;
  // Binary tasks: number of labels equal to 1.
  std::size_t positive_count(std::size_t task) const;

  // Distinct patient ids in order of first appearance.
  std::vector<std::string> patients() const;

  Dataset subset(std::span<const std::size_t> samples) const;
  // Same samples, only the named tasks (in the given order).
  Dataset with_tasks(std::span<const std::string> task_names) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<ModalitySchema> schemas_;
  std::vector<TaskSpec> tasks_;
  std::vector<std::string> sample_ids_;
  std::vector<std::string> patient_ids_;
  std::unordered_set<std::string> id_set_;
  std::vector<std::vector<double>> embeddings_;                 // per modality, row-major
  std::vector<std::vector<std::optional<double>>> labels_;      // per task
};

// Manifest and CSV files.
//
// manifest (JSON):
//   {"format": "m3h-manifest", "version": 1,
//    "modalities": [{"name", "dim", "file"}...],
//    "tasks": [{"name", "class", "num_classes"?, "cluster_k"?}...],
//    "labels_file", "sample_id_column", "patient_id_column"}
// embedding CSV:  sample_id,f0,...,f{dim-1}
// labels CSV:     sample_id,patient_id,<supervised task>...   (empty cell = missing)
// Relative file names resolve against the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes manifest.json, labels.csv and one <modality>.csv per modality into
// `dir`; returns the manifest path.
std::filesystem::path write_dataset(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace m3h
