#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "m3h/attention.hpp"
#include "m3h/autodiff.hpp"
#include "m3h/dataset.hpp"
#include "m3h/random.hpp"

namespace m3h {

struct ModelConfig {
  std::vector<std::size_t> modality_hidden{256, 128};
  std::vector<std::size_t> shared_hidden{256, 128};
  std::size_t task_embed_dim = 64;
  std::size_t contrastive_proj_dim = 64;
  double contrastive_temperature = 0.1;
  double alpha = 0.1;
  std::size_t autoencoder_hidden = 512;
  std::size_t autoencoder_latent = 128;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Stack of affine layers, each followed by a rectified-linear unit unless
// `relu` says otherwise for that layer.
struct FeedForward {
  std::vector<std::size_t> weights;
  std::vector<std::size_t> biases;
  std::vector<bool> relu;

  Var forward(Tape& tape, Var x) const;
  std::size_t in_dim(const ParameterStore& params) const;
  std::size_t out_dim(const ParameterStore& params) const;
};

// Symmetric temperature-scaled matching loss over every unordered modality pair.
// For a pair (a, b) with unit-norm rows, S = Z_a Z_b^T / tau and the pair loss is
// the mean of the row-wise and column-wise cross-entropies against the diagonal.
// Returns the mean over pairs; 0 with fewer than two modalities. Throws
// DomainError when the batch has fewer than two rows.
Var contrastive_loss(Tape& tape, std::span<const Var> projections, double temperature);
double contrastive_loss(std::span<const Matrix> projections, double temperature);

struct AutoencoderVars {
  Var latent;
  Var reconstruction;
};

// Per-task predictions for a batch.
//   binary: n x 1 probabilities; multiclass: n x K log-probabilities;
//   regression: n x 1; cluster: n x autoencoder_latent latents.
struct Predictions {
  std::vector<Matrix> per_task;  // aligned with Model::tasks()
};

class Model {
 public:
  Model() = default;
  // `tasks` is the jointly learned set (supervised tasks in declaration order
  // plus at most one cluster task). Parameters are drawn from cfg.seed.
  Model(std::vector<ModalitySchema> schemas, std::vector<TaskSpec> tasks, ModelConfig cfg);

  const ModelConfig& config() const { return config_; }
  const std::vector<ModalitySchema>& schemas() const { return schemas_; }
  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  // Indices into tasks() of the supervised tasks, in order; this is the
  // attention task set.
  const std::vector<std::size_t>& supervised() const { return supervised_; }
  std::optional<std::size_t> cluster_task() const { return cluster_; }
  std::optional<std::size_t> find_task(std::string_view name) const;

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const AttentionParamIds& attention_ids() const { return attention_; }

  // Tape-level stages.
  Var modality_forward(Tape& tape, std::size_t modality, Var embedding) const;
  Var fuse_and_share(Tape& tape, std::span<const Var> per_modality) const;
  Var contrastive_projection(Tape& tape, std::size_t modality, Var hidden) const;
  // One n_batch x task_embed_dim matrix per supervised task.
  std::vector<Var> task_heads_forward(Tape& tape, Var shared) const;
  AttentionVars cross_task_attention(Tape& tape, std::span<const Var> task_embeddings) const;
  // `task` indexes tasks(); throws ContractError for the cluster task.
  Var task_output(Tape& tape, Var attended, std::size_t task) const;
  AutoencoderVars autoencoder_forward(Tape& tape, Var concatenated) const;

  struct SupervisedPass {
    std::vector<Var> hidden;       // per modality
    std::vector<Var> task_inputs;  // x_s slices
    AttentionVars attention;
    std::vector<Var> outputs;      // per supervised task
  };
  // embeddings: one n x dim matrix per modality, declared order.
  SupervisedPass forward_supervised(Tape& tape, std::span<const Matrix> embeddings) const;

  // Value-level inference, batched internally.
  Predictions predict(std::span<const Matrix> embeddings) const;
  Predictions predict(const Dataset& ds, std::span<const std::size_t> samples) const;

  // Sets a binary task's output bias.
  void set_output_bias(std::size_t task, double bias);

  friend bool operator==(const Model& a, const Model& b) {
    return a.config_ == b.config_ && a.schemas_ == b.schemas_ && a.tasks_ == b.tasks_ &&
           a.params_ == b.params_;
  }

 private:
  FeedForward make_net(Rng& rng, const std::string& prefix, std::size_t in,
                       const std::vector<std::size_t>& widths, std::vector<bool> relu);
  std::size_t glorot(Rng& rng, const std::string& name, std::size_t fan_in, std::size_t fan_out);
  std::size_t zeros(const std::string& name, std::size_t rows, std::size_t cols);
  void check_embeddings(std::span<const Matrix> embeddings) const;

  ModelConfig config_;
  std::vector<ModalitySchema> schemas_;
  std::vector<TaskSpec> tasks_;
  std::vector<std::size_t> supervised_;
  std::optional<std::size_t> cluster_;
  ParameterStore params_;

  std::vector<FeedForward> modality_nets_;
  std::vector<FeedForward> projections_;
  FeedForward shared_net_;
  std::vector<FeedForward> heads_;    // aligned with supervised_
  std::vector<FeedForward> outputs_;  // aligned with supervised_
  AttentionParamIds attention_;
  FeedForward encoder_;
  FeedForward decoder_;
};

}  // namespace m3h
