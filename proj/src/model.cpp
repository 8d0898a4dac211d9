#include "m3h/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "m3h/error.hpp"
#include "m3h/losses.hpp"

namespace m3h {

void ModelConfig::validate() const {
  auto positive = [](const std::vector<std::size_t>& widths, const char* what) {
    if (widths.empty()) throw ConfigError(std::string(what) + " needs at least one layer");
    for (auto w : widths)
      if (w < 1) throw ConfigError(std::string(what) + " widths must be >= 1");
  };
  positive(modality_hidden, "modality_hidden");
  positive(shared_hidden, "shared_hidden");
  if (task_embed_dim < 1 || contrastive_proj_dim < 1 || autoencoder_hidden < 1 ||
      autoencoder_latent < 1) {
    throw ConfigError("model widths must be >= 1");
  }
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(contrastive_temperature > 0.0)) throw ConfigError("contrastive temperature must be > 0");
}

// ---------------------------------------------------------------------------

Var FeedForward::forward(Tape& tape, Var x) const {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    x = ad::add_bias(ad::matmul(x, tape.param(weights[k])), tape.param(biases[k]));
    if (relu[k]) x = ad::relu(x);
  }
  return x;
}

std::size_t FeedForward::in_dim(const ParameterStore& params) const {
  return params.value(weights.front()).rows();
}

std::size_t FeedForward::out_dim(const ParameterStore& params) const {
  return params.value(weights.back()).cols();
}

// ---------------------------------------------------------------------------

Var contrastive_loss(Tape& tape, std::span<const Var> projections, double temperature) {
  if (!(temperature > 0.0)) throw DomainError("contrastive temperature must be > 0");
  if (projections.size() < 2) return tape.constant(Matrix(1, 1, 0.0));
  const std::size_t n = projections[0].rows();
  if (n < 2) throw DomainError("contrastive loss needs at least 2 samples for negatives");
  std::vector<std::size_t> diagonal(n);
  std::iota(diagonal.begin(), diagonal.end(), 0);

  std::vector<Var> pair_losses;
  for (std::size_t a = 0; a < projections.size(); ++a) {
    for (std::size_t b = a + 1; b < projections.size(); ++b) {
      if (projections[b].rows() != n) throw DimensionError("contrastive loss: ragged batch");
      const Var sim = ad::scale(ad::matmul_nt(projections[a], projections[b]), 1.0 / temperature);
      const Var rows = ad::negative_log_likelihood(ad::log_softmax_rows(sim), diagonal);
      const Var cols =
          ad::negative_log_likelihood(ad::log_softmax_rows(ad::transpose(sim)), diagonal);
      pair_losses.push_back(ad::scale(ad::add(rows, cols), 0.5));
    }
  }
  Var total = pair_losses[0];
  for (std::size_t k = 1; k < pair_losses.size(); ++k) total = ad::add(total, pair_losses[k]);
  return ad::scale(total, 1.0 / static_cast<double>(pair_losses.size()));
}

double contrastive_loss(std::span<const Matrix> projections, double temperature) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& p : projections) vars.push_back(tape.constant(p));
  return contrastive_loss(tape, vars, temperature).value()(0, 0);
}

// ---------------------------------------------------------------------------

Model::Model(std::vector<ModalitySchema> schemas, std::vector<TaskSpec> tasks, ModelConfig cfg)
    : config_(std::move(cfg)), schemas_(std::move(schemas)), tasks_(std::move(tasks)) {
  config_.validate();
  Dataset shape(schemas_, tasks_);  // same validation rules as a dataset
  if (schemas_.empty()) throw ConfigError("model needs at least one modality");
  if (tasks_.empty()) throw ConfigError("model needs at least one task");
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    if (tasks_[t].supervised()) {
      supervised_.push_back(t);
    } else {
      cluster_ = t;
    }
  }

  Rng rng(config_.seed);
  const std::size_t hidden_out = config_.modality_hidden.back();
  for (const auto& s : schemas_) {
    modality_nets_.push_back(make_net(rng, "modality." + s.name, s.dim, config_.modality_hidden,
                                      std::vector<bool>(config_.modality_hidden.size(), true)));
  }
  for (const auto& s : schemas_) {
    projections_.push_back(make_net(rng, "contrastive." + s.name, hidden_out,
                                    {config_.contrastive_proj_dim}, {false}));
  }
  shared_net_ = make_net(rng, "shared", hidden_out * schemas_.size(), config_.shared_hidden,
                         std::vector<bool>(config_.shared_hidden.size(), true));
  const std::size_t shared_out = config_.shared_hidden.back();
  const std::size_t n_feature = config_.task_embed_dim;
  for (std::size_t t : supervised_) {
    heads_.push_back(make_net(rng, "head." + tasks_[t].name, shared_out, {n_feature}, {true}));
  }
  if (!supervised_.empty()) {
    attention_.query = glorot(rng, "attention.query", n_feature, n_feature);
    attention_.key = glorot(rng, "attention.key", n_feature, n_feature);
    attention_.value = glorot(rng, "attention.value", n_feature, n_feature);
    attention_.token = glorot(rng, "attention.token", supervised_.size(), n_feature);
  }
  for (std::size_t t : supervised_) {
    const TaskSpec& task = tasks_[t];
    const std::size_t width = task.problem == ProblemClass::multiclass ? task.num_classes : 1;
    outputs_.push_back(make_net(rng, "output." + task.name, n_feature, {width}, {false}));
  }
  if (cluster_) {
    const std::size_t d = shape.total_dim();
    encoder_ = make_net(rng, "autoencoder.encoder", d,
                        {config_.autoencoder_hidden, config_.autoencoder_latent}, {true, false});
    decoder_ = make_net(rng, "autoencoder.decoder", config_.autoencoder_latent,
                        {config_.autoencoder_hidden, d}, {true, false});
  }
}

std::size_t Model::glorot(Rng& rng, const std::string& name, std::size_t fan_in,
                          std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (double& x : w.values()) x = rng.uniform(-limit, limit);
  return params_.add(name, std::move(w));
}

std::size_t Model::zeros(const std::string& name, std::size_t rows, std::size_t cols) {
  return params_.add(name, Matrix(rows, cols));
}

FeedForward Model::make_net(Rng& rng, const std::string& prefix, std::size_t in,
                            const std::vector<std::size_t>& widths, std::vector<bool> relu) {
  FeedForward net;
  std::size_t fan_in = in;
  for (std::size_t k = 0; k < widths.size(); ++k) {
    const std::string layer = prefix + ".layer" + std::to_string(k);
    net.weights.push_back(glorot(rng, layer + ".weight", fan_in, widths[k]));
    net.biases.push_back(zeros(layer + ".bias", 1, widths[k]));
    fan_in = widths[k];
  }
  net.relu = std::move(relu);
  return net;
}

std::optional<std::size_t> Model::find_task(std::string_view name) const {
  for (std::size_t t = 0; t < tasks_.size(); ++t)
    if (tasks_[t].name == name) return t;
  return std::nullopt;
}

Var Model::modality_forward(Tape& tape, std::size_t modality, Var embedding) const {
  if (modality >= schemas_.size()) throw IndexError("modality index out of range");
  if (embedding.cols() != schemas_[modality].dim) {
    throw DimensionError("modality '" + schemas_[modality].name + "' expects dim " +
                         std::to_string(schemas_[modality].dim) + ", got " +
                         embedding.value().shape_string());
  }
  return modality_nets_[modality].forward(tape, embedding);
}

Var Model::fuse_and_share(Tape& tape, std::span<const Var> per_modality) const {
  if (per_modality.size() != schemas_.size()) {
    throw ContractError("fuse_and_share expects " + std::to_string(schemas_.size()) +
                        " modality vectors, got " + std::to_string(per_modality.size()));
  }
  const Var fused = per_modality.size() == 1 ? per_modality[0] : ad::concat_cols(per_modality);
  return shared_net_.forward(tape, fused);
}

Var Model::contrastive_projection(Tape& tape, std::size_t modality, Var hidden) const {
  return ad::normalize_rows(projections_.at(modality).forward(tape, hidden));
}

std::vector<Var> Model::task_heads_forward(Tape& tape, Var shared) const {
  std::vector<Var> out;
  out.reserve(heads_.size());
  for (const auto& head : heads_) out.push_back(head.forward(tape, shared));
  return out;
}

AttentionVars Model::cross_task_attention(Tape& tape, std::span<const Var> task_embeddings) const {
  if (supervised_.empty()) throw ContractError("model has no supervised tasks to attend over");
  if (task_embeddings.size() != supervised_.size()) {
    throw DimensionError("cross-task attention expects " + std::to_string(supervised_.size()) +
                         " task embeddings");
  }
  return m3h::cross_task_attention(tape, task_embeddings, attention_, config_.alpha);
}

Var Model::task_output(Tape& tape, Var attended, std::size_t task) const {
  if (task >= tasks_.size()) throw IndexError("task index out of range");
  const TaskSpec& spec = tasks_[task];
  if (!spec.supervised()) {
    throw ContractError("cluster task '" + spec.name + "' has no output layer");
  }
  const auto pos = static_cast<std::size_t>(
      std::find(supervised_.begin(), supervised_.end(), task) - supervised_.begin());
  const Var z = outputs_[pos].forward(tape, attended);
  switch (spec.problem) {
    case ProblemClass::binary: return ad::sigmoid(z);
    case ProblemClass::multiclass: return ad::log_softmax_rows(z);
    default: return z;
  }
}

AutoencoderVars Model::autoencoder_forward(Tape& tape, Var concatenated) const {
  if (!cluster_) throw ContractError("model has no cluster task");
  const std::size_t d = encoder_.in_dim(params_);
  if (concatenated.cols() != d) {
    throw DimensionError("autoencoder expects width " + std::to_string(d) + ", got " +
                         concatenated.value().shape_string());
  }
  AutoencoderVars out;
  out.latent = encoder_.forward(tape, concatenated);
  out.reconstruction = decoder_.forward(tape, out.latent);
  return out;
}

void Model::check_embeddings(std::span<const Matrix> embeddings) const {
  if (embeddings.size() != schemas_.size()) {
    throw ContractError("expected " + std::to_string(schemas_.size()) + " modality batches, got " +
                        std::to_string(embeddings.size()));
  }
  for (std::size_t m = 0; m < embeddings.size(); ++m) {
    if (embeddings[m].cols() != schemas_[m].dim || embeddings[m].rows() != embeddings[0].rows()) {
      throw DimensionError("modality '" + schemas_[m].name + "' batch has shape " +
                           embeddings[m].shape_string());
    }
  }
}

Model::SupervisedPass Model::forward_supervised(Tape& tape, std::span<const Matrix> embeddings) const {
  check_embeddings(embeddings);
  SupervisedPass pass;
  for (std::size_t m = 0; m < schemas_.size(); ++m)
    pass.hidden.push_back(modality_forward(tape, m, tape.constant(embeddings[m])));
  const Var shared = fuse_and_share(tape, pass.hidden);
  pass.task_inputs = task_heads_forward(tape, shared);
  pass.attention = cross_task_attention(tape, pass.task_inputs);
  for (std::size_t k = 0; k < supervised_.size(); ++k)
    pass.outputs.push_back(task_output(tape, pass.attention.outputs[k], supervised_[k]));
  return pass;
}

Predictions Model::predict(std::span<const Matrix> embeddings) const {
  check_embeddings(embeddings);
  constexpr std::size_t kChunk = 512;
  const std::size_t n = embeddings.empty() ? 0 : embeddings[0].rows();
  Predictions out;
  out.per_task.resize(tasks_.size());
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    const TaskSpec& spec = tasks_[t];
    std::size_t width = 1;
    if (spec.problem == ProblemClass::multiclass) width = spec.num_classes;
    if (spec.problem == ProblemClass::cluster) width = config_.autoencoder_latent;
    out.per_task[t] = Matrix(n, width);
  }
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t count = std::min(kChunk, n - begin);
    std::vector<Matrix> chunk;
    for (const auto& e : embeddings) {
      Matrix part(count, e.cols());
      std::copy(e.data() + begin * e.cols(), e.data() + (begin + count) * e.cols(), part.data());
      chunk.push_back(std::move(part));
    }
    Tape tape(&params_);
    auto emit = [&](std::size_t task, const Matrix& values) {
      Matrix& dst = out.per_task[task];
      std::copy(values.data(), values.data() + values.size(), dst.data() + begin * dst.cols());
    };
    if (!supervised_.empty()) {
      const auto pass = forward_supervised(tape, chunk);
      for (std::size_t k = 0; k < supervised_.size(); ++k) emit(supervised_[k], pass.outputs[k].value());
    }
    if (cluster_) {
      std::vector<Var> parts;
      for (const auto& c : chunk) parts.push_back(tape.constant(c));
      const Var concat = parts.size() == 1 ? parts[0] : ad::concat_cols(parts);
      emit(*cluster_, autoencoder_forward(tape, concat).latent.value());
    }
  }
  return out;
}

Predictions Model::predict(const Dataset& ds, std::span<const std::size_t> samples) const {
  if (ds.schemas() != schemas_) throw ContractError("dataset modalities do not match the model");
  std::vector<Matrix> embeddings;
  for (std::size_t m = 0; m < schemas_.size(); ++m) embeddings.push_back(ds.embedding_rows(m, samples));
  return predict(embeddings);
}

void Model::set_output_bias(std::size_t task, double bias) {
  if (task >= tasks_.size() || tasks_[task].problem != ProblemClass::binary) {
    throw ContractError("output bias can only be set on a binary task");
  }
  const auto pos = static_cast<std::size_t>(
      std::find(supervised_.begin(), supervised_.end(), task) - supervised_.begin());
  params_.value(outputs_[pos].biases.back())(0, 0) = bias;
}

}  // namespace m3h
