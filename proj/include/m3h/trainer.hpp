#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "m3h/dataset.hpp"
#include "m3h/metrics.hpp"
#include "m3h/model.hpp"
#include "m3h/optimizer.hpp"

namespace m3h {

// How the per-batch loss terms are optimized.
//   sequential: each term gets its own backward pass and optimizer step, in
//               the order contrastive, supervised tasks (declaration order),
//               cluster reconstruction.
//   summed:     one step on the weighted sum of all terms.
enum class LossSchedule { sequential, summed };

struct Hyperparams {
  std::size_t batch_size = 256;
  double learning_rate = 0.0005;
  friend auto operator<=>(const Hyperparams&, const Hyperparams&) = default;
};

struct TrainConfig {
  std::vector<std::string> task_set;  // empty: every task in the dataset
  std::size_t epochs = 15;
  Hyperparams hyper;
  std::vector<std::size_t> batch_sizes{256, 512};
  std::vector<double> learning_rates{0.0005, 0.001};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double contrastive_weight = 1.0;
  std::map<std::string, double> task_weights;  // absent: 1
  LossSchedule schedule = LossSchedule::sequential;
  double clip_norm = 0.0;  // global-norm clipping; 0 disables
  bool imbalance_bias = true;
  std::size_t folds = 5;
  std::size_t workers = 1;  // threads for independent fold/grid runs
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  double weight_for(const std::string& task) const;
  std::vector<Hyperparams> grid() const;  // sorted by (batch_size, learning_rate)
};

// Imbalanced binary tasks (positives under 10% of labelled samples) start
// with output bias ln(n_positive / n_negative).
inline constexpr double kImbalanceThreshold = 0.10;
double init_output_bias(std::size_t n_positive, std::size_t n_negative);
// Applies the rule to every binary task of `model`; returns the tasks it fired for.
std::vector<std::string> apply_imbalance_bias(Model& model, const Dataset& train_ds);

// One batch, with per-task targets restricted to labelled rows.
struct Batch {
  struct Targets {
    std::vector<std::size_t> rows;        // positions within the batch
    Matrix values;                        // rows.size() x 1
    std::vector<std::size_t> classes;     // multiclass only
  };
  std::vector<Matrix> embeddings;  // per modality
  Matrix concatenated;             // all modalities side by side
  std::vector<Targets> targets;    // aligned with Model::tasks()
  std::size_t size() const { return embeddings.empty() ? 0 : embeddings[0].rows(); }
};

// Tasks are matched between model and dataset by name.
Batch make_batch(const Model& model, const Dataset& ds, std::span<const std::size_t> samples);

struct TermValue {
  std::string term;   // contrastive | binary | multiclass | regression | cluster
  std::string task;   // empty for contrastive
  std::optional<double> value;  // absent when the batch could not form the term
};

// Loss terms of a model in schedule order: contrastive, each supervised task
// in declaration order, then the cluster reconstruction.
struct LossTerm {
  std::string term;  // contrastive | binary | multiclass | regression | cluster
  std::string task;  // empty for contrastive
  std::optional<std::size_t> model_task;  // index into Model::tasks()
};
std::vector<LossTerm> loss_terms(const Model& model);

// Unweighted loss of one term on a fresh forward pass; nullopt when the batch
// cannot form it (no labelled rows, fewer than two modalities or rows).
std::optional<Var> build_term_loss(const Model& model, Tape& tape, const Batch& batch,
                                   const LossTerm& term);

// Applies every loss term of the schedule to one batch and returns the
// unweighted term values measured before their respective updates. Terms with
// weight 0 are measured but produce no update. Throws NumericError naming the
// term on a non-finite loss.
std::vector<TermValue> train_step(Model& model, Adam& optimizer, const Batch& batch,
                                  const TrainConfig& config);

struct LogEntry {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  TermValue term;
};

struct TrainedModel {
  Model model;
  TrainConfig config;
  std::vector<ScoreReport> scores;  // filled by callers that evaluate
  std::vector<LogEntry> log;
  std::vector<std::string> bias_initialized;
};

// The model's task list: config.task_set (or every dataset task) in dataset order.
std::vector<TaskSpec> resolve_tasks(const Dataset& ds, const TrainConfig& config);

// Seeded per-epoch shuffles, epochs x batches train steps, the last partial
// batch kept. The model is initialized from mix_seed(config.seed, ...) so the
// training seed alone determines the run.
TrainedModel train(const Dataset& train_ds, const ModelConfig& model_config,
                   const TrainConfig& config);

std::string format_training_log(const std::vector<LogEntry>& log);

// Scores one fold: (grid point, fold index, train part, validation part) -> score in [0, 1].
using FoldScorer =
    std::function<double(const Hyperparams&, std::size_t, const Dataset&, const Dataset&)>;

struct CvRow {
  Hyperparams point;
  std::vector<double> fold_scores;
  double mean_score = 0.0;
};

struct CvResult {
  Hyperparams best;
  std::vector<CvRow> table;
};

// Mean normalized validation score across valid tasks; NaN when no task was scorable.
double mean_normalized(const std::vector<ScoreReport>& scores);

// k-fold protocol over the hyperparameter grid. The default scorer trains on
// the fold and averages normalized validation scores over tasks. Ties go to
// the lexicographically smaller (batch_size, learning_rate).
CvResult cross_validate(const Dataset& train_ds, const ModelConfig& model_config,
                        const TrainConfig& config, FoldScorer scorer = {});

std::string format_cv_table(const CvResult& result);

}  // namespace m3h
