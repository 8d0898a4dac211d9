#include "m3h/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "m3h/error.hpp"
#include "m3h/evaluate.hpp"
#include "m3h/losses.hpp"
#include "m3h/parallel.hpp"
#include "m3h/random.hpp"
#include "m3h/split.hpp"
#include "m3h/text_io.hpp"

namespace m3h {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (hyper.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(hyper.learning_rate > 0.0) || !std::isfinite(hyper.learning_rate))
    throw ConfigError("learning rate must be positive");
  if (batch_sizes.empty() || learning_rates.empty())
    throw ConfigError("hyperparameter grid must not be empty");
  for (auto b : batch_sizes)
    if (b < 1) throw ConfigError("grid batch sizes must be >= 1");
  for (auto lr : learning_rates)
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("grid learning rates must be positive");
  if (!(contrastive_weight >= 0.0) || !std::isfinite(contrastive_weight))
    throw ConfigError("contrastive weight must be >= 0");
  for (const auto& [task, w] : task_weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("weight for '" + task + "' must be >= 0");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

double TrainConfig::weight_for(const std::string& task) const {
  const auto it = task_weights.find(task);
  return it == task_weights.end() ? 1.0 : it->second;
}

std::vector<Hyperparams> TrainConfig::grid() const {
  std::vector<Hyperparams> out;
  for (auto b : batch_sizes)
    for (auto lr : learning_rates) out.push_back({b, lr});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double init_output_bias(std::size_t n_positive, std::size_t n_negative) {
  if (n_positive == 0 || n_negative == 0) {
    throw DomainError("output bias needs both classes present (positives " +
                      std::to_string(n_positive) + ", negatives " + std::to_string(n_negative) + ")");
  }
  return std::log(static_cast<double>(n_positive) / static_cast<double>(n_negative));
}

std::vector<std::string> apply_imbalance_bias(Model& model, const Dataset& train_ds) {
  std::vector<std::string> fired;
  for (std::size_t t = 0; t < model.tasks().size(); ++t) {
    const TaskSpec& spec = model.tasks()[t];
    if (spec.problem != ProblemClass::binary) continue;
    const auto di = train_ds.find_task(spec.name);
    if (!di) continue;
    const std::size_t labeled = train_ds.labeled_count(*di);
    if (labeled == 0) continue;
    const std::size_t pos = train_ds.positive_count(*di);
    const double prevalence = static_cast<double>(pos) / static_cast<double>(labeled);
    if (prevalence < kImbalanceThreshold) {
      try {
        model.set_output_bias(t, init_output_bias(pos, labeled - pos));
      } catch (const Error&) {
        rethrow_with_context("task '" + spec.name + "': ");
      }
      fired.push_back(spec.name);
    } else {
      model.set_output_bias(t, 0.0);
    }
  }
  return fired;
}

Batch make_batch(const Model& model, const Dataset& ds, std::span<const std::size_t> samples) {
  if (ds.schemas() != model.schemas()) throw ContractError("dataset modalities do not match the model");
  Batch batch;
  for (std::size_t m = 0; m < ds.schemas().size(); ++m)
    batch.embeddings.push_back(ds.embedding_rows(m, samples));
  batch.concatenated = ds.concatenated_rows(samples);
  batch.targets.resize(model.tasks().size());
  for (std::size_t t = 0; t < model.tasks().size(); ++t) {
    const TaskSpec& spec = model.tasks()[t];
    if (!spec.supervised()) continue;
    const auto di = ds.find_task(spec.name);
    if (!di) continue;
    Batch::Targets& tg = batch.targets[t];
    std::vector<double> values;
    for (std::size_t r = 0; r < samples.size(); ++r) {
      const auto y = ds.label(*di, samples[r]);
      if (!y) continue;
      tg.rows.push_back(r);
      values.push_back(*y);
      if (spec.problem == ProblemClass::multiclass) tg.classes.push_back(static_cast<std::size_t>(*y));
    }
    tg.values = Matrix::column_vector(values);
  }
  return batch;
}

namespace {

std::string term_name(const TaskSpec& spec) { return std::string(to_string(spec.problem)); }

// Loss of supervised task `t` (a Model::tasks() index) on its labelled rows.
Var supervised_loss(const Model& model, const Model::SupervisedPass& pass, std::size_t t,
                    const Batch::Targets& tg) {
  const auto& sup = model.supervised();
  const auto k = static_cast<std::size_t>(std::find(sup.begin(), sup.end(), t) - sup.begin());
  Var out = pass.outputs.at(k);
  if (tg.rows.size() != out.rows()) out = ad::select_rows(out, tg.rows);
  switch (model.tasks()[t].problem) {
    case ProblemClass::binary:
      return ad::binary_cross_entropy(out, tg.values);
    case ProblemClass::multiclass:
      return ad::negative_log_likelihood(out, tg.classes);
    case ProblemClass::regression:
      return ad::mean_absolute_error(out, tg.values);
    case ProblemClass::cluster:
      break;
  }
  throw ContractError("cluster task has no supervised loss");
}

Var contrastive_term(const Model& model, Tape& tape, std::span<const Var> hidden) {
  std::vector<Var> projections;
  for (std::size_t m = 0; m < hidden.size(); ++m)
    projections.push_back(model.contrastive_projection(tape, m, hidden[m]));
  return contrastive_loss(tape, projections, model.config().contrastive_temperature);
}

Var cluster_term(const Model& model, Tape& tape, const Batch& batch) {
  const Var input = tape.constant(batch.concatenated);
  return ad::mean_squared_error(model.autoencoder_forward(tape, input).reconstruction,
                                batch.concatenated);
}

std::vector<Var> hidden_states(const Model& model, Tape& tape, const Batch& batch) {
  std::vector<Var> hidden;
  for (std::size_t m = 0; m < batch.embeddings.size(); ++m)
    hidden.push_back(model.modality_forward(tape, m, tape.constant(batch.embeddings[m])));
  return hidden;
}

double checked_value(Var loss, const std::string& label) {
  const double v = loss.value()(0, 0);
  if (!std::isfinite(v)) throw NumericError("non-finite loss in term '" + label + "'");
  return v;
}

void apply_update(Model& model, Adam& optimizer, GradientSet& grads, const TrainConfig& config) {
  if (config.clip_norm > 0.0) {
    const double norm = grads.global_norm();
    if (norm > config.clip_norm) grads.scale(config.clip_norm / norm);
  }
  optimizer.step(model.params(), grads);
}

bool contrastive_possible(const Model& model, const Batch& batch) {
  return model.schemas().size() >= 2 && batch.size() >= 2;
}

std::vector<TermValue> step_sequential(Model& model, Adam& optimizer, const Batch& batch,
                                       const TrainConfig& config) {
  std::vector<TermValue> values;
  for (const LossTerm& term : loss_terms(model)) {
    TermValue tv{term.term, term.task, std::nullopt};
    // Each term runs a fresh forward pass so it sees the previous term's update.
    Tape tape(&model.params());
    if (const auto loss = build_term_loss(model, tape, batch, term)) {
      tv.value = checked_value(*loss, term.task.empty() ? term.term : term.task);
      const double w = term.model_task ? config.weight_for(term.task) : config.contrastive_weight;
      if (w > 0.0) {
        GradientSet grads(model.params());
        tape.backward(ad::scale(*loss, w), grads);
        apply_update(model, optimizer, grads, config);
      }
    }
    values.push_back(std::move(tv));
  }
  return values;
}

std::vector<TermValue> step_summed(Model& model, Adam& optimizer, const Batch& batch,
                                   const TrainConfig& config) {
  std::vector<TermValue> values;
  const auto& tasks = model.tasks();
  Tape tape(&model.params());
  std::vector<Var> weighted;

  const auto hidden = hidden_states(model, tape, batch);
  TermValue contrastive{"contrastive", "", std::nullopt};
  if (contrastive_possible(model, batch)) {
    const Var loss = contrastive_term(model, tape, hidden);
    contrastive.value = checked_value(loss, "contrastive");
    if (config.contrastive_weight > 0.0) weighted.push_back(ad::scale(loss, config.contrastive_weight));
  }
  values.push_back(contrastive);

  if (!model.supervised().empty()) {
    const Var shared = model.fuse_and_share(tape, hidden);
    Model::SupervisedPass pass;
    pass.hidden = hidden;
    pass.task_inputs = model.task_heads_forward(tape, shared);
    pass.attention = model.cross_task_attention(tape, pass.task_inputs);
    for (std::size_t k = 0; k < model.supervised().size(); ++k)
      pass.outputs.push_back(
          model.task_output(tape, pass.attention.outputs[k], model.supervised()[k]));
    for (const std::size_t t : model.supervised()) {
      const TaskSpec& spec = tasks[t];
      TermValue term{term_name(spec), spec.name, std::nullopt};
      const auto& tg = batch.targets[t];
      if (!tg.rows.empty()) {
        const Var loss = supervised_loss(model, pass, t, tg);
        term.value = checked_value(loss, spec.name);
        const double w = config.weight_for(spec.name);
        if (w > 0.0) weighted.push_back(ad::scale(loss, w));
      }
      values.push_back(term);
    }
  }

  if (const auto c = model.cluster_task()) {
    const TaskSpec& spec = tasks[*c];
    TermValue term{"cluster", spec.name, std::nullopt};
    const Var loss = cluster_term(model, tape, batch);
    term.value = checked_value(loss, spec.name);
    const double w = config.weight_for(spec.name);
    if (w > 0.0) weighted.push_back(ad::scale(loss, w));
    values.push_back(term);
  }

  if (!weighted.empty()) {
    Var total = weighted[0];
    for (std::size_t i = 1; i < weighted.size(); ++i) total = ad::add(total, weighted[i]);
    checked_value(total, "total");
    GradientSet grads(model.params());
    tape.backward(total, grads);
    apply_update(model, optimizer, grads, config);
  }
  return values;
}

}  // namespace

std::vector<LossTerm> loss_terms(const Model& model) {
  std::vector<LossTerm> out;
  out.push_back({"contrastive", "", std::nullopt});
  for (const std::size_t t : model.supervised())
    out.push_back({term_name(model.tasks()[t]), model.tasks()[t].name, t});
  if (const auto c = model.cluster_task()) out.push_back({"cluster", model.tasks()[*c].name, *c});
  return out;
}

std::optional<Var> build_term_loss(const Model& model, Tape& tape, const Batch& batch,
                                   const LossTerm& term) {
  if (!term.model_task) {
    if (!contrastive_possible(model, batch)) return std::nullopt;
    return contrastive_term(model, tape, hidden_states(model, tape, batch));
  }
  const std::size_t t = *term.model_task;
  if (model.tasks().at(t).problem == ProblemClass::cluster) {
    if (batch.size() == 0) return std::nullopt;
    return cluster_term(model, tape, batch);
  }
  const auto& tg = batch.targets.at(t);
  if (tg.rows.empty()) return std::nullopt;
  const auto pass = model.forward_supervised(tape, batch.embeddings);
  return supervised_loss(model, pass, t, tg);
}

std::vector<TermValue> train_step(Model& model, Adam& optimizer, const Batch& batch,
                                  const TrainConfig& config) {
  if (batch.size() == 0) throw DomainError("empty batch");
  if (batch.targets.size() != model.tasks().size())
    throw ContractError("batch was built for a different model");
  return config.schedule == LossSchedule::sequential ? step_sequential(model, optimizer, batch, config)
                                                     : step_summed(model, optimizer, batch, config);
}

std::vector<TaskSpec> resolve_tasks(const Dataset& ds, const TrainConfig& config) {
  std::vector<TaskSpec> out;
  for (const auto& name : config.task_set) {
    if (!ds.find_task(name)) throw ConfigError("unknown task '" + name + "'");
  }
  for (const auto& spec : ds.tasks()) {
    if (config.task_set.empty() ||
        std::find(config.task_set.begin(), config.task_set.end(), spec.name) != config.task_set.end())
      out.push_back(spec);
  }
  if (out.empty()) throw ConfigError("task set is empty");
  return out;
}

TrainedModel train(const Dataset& train_ds, const ModelConfig& model_config,
                   const TrainConfig& config) {
  config.validate();
  if (train_ds.size() == 0) throw DomainError("training set is empty");
  const auto tasks = resolve_tasks(train_ds, config);

  ModelConfig mc = model_config;
  mc.seed = mix_seed(config.seed, stable_hash("model-init"));
  TrainedModel out{Model(train_ds.schemas(), tasks, mc), config, {}, {}, {}};
  Model& model = out.model;
  if (config.imbalance_bias) out.bias_initialized = apply_imbalance_bias(model, train_ds);

  Adam optimizer(model.params(), AdamOptions{config.hyper.learning_rate, config.beta1, config.beta2,
                                             config.adam_epsilon});
  Rng rng(mix_seed(config.seed, stable_hash("batch-order")));
  std::vector<std::size_t> order(train_ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = config.hyper.batch_size;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += bs, ++batch_index) {
      const std::size_t count = std::min(bs, order.size() - begin);
      const Batch batch =
          make_batch(model, train_ds, std::span<const std::size_t>(order).subspan(begin, count));
      std::vector<TermValue> terms;
      try {
        terms = train_step(model, optimizer, batch, config);
      } catch (const Error&) {
        rethrow_with_context("epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(batch_index) + ": ");
      }
      for (auto& term : terms) out.log.push_back({epoch, batch_index, std::move(term)});
    }
  }
  return out;
}

std::string format_training_log(const std::vector<LogEntry>& log) {
  std::string out = "epoch,batch,term,task,value\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + std::to_string(e.batch) + "," + e.term.term + "," +
           e.term.task + "," + (e.term.value ? format_double(*e.term.value) : std::string()) + "\n";
  }
  return out;
}

double mean_normalized(const std::vector<ScoreReport>& scores) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : scores) {
    if (!s.valid) continue;
    total += s.normalized;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(n);
}

CvResult cross_validate(const Dataset& train_ds, const ModelConfig& model_config,
                        const TrainConfig& config, FoldScorer scorer) {
  config.validate();
  const auto grid = config.grid();
  const auto folds = kfold_by_patient(train_ds, config.folds, mix_seed(config.seed, stable_hash("folds")));
  if (!scorer) {
    scorer = [&](const Hyperparams& point, std::size_t fold, const Dataset& tr, const Dataset& va) {
      TrainConfig fc = config;
      fc.hyper = point;
      fc.seed = mix_seed(config.seed, fold);
      const TrainedModel tm = train(tr, model_config, fc);
      return mean_normalized(evaluate_model(tm.model, va, fc.seed));
    };
  }

  const std::size_t k = folds.size();
  std::vector<double> scores(grid.size() * k);
  parallel_for(scores.size(), config.workers, [&](std::size_t job) {
    const std::size_t g = job / k;
    const std::size_t f = job % k;
    try {
      scores[job] = scorer(grid[g], f, folds[f].first, folds[f].second);
    } catch (const Error&) {
      rethrow_with_context("grid point (batch " + std::to_string(grid[g].batch_size) + ", lr " +
                           format_double(grid[g].learning_rate) + ") fold " + std::to_string(f) +
                           ": ");
    }
  });

  CvResult result;
  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    CvRow row{grid[g], {}, 0.0};
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const double s = scores[g * k + f];
      row.fold_scores.push_back(s);
      if (std::isnan(s)) continue;
      total += s;
      ++n;
    }
    row.mean_score = n == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(n);
    // Grid is sorted, so strict > keeps the lexicographically smaller point on ties.
    if (!std::isnan(row.mean_score) && (!best || row.mean_score > result.table[*best].mean_score))
      best = g;
    result.table.push_back(std::move(row));
  }
  if (!best) throw DomainError("no grid point produced a usable validation score");
  result.best = grid[*best];
  return result;
}

std::string format_cv_table(const CvResult& result) {
  std::string out = "batch_size,learning_rate,fold,score\n";
  for (const auto& row : result.table) {
    for (std::size_t f = 0; f < row.fold_scores.size(); ++f) {
      out += std::to_string(row.point.batch_size) + "," + format_double(row.point.learning_rate) + "," +
             std::to_string(f) + "," + format_double(row.fold_scores[f]) + "\n";
    }
    out += std::to_string(row.point.batch_size) + "," + format_double(row.point.learning_rate) +
           ",mean," + format_double(row.mean_score) + "\n";
  }
  for (const auto& row : result.table) {
    if (row.point != result.best) continue;
    out += std::to_string(row.point.batch_size) + "," + format_double(row.point.learning_rate) +
           ",best," + format_double(row.mean_score) + "\n";
  }
  return out;
}

}  // namespace m3h
