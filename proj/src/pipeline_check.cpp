#include "m3h/pipeline_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "m3h/error.hpp"
#include "m3h/gradcheck.hpp"
#include "m3h/random.hpp"
#include "m3h/text_io.hpp"
#include "m3h/trainer.hpp"

namespace m3h {

namespace {

struct CheckPoint {
  Model model;
  Batch batch;
};

CheckPoint draw_point(std::uint64_t seed, std::size_t batch_size) {
  const std::vector<ModalitySchema> schemas{{"a", 3}, {"b", 4}};
  std::vector<TaskSpec> tasks(4);
  tasks[0] = {"bin", ProblemClass::binary};
  tasks[1] = {"mc", ProblemClass::multiclass};
  tasks[1].num_classes = 3;
  tasks[2] = {"reg", ProblemClass::regression};
  tasks[3] = {"clu", ProblemClass::cluster};
  tasks[3].cluster_k = 2;

  ModelConfig cfg;
  cfg.modality_hidden = {5, 4};
  cfg.shared_hidden = {6, 5};
  cfg.task_embed_dim = 4;
  cfg.contrastive_proj_dim = 3;
  cfg.contrastive_temperature = 0.5;
  cfg.alpha = 0.5;
  cfg.autoencoder_hidden = 6;
  cfg.autoencoder_latent = 3;
  cfg.seed = mix_seed(seed, 1);
  CheckPoint point{Model(schemas, tasks, cfg), {}};

  Rng rng(mix_seed(seed, 2));
  // Random biases too, so no layer sits at its all-zero starting point.
  for (std::size_t id = 0; id < point.model.params().size(); ++id) {
    Matrix& v = point.model.params().value(id);
    if (v.rows() == 1)
      for (auto& x : v.values()) x = 0.1 * rng.normal();
  }

  Dataset ds(schemas, tasks);
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::vector<std::vector<double>> emb;
    for (const auto& s : schemas) {
      std::vector<double> row(s.dim);
      for (auto& x : row) x = rng.normal();
      emb.push_back(row);
    }
    ds.add_sample("s" + std::to_string(i), "p" + std::to_string(i), emb,
                  {static_cast<double>(i % 2), static_cast<double>(i % 3), rng.normal(), std::nullopt});
  }
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  point.batch = make_batch(point.model, ds, rows);
  return point;
}

// Rows whose upstream units are all dead collapse onto one value; their
// absolute-error signs can then cancel to an exact zero that finite
// differences only see as roundoff.
bool rows_distinct(const CheckPoint& point, double margin) {
  Tape tape(&point.model.params());
  const auto pass = point.model.forward_supervised(tape, point.batch.embeddings);
  for (const Var& x : pass.task_inputs) {
    const Matrix& m = tape.value(x);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = i + 1; j < m.rows(); ++j) {
        double gap = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) gap = std::max(gap, std::abs(m(i, c) - m(j, c)));
        if (gap < margin) return false;
      }
  }
  return true;
}

struct NamedLoss {
  std::string term;
  std::string task;
  LossBuilder loss;
};

// One builder per loss term, then "total" for their sum.
std::vector<NamedLoss> check_losses(CheckPoint& point) {
  const Model& model = point.model;
  const Batch& batch = point.batch;
  const auto terms = loss_terms(model);
  std::vector<NamedLoss> out;
  for (const auto& term : terms) {
    out.push_back({term.term, term.task,
                   [&model, &batch, term](Tape& tape) { return *build_term_loss(model, tape, batch, term); }});
  }
  out.push_back({"total", "", [&model, &batch, terms](Tape& tape) {
                   Var total = *build_term_loss(model, tape, batch, terms[0]);
                   for (std::size_t k = 1; k < terms.size(); ++k)
                     total = ad::add(total, *build_term_loss(model, tape, batch, terms[k]));
                   return total;
                 }});
  return out;
}

bool well_conditioned(CheckPoint& point, const PipelineCheckOptions& options) {
  if (!rows_distinct(point, options.kink_margin)) return false;
  for (const auto& named : check_losses(point)) {
    Tape tape(&point.model.params());
    const Var value = named.loss(tape);
    if (tape.kink_distance() < options.kink_margin) return false;
    const GradientSet g = tape.backward(value);
    for (std::size_t id = 0; id < g.size(); ++id)
      for (double x : g[id].values())
        if (x != 0.0 && std::abs(x) < options.min_gradient) return false;
  }
  return true;
}

}  // namespace

std::vector<TermCheck> pipeline_gradcheck(std::uint64_t seed, const PipelineCheckOptions& options) {
  std::size_t draw = 0;
  CheckPoint point = draw_point(seed, options.batch);
  while (!well_conditioned(point, options)) {
    if (++draw >= options.max_draws) throw NumericError("no smooth check point found for seed " + std::to_string(seed));
    point = draw_point(mix_seed(seed, draw + 2), options.batch);
  }
  std::vector<TermCheck> out;
  for (const auto& named : check_losses(point)) {
    const GradCheckReport r = gradient_check(point.model.params(), named.loss, options.eps);
    out.push_back({seed, named.term, named.task, r.max_relative_error, r.worst_parameter, draw});
  }
  return out;
}

std::string format_gradcheck_report(const std::vector<TermCheck>& rows) {
  std::string out = "seed,term,task,max_relative_error,worst_parameter,redraws\n";
  for (const auto& r : rows) {
    out += std::to_string(r.seed) + "," + r.term + "," + r.task + "," +
           format_double(r.max_relative_error) + "," + r.worst_parameter + "," +
           std::to_string(r.redraws) + "\n";
  }
  return out;
}

}  // namespace m3h
