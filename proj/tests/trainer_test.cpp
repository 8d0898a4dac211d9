#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "m3h/error.hpp"
#include "m3h/evaluate.hpp"
#include "m3h/split.hpp"
#include "m3h/synth.hpp"
#include "m3h/text_io.hpp"
#include "m3h/trainer.hpp"

using namespace m3h;

namespace {

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.modality_hidden = {8};
  cfg.shared_hidden = {8};
  cfg.task_embed_dim = 4;
  cfg.contrastive_proj_dim = 4;
  cfg.autoencoder_hidden = 8;
  cfg.autoencoder_latent = 2;
  return cfg;
}

SynthConfig small_synth(std::uint64_t seed, std::size_t patients = 80) {
  SynthConfig s;
  s.n_patients = patients;
  s.schemas = {{"tab", 4}, {"img", 3}};
  TaskSpec mc{"mc", ProblemClass::multiclass};
  mc.num_classes = 3;
  TaskSpec clu{"clu", ProblemClass::cluster};
  clu.cluster_k = 3;
  s.tasks = {{"bin", ProblemClass::binary}, mc, {"reg", ProblemClass::regression}, clu};
  s.latent_dim = 4;
  s.seed = seed;
  return s;
}

// Dataset with one binary task carrying `positives` ones among `n` labels.
Dataset binary_cohort(std::size_t n, std::size_t positives) {
  Dataset ds({{"x", 2}}, {{"b", ProblemClass::binary}});
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n);
    ds.add_sample("s" + std::to_string(i), "p" + std::to_string(i), {{x, 1.0 - x}},
                  {i < positives ? 1.0 : 0.0});
  }
  return ds;
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

Adam adam_for(const Model& m, double lr) { return Adam(m.params(), AdamOptions{lr, 0.9, 0.999, 1e-8}); }

bool has_prefix(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST(ImbalanceBias, LogOdds) {
  EXPECT_NEAR(init_output_bias(10, 90), -2.19722, 1e-5);
  EXPECT_DOUBLE_EQ(init_output_bias(5, 5), 0.0);
  EXPECT_THROW(init_output_bias(0, 5), DomainError);
  EXPECT_THROW(init_output_bias(5, 0), DomainError);
}

TEST(ImbalanceBias, FiresOnlyBelowTenPercent) {
  for (const auto& [pos, fires] : std::vector<std::pair<std::size_t, bool>>{{5, true}, {9, true}, {10, false}, {20, false}}) {
    const Dataset ds = binary_cohort(100, pos);
    Model m(ds.schemas(), ds.tasks(), small_model());
    const auto fired = apply_imbalance_bias(m, ds);
    const double bias = m.params()["output.b.layer0.bias"](0, 0);
    EXPECT_EQ(!fired.empty(), fires) << pos;
    if (fires) {
      EXPECT_NEAR(bias, std::log(static_cast<double>(pos) / static_cast<double>(100 - pos)), 1e-15);
      // the untrained network then predicts roughly the prevalence
      EXPECT_NEAR(1.0 / (1.0 + std::exp(-bias)), static_cast<double>(pos) / 100.0, 1e-12);
    } else {
      EXPECT_EQ(bias, 0.0);
    }
  }
}

TEST(ImbalanceBias, SingleClassTaskNamesTask) {
  const Dataset ds = binary_cohort(20, 0);
  Model m(ds.schemas(), ds.tasks(), small_model());
  try {
    apply_imbalance_bias(m, ds);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.hyper.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.task_weights["bin"] = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.folds = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.learning_rates.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  const Dataset ds = synth_generate(small_synth(1, 10));
  TrainConfig zero;
  zero.epochs = 0;
  EXPECT_THROW(train(ds, small_model(), zero), ConfigError);
}

TEST(TrainConfig, GridSortedAndDeduplicated) {
  TrainConfig c;
  c.batch_sizes = {512, 256, 256};
  c.learning_rates = {0.001, 0.0005};
  const auto g = c.grid();
  ASSERT_EQ(g.size(), 4u);
  EXPECT_EQ(g[0], (Hyperparams{256, 0.0005}));
  EXPECT_EQ(g[1], (Hyperparams{256, 0.001}));
  EXPECT_EQ(g[2], (Hyperparams{512, 0.0005}));
  EXPECT_EQ(g[3], (Hyperparams{512, 0.001}));
  EXPECT_EQ(c.weight_for("anything"), 1.0);
}

TEST(Batch, TargetsRestrictedToLabelledRows) {
  Dataset ds({{"x", 1}}, {{"b", ProblemClass::binary}, {"r", ProblemClass::regression}});
  ds.add_sample("a", "p", {{0.1}}, {1.0, std::nullopt});
  ds.add_sample("b", "p", {{0.2}}, {std::nullopt, 2.5});
  ds.add_sample("c", "q", {{0.3}}, {0.0, -1.0});
  Model m(ds.schemas(), ds.tasks(), small_model());
  const auto rows = all_rows(ds);
  const Batch b = make_batch(m, ds, rows);
  EXPECT_EQ(b.size(), 3u);
  EXPECT_EQ(b.targets[0].rows, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(b.targets[0].values, Matrix::column_vector(std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(b.targets[1].rows, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(b.targets[1].values, Matrix::column_vector(std::vector<double>{2.5, -1.0}));
}

TEST(LossTerms, ScheduleOrder) {
  const Dataset ds = synth_generate(small_synth(2, 10));
  Model m(ds.schemas(), ds.tasks(), small_model());
  const auto terms = loss_terms(m);
  ASSERT_EQ(terms.size(), 5u);
  EXPECT_EQ(terms[0].term, "contrastive");
  EXPECT_EQ(terms[1].task, "bin");
  EXPECT_EQ(terms[2].task, "mc");
  EXPECT_EQ(terms[3].task, "reg");
  EXPECT_EQ(terms[4].term, "cluster");
}

TEST(LossTerms, NoGradientLeaksAcrossTerms) {
  const Dataset ds = synth_generate(small_synth(3, 30));
  Model m(ds.schemas(), ds.tasks(), small_model());
  const auto rows = all_rows(ds);
  const Batch batch = make_batch(m, ds, rows);
  for (const LossTerm& term : loss_terms(m)) {
    Tape tape(&m.params());
    const auto loss = build_term_loss(m, tape, batch, term);
    ASSERT_TRUE(loss);
    GradientSet grads(m.params());
    tape.backward(*loss, grads);
    for (std::size_t id = 0; id < m.params().size(); ++id) {
      const std::string& name = m.params().name(id);
      bool allowed = false;
      if (term.term == "contrastive") {
        allowed = has_prefix(name, "modality.") || has_prefix(name, "contrastive.");
      } else if (term.term == "cluster") {
        allowed = has_prefix(name, "autoencoder.");
      } else {
        allowed = has_prefix(name, "modality.") || has_prefix(name, "shared.") ||
                  has_prefix(name, "head.") || has_prefix(name, "attention.") ||
                  has_prefix(name, "output." + term.task + ".");
      }
      if (!allowed) {
        EXPECT_FALSE(grads.touched(id)) << term.term << " " << term.task << " reached " << name;
        EXPECT_EQ(max_abs(grads[id]), 0.0) << name;
      }
    }
  }
}

TEST(TrainStep, ZeroWeightFreezesItsOwnParameters) {
  const Dataset ds = synth_generate(small_synth(4, 30));
  Model m(ds.schemas(), ds.tasks(), small_model());
  const Model before = m;
  TrainConfig cfg;
  cfg.task_weights["bin"] = 0.0;
  cfg.task_weights["clu"] = 0.0;
  Adam opt = adam_for(m, 1e-2);
  const auto rows = all_rows(ds);
  const auto values = train_step(m, opt, make_batch(m, ds, rows), cfg);
  // still measured
  ASSERT_EQ(values.size(), 5u);
  EXPECT_TRUE(values[1].value.has_value());
  EXPECT_TRUE(values[4].value.has_value());
  for (std::size_t id = 0; id < m.params().size(); ++id) {
    const std::string& name = m.params().name(id);
    if (has_prefix(name, "output.bin.") || has_prefix(name, "autoencoder.")) {
      EXPECT_EQ(m.params().value(id), before.params().value(id)) << name;
      EXPECT_EQ(opt.steps(id), 0u) << name;
    }
  }
  EXPECT_NE(m.params()["output.reg.layer0.weight"], before.params()["output.reg.layer0.weight"]);
}

TEST(TrainStep, AbsentTermIsLoggedWithoutValue) {
  Dataset ds({{"x", 2}}, {{"b", ProblemClass::binary}, {"r", ProblemClass::regression}});
  ds.add_sample("a", "p", {{0.1, 0.2}}, {1.0, std::nullopt});
  ds.add_sample("c", "q", {{0.3, -0.5}}, {0.0, std::nullopt});
  ds.add_sample("d", "q", {{0.4, 0.5}}, {0.0, 1.0});
  Model m(ds.schemas(), ds.tasks(), small_model());
  Adam opt = adam_for(m, 1e-3);
  const std::vector<std::size_t> rows{0, 1};
  const auto values = train_step(m, opt, make_batch(m, ds, rows), TrainConfig{});
  ASSERT_EQ(values.size(), 3u);
  EXPECT_FALSE(values[0].value.has_value());  // one modality: no contrastive pair
  EXPECT_TRUE(values[1].value.has_value());
  EXPECT_FALSE(values[2].value.has_value());
  std::vector<LogEntry> log;
  for (const auto& v : values) log.push_back({0, 0, v});
  const std::string text = format_training_log(log);
  EXPECT_NE(text.find("0,0,regression,r,\n"), std::string::npos) << text;
  EXPECT_EQ(text.rfind("epoch,batch,term,task,value\n", 0), 0u);
}

TEST(TrainStep, LossDecreasesOnFixedBatch) {
  const Dataset ds = synth_generate(small_synth(5, 40));
  Model m(ds.schemas(), ds.tasks(), small_model());
  TrainConfig cfg;
  Adam opt = adam_for(m, 1e-4);
  const auto rows = all_rows(ds);
  const Batch batch = make_batch(m, ds, rows);
  const auto first = train_step(m, opt, batch, cfg);
  std::vector<TermValue> last;
  for (int i = 0; i < 50; ++i) last = train_step(m, opt, batch, cfg);
  for (std::size_t k = 0; k < first.size(); ++k)
    EXPECT_LT(*last[k].value, *first[k].value) << first[k].term << " " << first[k].task;
}

TEST(TrainStep, SequentialMatchesSummedWithOneActiveTerm) {
  const Dataset ds = synth_generate(small_synth(6, 30));
  Model a(ds.schemas(), ds.tasks(), small_model());
  Model b = a;
  TrainConfig cfg;
  cfg.contrastive_weight = 0.0;
  cfg.task_weights = {{"bin", 0.0}, {"mc", 0.0}, {"clu", 0.0}};
  Adam oa = adam_for(a, 1e-3), ob = adam_for(b, 1e-3);
  const auto rows = all_rows(ds);
  const Batch batch = make_batch(a, ds, rows);
  TrainConfig summed = cfg;
  summed.schedule = LossSchedule::summed;
  for (int i = 0; i < 5; ++i) {
    train_step(a, oa, batch, cfg);
    train_step(b, ob, batch, summed);
  }
  for (std::size_t id = 0; id < a.params().size(); ++id) {
    Matrix diff = a.params().value(id);
    axpy(diff, -1.0, b.params().value(id));
    EXPECT_LE(max_abs(diff), 1e-14) << a.params().name(id);
  }
}

TEST(TrainStep, SequentialSeesPreviousUpdate) {
  // With every term active the two schedules differ: later terms see earlier updates.
  const Dataset ds = synth_generate(small_synth(7, 30));
  Model a(ds.schemas(), ds.tasks(), small_model());
  Model b = a;
  Adam oa = adam_for(a, 1e-2), ob = adam_for(b, 1e-2);
  const auto rows = all_rows(ds);
  const Batch batch = make_batch(a, ds, rows);
  TrainConfig seq, sum;
  sum.schedule = LossSchedule::summed;
  train_step(a, oa, batch, seq);
  train_step(b, ob, batch, sum);
  EXPECT_FALSE(a.params() == b.params());
}

TEST(Train, DeterministicForSeed) {
  const Dataset ds = synth_generate(small_synth(8, 40));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hyper = {16, 1e-3};
  cfg.seed = 11;
  const TrainedModel x = train(ds, small_model(), cfg), y = train(ds, small_model(), cfg);
  EXPECT_TRUE(x.model == y.model);
  EXPECT_EQ(format_training_log(x.log), format_training_log(y.log));
  // 40 samples in batches of 16: 3 batches (last partial) x 5 terms x 2 epochs
  EXPECT_EQ(x.log.size(), 2u * 3u * 5u);
  cfg.seed = 12;
  EXPECT_FALSE(train(ds, small_model(), cfg).model == x.model);
}

TEST(Train, TaskSetSubset) {
  const Dataset ds = synth_generate(small_synth(9, 20));
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.task_set = {"reg", "bin"};
  const TrainedModel tm = train(ds, small_model(), cfg);
  ASSERT_EQ(tm.model.tasks().size(), 2u);
  EXPECT_EQ(tm.model.tasks()[0].name, "bin");  // dataset order
  EXPECT_EQ(tm.model.tasks()[1].name, "reg");
  cfg.task_set = {"nope"};
  EXPECT_THROW(train(ds, small_model(), cfg), ConfigError);
}

TEST(Train, SeparableBinaryTaskLearned) {
  SynthConfig s;
  s.n_patients = 400;
  s.schemas = {{"tab", 6}, {"img", 4}};
  s.tasks = {{"bin", ProblemClass::binary}};
  s.latent_dim = 4;
  s.noise_scale = 0.1;
  s.label_noise = 0.05;
  s.seed = 3;
  const Dataset ds = synth_generate(s);
  const auto [tr, te] = split_by_patient(ds, 0.25, 1);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.hyper = {32, 5e-3};
  cfg.seed = 2;
  const TrainedModel tm = train(tr, small_model(), cfg);
  const auto scores = evaluate_model(tm.model, te, 0);
  ASSERT_EQ(scores.size(), 1u);
  ASSERT_TRUE(scores[0].valid);
  EXPECT_GT(scores[0].raw, 0.95);
}

TEST(Evaluate, SingleClassValidationIsInvalid) {
  const Dataset ds = binary_cohort(10, 0);
  Model m(ds.schemas(), ds.tasks(), small_model());
  const auto scores = evaluate_model(m, ds, 0);
  ASSERT_EQ(scores.size(), 1u);
  EXPECT_FALSE(scores[0].valid);
  EXPECT_TRUE(std::isnan(mean_normalized(scores)));
}

TEST(Evaluate, EveryClassScored) {
  const Dataset ds = synth_generate(small_synth(10, 40));
  Model m(ds.schemas(), ds.tasks(), small_model());
  const auto scores = evaluate_model(m, ds, 0);
  ASSERT_EQ(scores.size(), 4u);
  EXPECT_EQ(scores[0].metric, MetricKind::auroc);
  EXPECT_EQ(scores[1].metric, MetricKind::averaged_auroc);
  EXPECT_EQ(scores[2].metric, MetricKind::r_squared);
  EXPECT_EQ(scores[3].metric, MetricKind::silhouette);
  for (const auto& s : scores) {
    EXPECT_TRUE(s.valid) << s.task;
    EXPECT_GE(s.normalized, 0.0);
    EXPECT_LE(s.normalized, 1.0);
    EXPECT_EQ(s.n_evaluated, 40u);
  }
}

TEST(CrossValidate, SinglePointGridWins) {
  const Dataset ds = synth_generate(small_synth(11, 20));
  TrainConfig cfg;
  cfg.batch_sizes = {8};
  cfg.learning_rates = {0.01};
  cfg.folds = 3;
  const CvResult r = cross_validate(ds, small_model(), cfg,
                                    [](const Hyperparams&, std::size_t f, const Dataset&, const Dataset&) {
                                      return 0.1 * static_cast<double>(f);
                                    });
  EXPECT_EQ(r.best, (Hyperparams{8, 0.01}));
  ASSERT_EQ(r.table.size(), 1u);
  EXPECT_NEAR(r.table[0].mean_score, 0.1, 1e-15);
}

TEST(CrossValidate, PicksArgmaxOfMeanFoldScore) {
  const Dataset ds = synth_generate(small_synth(12, 20));
  TrainConfig cfg;
  cfg.folds = 2;
  std::size_t calls = 0;
  const CvResult r = cross_validate(ds, small_model(), cfg,
                                    [&](const Hyperparams& h, std::size_t, const Dataset& tr, const Dataset& va) {
                                      ++calls;
                                      EXPECT_EQ(tr.size() + va.size(), ds.size());
                                      return h.batch_size == 512 && h.learning_rate == 0.0005 ? 0.9 : 0.6;
                                    });
  EXPECT_EQ(calls, 8u);
  EXPECT_EQ(r.best, (Hyperparams{512, 0.0005}));
  const std::string table = format_cv_table(r);
  EXPECT_NE(table.find("512," + format_double(0.0005) + ",best,0.9\n"), std::string::npos) << table;
}

TEST(CrossValidate, TiesGoToSmallerPointAndNanFoldsSkipped) {
  const Dataset ds = synth_generate(small_synth(13, 20));
  TrainConfig cfg;
  cfg.folds = 2;
  const CvResult r = cross_validate(ds, small_model(), cfg,
                                    [](const Hyperparams& h, std::size_t f, const Dataset&, const Dataset&) {
                                      if (h.batch_size == 256 && f == 1) return std::nan("");
                                      return 0.7;
                                    });
  EXPECT_EQ(r.best, (Hyperparams{256, 0.0005}));
  EXPECT_DOUBLE_EQ(r.table[0].mean_score, 0.7);

  EXPECT_THROW(cross_validate(ds, small_model(), cfg,
                              [](const Hyperparams&, std::size_t, const Dataset&, const Dataset&) {
                                return std::nan("");
                              }),
               DomainError);
}

TEST(CrossValidate, ErrorsCarryGridPoint) {
  const Dataset ds = synth_generate(small_synth(14, 20));
  TrainConfig cfg;
  cfg.folds = 2;
  try {
    cross_validate(ds, small_model(), cfg, [](const Hyperparams& h, std::size_t, const Dataset&, const Dataset&) -> double {
      if (h.batch_size == 512) throw NumericError("boom");
      return 0.5;
    });
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("batch 512"), std::string::npos) << what;
    EXPECT_NE(what.find("boom"), std::string::npos) << what;
  }
}

TEST(CrossValidate, DefaultScorerRuns) {
  const Dataset ds = synth_generate(small_synth(15, 30));
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.folds = 2;
  cfg.batch_sizes = {8, 16};
  cfg.learning_rates = {1e-3};
  const CvResult r = cross_validate(ds, small_model(), cfg);
  ASSERT_EQ(r.table.size(), 2u);
  for (const auto& row : r.table) {
    EXPECT_GE(row.mean_score, 0.0);
    EXPECT_LE(row.mean_score, 1.0);
  }
  cfg.workers = 2;
  const CvResult threaded = cross_validate(ds, small_model(), cfg);
  EXPECT_EQ(format_cv_table(threaded), format_cv_table(r));
}
