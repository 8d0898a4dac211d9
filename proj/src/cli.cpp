#include "m3h/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <numeric>

#include "m3h/bootstrap.hpp"
#include "m3h/checkpoint.hpp"
#include "m3h/error.hpp"
#include "m3h/evaluate.hpp"
#include "m3h/pipeline_check.hpp"
#include "m3h/split.hpp"
#include "m3h/text_io.hpp"

namespace m3h {

using nlohmann::json;

namespace {

template <typename T>
T get_as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + " has the wrong type");
  }
}

std::vector<ModalitySchema> schemas_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("synth.modalities must be a list");
  std::vector<ModalitySchema> out;
  for (const auto& m : j) {
    if (!m.is_object() || !m.contains("name") || !m.contains("dim"))
      throw ConfigError("each modality needs 'name' and 'dim'");
    out.push_back({get_as<std::string>(m["name"], "modality name"), get_as<std::size_t>(m["dim"], "modality dim")});
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

TaskSpec task_spec_from_json(const json& j) {
  if (!j.is_object() || !j.contains("name") || !j.contains("class"))
    throw ConfigError("each task needs 'name' and 'class'");
  TaskSpec spec;
  spec.name = get_as<std::string>(j["name"], "task name");
  try {
    spec.problem = parse_problem_class(get_as<std::string>(j["class"], "task class"));
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "num_classes") spec.num_classes = get_as<std::size_t>(value, "num_classes");
    else if (key == "cluster_k") spec.cluster_k = get_as<std::size_t>(value, "cluster_k");
    else if (key != "name" && key != "class") throw ConfigError("unknown task key '" + key + "'");
  }
  spec.validate();
  return spec;
}

SynthConfig synth_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synth must be a JSON object");
  SynthConfig cfg;
  for (const auto& [key, value] : j.items()) {
    const std::string where = "synth." + key;
    if (key == "n_patients") cfg.n_patients = get_as<std::size_t>(value, where);
    else if (key == "samples_per_patient") cfg.samples_per_patient = get_as<std::size_t>(value, where);
    else if (key == "modalities") cfg.schemas = schemas_from_json(value);
    else if (key == "tasks") {
      if (!value.is_array()) throw ConfigError("synth.tasks must be a list");
      for (const auto& t : value) cfg.tasks.push_back(task_spec_from_json(t));
    } else if (key == "latent_dim") cfg.latent_dim = get_as<std::size_t>(value, where);
    else if (key == "task_correlation") cfg.task_correlation = get_as<double>(value, where);
    else if (key == "prevalence") cfg.prevalence = get_as<std::map<std::string, double>>(value, where);
    else if (key == "noise_scale") cfg.noise_scale = get_as<double>(value, where);
    else if (key == "label_noise") cfg.label_noise = get_as<double>(value, where);
    else if (key == "sample_jitter") cfg.sample_jitter = get_as<double>(value, where);
    else if (key == "latent_clusters") cfg.latent_clusters = get_as<std::size_t>(value, where);
    else if (key == "cluster_separation") cfg.cluster_separation = get_as<double>(value, where);
    else if (key == "seed") cfg.seed = get_as<std::uint64_t>(value, where);
    else throw ConfigError("unknown synth key '" + key + "'");
  }
  return cfg;
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train must be a JSON object");
  TrainConfig cfg;
  for (const auto& [key, value] : j.items()) {
    const std::string where = "train." + key;
    if (key == "epochs") cfg.epochs = get_as<std::size_t>(value, where);
    else if (key == "batch_size") cfg.hyper.batch_size = get_as<std::size_t>(value, where);
    else if (key == "learning_rate") cfg.hyper.learning_rate = get_as<double>(value, where);
    else if (key == "batch_sizes") cfg.batch_sizes = get_as<std::vector<std::size_t>>(value, where);
    else if (key == "learning_rates") cfg.learning_rates = get_as<std::vector<double>>(value, where);
    else if (key == "beta1") cfg.beta1 = get_as<double>(value, where);
    else if (key == "beta2") cfg.beta2 = get_as<double>(value, where);
    else if (key == "adam_epsilon") cfg.adam_epsilon = get_as<double>(value, where);
    else if (key == "contrastive_weight") cfg.contrastive_weight = get_as<double>(value, where);
    else if (key == "task_weights") cfg.task_weights = get_as<std::map<std::string, double>>(value, where);
    else if (key == "schedule") {
      const auto s = get_as<std::string>(value, where);
      if (s == "sequential") cfg.schedule = LossSchedule::sequential;
      else if (s == "summed") cfg.schedule = LossSchedule::summed;
      else throw ConfigError("train.schedule must be 'sequential' or 'summed'");
    } else if (key == "clip_norm") cfg.clip_norm = get_as<double>(value, where);
    else if (key == "imbalance_bias") cfg.imbalance_bias = get_as<bool>(value, where);
    else if (key == "folds") cfg.folds = get_as<std::size_t>(value, where);
    else if (key == "workers") cfg.workers = get_as<std::size_t>(value, where);
    else throw ConfigError("unknown train key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") cfg.seed = get_as<std::uint64_t>(value, key);
    else if (key == "out") cfg.out = resolve(base, get_as<std::string>(value, key));
    else if (key == "data") cfg.data = resolve(base, get_as<std::string>(value, key));
    else if (key == "tasks") cfg.tasks = get_as<std::vector<std::string>>(value, key);
    else if (key == "synth") cfg.synth = synth_config_from_json(value);
    else if (key == "model") cfg.model = model_config_from_json(value);
    else if (key == "train") cfg.train = train_config_from_json(value);
    else if (key == "split") {
      for (const auto& [k, v] : value.items()) {
        if (k == "test_fraction") cfg.test_fraction = get_as<double>(v, "split.test_fraction");
        else throw ConfigError("unknown split key '" + k + "'");
      }
    } else if (key == "cv") cfg.cv = get_as<bool>(value, key);
    else if (key == "tim") {
      for (const auto& [k, v] : value.items()) {
        if (k == "mode") cfg.tim_mode = parse_tim_mode(get_as<std::string>(v, "tim.mode"));
        else if (k == "n_samples") cfg.tim_samples = get_as<std::size_t>(v, "tim.n_samples");
        else throw ConfigError("unknown tim key '" + k + "'");
      }
    } else if (key == "select") {
      for (const auto& [k, v] : value.items()) {
        if (k == "source") cfg.source = get_as<std::string>(v, "select.source");
        else if (k == "beam") cfg.beam = get_as<std::size_t>(v, "select.beam");
        else throw ConfigError("unknown select key '" + k + "'");
      }
    } else if (key == "boot") cfg.boot = get_as<std::size_t>(value, key);
    else if (key == "gradcheck") {
      for (const auto& [k, v] : value.items()) {
        if (k == "points") cfg.gradcheck_points = get_as<std::size_t>(v, "gradcheck.points");
        else if (k == "eps") cfg.gradcheck_eps = get_as<double>(v, "gradcheck.eps");
        else if (k == "tolerance") cfg.gradcheck_tolerance = get_as<double>(v, "gradcheck.tolerance");
        else throw ConfigError("unknown gradcheck key '" + k + "'");
      }
    } else {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

namespace {

struct Flags {
  std::string config, out, data, tasks, mode, checkpoint, hparams, source, compare;
  std::string split = "test";
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::size_t> beam, boot, workers, samples, epochs;
};

// Everything a subcommand needs after config and flags are merged.
struct Context {
  ExperimentConfig cfg;
  const Flags& flags;
  std::ostream& out;

  std::filesystem::path out_dir() const {
    if (!cfg.out) throw ConfigError("an output directory is required (--out)");
    return *cfg.out;
  }
  std::filesystem::path data_path() const {
    if (!cfg.data) throw ConfigError("a dataset manifest is required (--data)");
    return *cfg.data;
  }
  void wrote(const std::filesystem::path& p) const { out << "wrote " << p.string() << "\n"; }
};

std::uint64_t split_seed(std::uint64_t seed) { return mix_seed(seed, stable_hash("split")); }

struct Splits {
  Dataset full, train, test;
};

Splits load_and_split(const Context& ctx, double test_fraction, std::uint64_t seed) {
  Splits s;
  s.full = load_dataset(ctx.data_path());
  auto [tr, te] = split_by_patient(s.full, test_fraction, split_seed(seed));
  s.train = std::move(tr);
  s.test = std::move(te);
  return s;
}

std::vector<std::string> task_list(const Context& ctx, const Dataset& ds) {
  std::vector<std::string> names = ctx.cfg.tasks;
  if (names.empty())
    for (const auto& t : ds.tasks()) names.push_back(t.name);
  for (const auto& n : names)
    if (!ds.find_task(n)) throw ConfigError("unknown task '" + n + "'");
  return names;
}

TrainConfig train_config(const Context& ctx, const Dataset& ds) {
  TrainConfig tc = ctx.cfg.train;
  tc.seed = ctx.cfg.seed;
  tc.task_set = task_list(ctx, ds);
  tc.validate();
  return tc;
}

int cmd_synth(const Context& ctx) {
  SynthConfig sc = ctx.cfg.synth;
  sc.seed = ctx.cfg.seed;
  const Dataset ds = synth_generate(sc);
  const auto manifest = write_dataset(ds, ctx.out_dir());
  // Read back so a bad write surfaces here rather than in a later step.
  if (!(load_dataset(manifest) == ds)) throw FormatError("written dataset does not load back identically");
  ctx.wrote(manifest);
  return 0;
}

Hyperparams read_hparams(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
    return {j.at("batch_size").get<std::size_t>(), j.at("learning_rate").get<double>()};
  } catch (const json::exception& e) {
    throw ConfigError("hyperparameter file '" + path.string() + "': " + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
}

int cmd_cv(const Context& ctx) {
  const Splits s = load_and_split(ctx, ctx.cfg.test_fraction, ctx.cfg.seed);
  const TrainConfig tc = train_config(ctx, s.full);
  const CvResult result = cross_validate(s.train, ctx.cfg.model, tc);
  const auto dir = ctx.out_dir();
  write_file_atomic(dir / "cv.csv", format_cv_table(result));
  ctx.wrote(dir / "cv.csv");
  const json best{{"batch_size", result.best.batch_size}, {"learning_rate", result.best.learning_rate}};
  write_file_atomic(dir / "hparams.json", best.dump(2) + "\n");
  ctx.wrote(dir / "hparams.json");
  return 0;
}

int cmd_train(const Context& ctx) {
  const Splits s = load_and_split(ctx, ctx.cfg.test_fraction, ctx.cfg.seed);
  TrainConfig tc = train_config(ctx, s.full);
  if (!ctx.flags.hparams.empty()) tc.hyper = read_hparams(ctx.flags.hparams);
  else if (ctx.cfg.cv) tc.hyper = cross_validate(s.train, ctx.cfg.model, tc).best;

  const TrainedModel tm = train(s.train, ctx.cfg.model, tc);
  const auto scores = evaluate_model(tm.model, s.test, tc.seed);
  const auto dir = ctx.out_dir();
  const json extra{{"seed", tc.seed},
                   {"test_fraction", ctx.cfg.test_fraction},
                   {"split_seed", split_seed(ctx.cfg.seed)},
                   {"batch_size", tc.hyper.batch_size},
                   {"learning_rate", tc.hyper.learning_rate},
                   {"epochs", tc.epochs},
                   {"tasks", tc.task_set},
                   {"bias_initialized", tm.bias_initialized}};
  save_checkpoint(dir / "model.m3h", tm.model, extra);
  ctx.wrote(dir / "model.m3h");
  write_file_atomic(dir / "metrics.csv", format_metrics_report(scores));
  ctx.wrote(dir / "metrics.csv");
  write_file_atomic(dir / "training_log.csv", format_training_log(tm.log));
  ctx.wrote(dir / "training_log.csv");
  return 0;
}

struct LoadedModel {
  Model model;
  json extra;
};

LoadedModel read_model(const std::string& path) {
  if (path.empty()) throw ConfigError("a checkpoint is required (--checkpoint)");
  LoadedModel lm;
  lm.model = load_checkpoint(path, &lm.extra);
  return lm;
}

Dataset eval_split(const Context& ctx, const json& extra) {
  Dataset full = load_dataset(ctx.data_path());
  const std::string& which = ctx.flags.split;
  if (which == "all") return full;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  try {
    fraction = extra.at("test_fraction").get<double>();
    seed = extra.at("split_seed").get<std::uint64_t>();
  } catch (const json::exception&) {
    throw FormatError("checkpoint carries no split record; use --split all");
  }
  const IndexSplit split = split_indices_by_patient(full, fraction, seed);
  return full.subset(which == "train" ? split.train : split.held_out);
}

// Per-task paired bootstrap of the metric difference between two models.
std::string bootstrap_report(const Model& a, const Model& b, const Dataset& ds, std::size_t n_boot,
                             std::uint64_t seed) {
  std::string out = "task,metric,mean_delta,lower,upper,used\n";
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Predictions pa = a.predict(ds, all);
  const Predictions pb = b.predict(ds, all);
  for (std::size_t t = 0; t < a.tasks().size(); ++t) {
    const TaskSpec& spec = a.tasks()[t];
    if (!spec.supervised() || spec.problem == ProblemClass::multiclass) continue;
    const auto bt = b.find_task(spec.name);
    const auto dt = ds.find_task(spec.name);
    if (!bt || !dt) continue;
    std::vector<double> sa, sb, labels;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (const auto y = ds.label(*dt, i)) {
        sa.push_back(pa.per_task[t](i, 0));
        sb.push_back(pb.per_task[*bt](i, 0));
        labels.push_back(*y);
      }
    }
    const bool binary = spec.problem == ProblemClass::binary;
    const ResampleStatistic stat = [&](std::span<const double> s, std::span<const std::size_t> idx) {
      std::vector<double> rs, rl;
      for (auto i : idx) {
        rs.push_back(s[i]);
        rl.push_back(labels[i]);
      }
      return binary ? auroc(rs, rl) : r_squared(rs, rl);
    };
    const auto r = bootstrap_compare(sa, sb, n_boot, mix_seed(seed, t), stat);
    out += spec.name + "," + std::string(to_string(metric_for(spec.problem))) + "," +
           format_double(r.mean_delta) + "," + format_double(r.lower) + "," + format_double(r.upper) +
           "," + std::to_string(r.used) + "\n";
  }
  return out;
}

int cmd_eval(const Context& ctx) {
  const LoadedModel lm = read_model(ctx.flags.checkpoint);
  const Dataset ds = eval_split(ctx, lm.extra);
  const std::uint64_t seed = lm.extra.value("seed", ctx.cfg.seed);
  const auto scores = evaluate_model(lm.model, ds, seed);
  const auto dir = ctx.out_dir();
  write_file_atomic(dir / "metrics.csv", format_metrics_report(scores));
  ctx.wrote(dir / "metrics.csv");
  if (!ctx.flags.compare.empty()) {
    const LoadedModel other = read_model(ctx.flags.compare);
    write_file_atomic(dir / "bootstrap.csv", bootstrap_report(lm.model, other.model, ds, ctx.cfg.boot, seed));
    ctx.wrote(dir / "bootstrap.csv");
  }
  return 0;
}

int cmd_tim(const Context& ctx) {
  const Splits s = load_and_split(ctx, ctx.cfg.test_fraction, ctx.cfg.seed);
  TrainConfig tc = train_config(ctx, s.full);
  if (!ctx.flags.hparams.empty()) tc.hyper = read_hparams(ctx.flags.hparams);
  PipelineOracle oracle(s.train, s.test, ctx.cfg.model, tc, ctx.cfg.seed, ctx.cfg.cv);
  TimMatrixOptions opts;
  opts.mode = ctx.cfg.tim_mode;
  opts.n_samples = ctx.cfg.tim_samples;
  opts.seed = ctx.cfg.seed;
  opts.workers = tc.workers;
  const TimMatrix m = tim_matrix(oracle, tc.task_set, opts);
  const auto dir = ctx.out_dir();
  write_file_atomic(dir / "tim.csv", format_tim_csv(m.pairs));
  ctx.wrote(dir / "tim.csv");
  write_file_atomic(dir / "tim_heatmap.csv", format_heatmap_csv(m));
  ctx.wrote(dir / "tim_heatmap.csv");
  return 0;
}

int cmd_select(const Context& ctx) {
  if (!ctx.cfg.source) throw ConfigError("select needs a source task (--source)");
  const Splits s = load_and_split(ctx, ctx.cfg.test_fraction, ctx.cfg.seed);
  TrainConfig tc = train_config(ctx, s.full);
  if (!ctx.flags.hparams.empty()) tc.hyper = read_hparams(ctx.flags.hparams);
  const std::string& source = *ctx.cfg.source;
  if (!s.full.find_task(source)) throw ConfigError("unknown source task '" + source + "'");
  std::vector<std::string> candidates;
  for (const auto& t : tc.task_set)
    if (t != source) candidates.push_back(t);
  PipelineOracle oracle(s.train, s.test, ctx.cfg.model, tc, ctx.cfg.seed, ctx.cfg.cv);
  const GreedyResult r = greedy_select(oracle, source, candidates, ctx.cfg.beam, tc.workers);
  const auto dir = ctx.out_dir();
  write_file_atomic(dir / "selection.csv", format_greedy_trace(r));
  ctx.wrote(dir / "selection.csv");
  write_file_atomic(dir / "selected.txt", join_task_set(r.best, ',') + "\n");
  ctx.wrote(dir / "selected.txt");
  ctx.out << "selected " << join_task_set(r.best, ',') << " score " << format_double(r.best_score) << "\n";
  return 0;
}

int cmd_gradcheck(const Context& ctx) {
  std::vector<TermCheck> rows;
  PipelineCheckOptions opts;
  opts.eps = ctx.cfg.gradcheck_eps;
  for (std::size_t k = 0; k < ctx.cfg.gradcheck_points; ++k) {
    auto part = pipeline_gradcheck(mix_seed(ctx.cfg.seed, k), opts);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.max_relative_error);
  if (ctx.cfg.out) {
    write_file_atomic(*ctx.cfg.out / "gradcheck.csv", format_gradcheck_report(rows));
    ctx.wrote(*ctx.cfg.out / "gradcheck.csv");
  }
  const bool ok = worst < ctx.cfg.gradcheck_tolerance;
  ctx.out << "gradcheck " << (ok ? "passed" : "FAILED") << ": max relative error "
          << format_double(worst) << " over " << rows.size() << " checks\n";
  return ok ? 0 : 1;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON experiment configuration");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--seed", f.seed, "experiment seed");
}

void add_data(CLI::App* sub, Flags& f) {
  sub->add_option("--data", f.data, "dataset manifest");
  sub->add_option("--tasks", f.tasks, "comma-separated task subset");
  sub->add_option("--alpha", f.alpha, "cross-task exploration strength");
  sub->add_option("--epochs", f.epochs, "training epochs");
  sub->add_option("--workers", f.workers, "worker threads");
  sub->add_option("--hparams", f.hparams, "hyperparameters chosen by cv (hparams.json)");
}

ExperimentConfig merge(const Flags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_experiment_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.data.empty()) cfg.data = f.data;
  if (!f.tasks.empty()) cfg.tasks = split_list(f.tasks);
  if (f.alpha) cfg.model.alpha = *f.alpha;
  if (f.epochs) cfg.train.epochs = *f.epochs;
  if (f.workers) cfg.train.workers = *f.workers;
  if (!f.mode.empty()) cfg.tim_mode = parse_tim_mode(f.mode);
  if (f.samples) cfg.tim_samples = *f.samples;
  if (!f.source.empty()) cfg.source = f.source;
  if (f.beam) cfg.beam = *f.beam;
  if (f.boot) cfg.boot = *f.boot;
  cfg.model.validate();
  cfg.train.validate();
  if (cfg.boot < 100) throw ConfigError("--boot must be >= 100");
  if (cfg.beam < 1) throw ConfigError("--beam must be >= 1");
  return cfg;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal multitask training, task interaction and task selection", "m3h"};
  app.require_subcommand(1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  add_common(synth, f);
  auto* train_cmd = app.add_subcommand("train", "fit one task set; write checkpoint, metrics and log");
  add_common(train_cmd, f);
  add_data(train_cmd, f);
  auto* cv = app.add_subcommand("cv", "k-fold hyperparameter grid search");
  add_common(cv, f);
  add_data(cv, f);
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset");
  add_common(eval, f);
  eval->add_option("--data", f.data, "dataset manifest");
  eval->add_option("--checkpoint", f.checkpoint, "model checkpoint");
  eval->add_option("--split", f.split, "test, train or all")->check(CLI::IsMember({"test", "train", "all"}));
  eval->add_option("--compare", f.compare, "second checkpoint for a paired bootstrap");
  eval->add_option("--boot", f.boot, "bootstrap resamples");
  auto* tim = app.add_subcommand("tim", "task interaction matrix");
  add_common(tim, f);
  add_data(tim, f);
  tim->add_option("--mode", f.mode, "pairwise, exact or sampled");
  tim->add_option("--samples", f.samples, "subsets per pair in sampled mode");
  auto* select = app.add_subcommand("select", "greedy task-set search for a source task");
  add_common(select, f);
  add_data(select, f);
  select->add_option("--source", f.source, "source task");
  select->add_option("--beam", f.beam, "beam width");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full model");
  add_common(gradcheck, f);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const Context ctx{merge(f), f, out};
    if (synth->parsed()) return cmd_synth(ctx);
    if (train_cmd->parsed()) return cmd_train(ctx);
    if (cv->parsed()) return cmd_cv(ctx);
    if (eval->parsed()) return cmd_eval(ctx);
    if (tim->parsed()) return cmd_tim(ctx);
    if (select->parsed()) return cmd_select(ctx);
    if (gradcheck->parsed()) return cmd_gradcheck(ctx);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace m3h
