// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            run everything
//   acceptance 4 6        run only the listed criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "m3h/attention.hpp"
#include "m3h/checkpoint.hpp"
#include "m3h/error.hpp"
#include "m3h/evaluate.hpp"
#include "m3h/kmeans.hpp"
#include "m3h/metrics.hpp"
#include "m3h/pipeline_check.hpp"
#include "m3h/split.hpp"
#include "m3h/synth.hpp"
#include "m3h/text_io.hpp"
#include "m3h/tim.hpp"
#include "m3h/trainer.hpp"

using namespace m3h;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1: gradient integrity ------------------------------------------------

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  std::size_t checks = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const TermCheck& r : pipeline_gradcheck(seed)) {
      ++checks;
      if (r.max_relative_error >= worst) {
        worst = r.max_relative_error;
        where = r.term + (r.task.empty() ? "" : "/" + r.task) + " " + r.worst_parameter;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0,
          std::to_string(checks) + " checks at 10 points, max rel err " + fmt("%.2e", worst) + " (" + where +
              "), " + fmt("%.1f", secs) + " s"};
}

// ---- 2: attention invariants ---------------------------------------------

Outcome attention_invariants() {
  Rng rng(2024);
  const std::size_t task_counts[] = {1, 2, 3, 5};
  const std::size_t batches[] = {1, 4};
  const std::size_t f = 4;
  double worst_row = 0.0;
  bool single_exact = true, alpha_zero = true, q_fixed = true;
  auto rand_matrix = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (auto& x : m.values()) x = rng.normal();
    return m;
  };
  auto rand_input = [&](std::size_t nb, std::size_t nt) {
    Tensor3 x(nb, nt, f);
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t k = 0; k < f; ++k) x(b, t, k) = rng.normal();
    return x;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nt = task_counts[rng.below(4)], nb = batches[rng.below(2)];
    AttentionWeights w{rand_matrix(f, f), rand_matrix(f, f), rand_matrix(f, f), rand_matrix(nt, f),
                       0.05 + rng.uniform()};
    const Tensor3 x = rand_input(nb, nt);
    const AttentionTrace tr = cross_task_attention(x, w);
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t t = 0; t < nt; ++t) {
        double s = 0.0;
        for (std::size_t u = 0; u < nt; ++u) s += tr.routing(b, t, u);
        worst_row = std::max(worst_row, std::abs(s - 1.0));
      }
    if (nt == 1) {
      // O = x W_V, computed here with plain loops
      for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t k = 0; k < f; ++k) {
          double v = 0.0;
          for (std::size_t r = 0; r < f; ++r) v += x(b, 0, r) * w.value(r, k);
          if (std::abs(tr.output(b, 0, k) - v) > 1e-12 * (1.0 + std::abs(v))) single_exact = false;
          if (tr.output(b, 0, k) != tr.values(b, 0, k)) single_exact = false;
        }
    }
    AttentionWeights w0 = w;
    w0.alpha = 0.0;
    Tensor3 bumped = x;
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t t = 0; t < nt; ++t) bumped(b, t, rng.below(f)) += rng.normal();
    if (!(cross_task_attention(x, w0).routing == cross_task_attention(bumped, w0).routing)) alpha_zero = false;
    const Tensor3 other = rand_input(nb == 1 ? 4 : 1, nt);
    if (!(cross_task_attention(other, w).query == tr.query)) q_fixed = false;
  }
  const bool ok = worst_row <= 1e-10 && single_exact && alpha_zero && q_fixed;
  return {ok, "100 instances: max |row sum - 1| " + fmt("%.1e", worst_row) +
                  ", n_tasks=1 passthrough " + (single_exact ? "ok" : "BROKEN") + ", alpha=0 routing " +
                  (alpha_zero ? "bit-identical" : "CHANGED") + ", Q batch-independent " + (q_fixed ? "yes" : "NO")};
}

// ---- 3: metric oracles ---------------------------------------------------

double brute_auroc(const std::vector<double>& s, const std::vector<double>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1.0 && y[j] == 0.0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

double brute_silhouette(const Matrix& p, const std::vector<std::size_t>& a, std::size_t k) {
  const std::size_t n = p.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> sum(k, 0.0), cnt(k, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double d2 = 0.0;
      for (std::size_t c = 0; c < p.cols(); ++c) d2 += (p(i, c) - p(j, c)) * (p(i, c) - p(j, c));
      sum[a[j]] += std::sqrt(d2);
      cnt[a[j]] += 1.0;
    }
    if (cnt[a[i]] == 0.0) continue;
    const double own = sum[a[i]] / cnt[a[i]];
    double nearest = INFINITY;
    for (std::size_t c = 0; c < k; ++c)
      if (c != a[i] && cnt[c] > 0.0) nearest = std::min(nearest, sum[c] / cnt[c]);
    total += (nearest - own) / std::max(own, nearest);
  }
  return total / static_cast<double>(n);
}

Outcome metric_oracles() {
  Rng rng(33);
  double auc_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(80);
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 3 == 0 ? static_cast<double>(rng.below(4)) : rng.normal();
      y[i] = static_cast<double>(rng.below(2));
    }
    y[0] = 0.0;
    y[n - 1] = 1.0;
    auc_err = std::max(auc_err, std::abs(auroc(s, y) - brute_auroc(s, y)));
  }
  double sil_err = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.below(48);
    const std::size_t k = 2 + rng.below(std::min<std::size_t>(n - 2, 5));
    Matrix p(n, 1 + rng.below(4));
    for (auto& x : p.values()) x = rng.normal();
    std::vector<std::size_t> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = i < k ? i : rng.below(k);
    sil_err = std::max(sil_err, std::abs(silhouette(p, a) - brute_silhouette(p, a, k)));
  }
  const double r2 = r_squared(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 3.0});
  const bool ok = auc_err <= 1e-12 && sil_err <= 1e-10 && r2 == 0.5;
  return {ok, "AUROC max err " + fmt("%.1e", auc_err) + " over 200, silhouette max err " + fmt("%.1e", sil_err) +
                  " over 50, R2({1,2} vs {1,3}) = " + format_double(r2)};
}

// ---- 4: TIM correctness --------------------------------------------------

void fill_random(LookupOracle& o, const std::vector<std::string>& tasks, Rng& rng) {
  const std::size_t m = tasks.size();
  for (std::size_t mask = 1; mask < (std::size_t{1} << m); ++mask) {
    TaskSet s;
    for (std::size_t b = 0; b < m; ++b)
      if (mask >> b & 1U) s.push_back(tasks[b]);
    for (const auto& t : s) o.set(s, t, 0.5 + 0.4 * rng.uniform());
  }
}

Outcome tim_correctness() {
  LookupOracle three;
  three.set({"1"}, "1", 0.70);
  three.set({"1", "2"}, "1", 0.74);
  three.set({"1", "3"}, "1", 0.71);
  three.set({"1", "2", "3"}, "1", 0.77);
  const double d12 = tim_exact(three, "1", "2", {"1", "2", "3"}).delta;
  const bool hand = std::abs(d12 - 0.05) <= 1e-15;

  Rng rng(44);
  bool pair_equal = true;
  for (int trial = 0; trial < 20; ++trial) {
    LookupOracle two;
    fill_random(two, {"a", "b"}, rng);
    if (tim_pairwise(two, "a", "b").delta != tim_exact(two, "a", "b", {"a", "b"}).delta) pair_equal = false;
    if (tim_pairwise(two, "b", "a").delta != tim_exact(two, "b", "a", {"a", "b"}).delta) pair_equal = false;
  }

  const std::vector<std::string> five{"a", "b", "c", "d", "e"};
  LookupOracle big;
  fill_random(big, five, rng);
  const double exact = tim_exact(big, "a", "b", five).delta;
  const std::size_t runs = 1000, per_run = 8;
  std::vector<double> est(runs);
  for (std::size_t r = 0; r < runs; ++r) est[r] = tim_sampled(big, "a", "b", five, per_run, 7000 + r).delta;
  double mean = 0.0;
  for (double v : est) mean += v / static_cast<double>(runs);
  double var = 0.0;
  for (double v : est) var += (v - mean) * (v - mean) / static_cast<double>(runs - 1);
  const double se = std::sqrt(var / static_cast<double>(runs));
  const bool sampled = std::abs(mean - exact) <= 3.0 * se;
  return {hand && pair_equal && sampled,
          "M=3 delta_12 = " + format_double(d12) + ", pairwise == exact at M=2: " + (pair_equal ? "yes" : "NO") +
              ", M=5 sampled mean " + fmt("%.5f", mean) + " vs exact " + fmt("%.5f", exact) + " (" +
              fmt("%.2f", std::abs(mean - exact) / se) + " SE)"};
}

// ---- 5: greedy selection -------------------------------------------------

struct Subsets {
  std::vector<TaskSet> all;  // every set containing the source
};

Subsets subsets_with(const std::string& source, const std::vector<std::string>& candidates) {
  Subsets out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << candidates.size()); ++mask) {
    TaskSet s{source};
    for (std::size_t b = 0; b < candidates.size(); ++b)
      if (mask >> b & 1U) s.push_back(candidates[b]);
    out.all.push_back(canonical(s));
  }
  return out;
}

Outcome greedy_selection() {
  const auto t0 = Clock::now();
  Rng rng(55);
  std::size_t matched = 0;
  const std::size_t instances = 50;
  for (std::size_t inst = 0; inst < instances; ++inst) {
    // Additive per-task effects, weaker pairwise interactions and a little noise.
    const std::size_t n_cand = 2 + rng.below(4);
    std::vector<std::string> cand;
    for (std::size_t c = 0; c < n_cand; ++c) cand.push_back(std::string(1, static_cast<char>('a' + c)));
    std::map<std::string, double> effect;
    std::map<std::pair<std::string, std::string>, double> inter;
    for (const auto& c : cand) effect[c] = 0.03 * rng.normal();
    for (const auto& c : cand)
      for (const auto& d : cand)
        if (c < d) inter[{c, d}] = 0.01 * rng.normal();
    LookupOracle o;
    const Subsets subs = subsets_with("s", cand);
    double best = -INFINITY;
    for (const TaskSet& s : subs.all) {
      double v = 0.7 + 0.005 * rng.normal();
      for (const auto& t : s)
        if (t != "s") v += effect[t];
      for (const auto& t : s)
        for (const auto& u : s)
          if (t != "s" && u != "s" && t < u) v += inter[{t, u}];
      o.set(s, "s", v);
      best = std::max(best, v);
    }
    if (greedy_select(o, "s", cand, 3).best_score == best) ++matched;
  }

  bool monotone_ok = true;
  for (std::size_t inst = 0; inst < 50; ++inst) {
    const std::size_t n_cand = 1 + rng.below(5);
    std::vector<std::string> cand;
    for (std::size_t c = 0; c < n_cand; ++c) cand.push_back(std::string(1, static_cast<char>('a' + c)));
    std::map<std::string, double> gain;
    for (const auto& c : cand) gain[c] = 0.001 + 0.05 * rng.uniform();
    LookupOracle o;
    for (const TaskSet& s : subsets_with("s", cand).all) {
      double v = 0.5;
      for (const auto& t : s)
        if (t != "s") v += gain[t] * (1.0 + 0.1 * static_cast<double>(s.size()));
      o.set(s, "s", v);
    }
    TaskSet full = cand;
    full.push_back("s");
    if (greedy_select(o, "s", cand, 3).best != canonical(full)) monotone_ok = false;
  }
  const double secs = seconds_since(t0);
  const double rate = static_cast<double>(matched) / static_cast<double>(instances);
  return {rate >= 0.9 && monotone_ok && secs < 10.0,
          std::to_string(matched) + "/50 random oracles match exhaustive, monotone oracles " +
              (monotone_ok ? "all optimal" : "MISSED") + ", " + fmt("%.2f", secs) + " s"};
}

// ---- 6: multitask beats single-task --------------------------------------

Outcome multitask_gain() {
  const auto t0 = Clock::now();
  ModelConfig mc;
  mc.modality_hidden = {32, 16};
  mc.shared_hidden = {32, 16};
  mc.task_embed_dim = 8;
  mc.contrastive_proj_dim = 8;
  std::map<double, double> diff;
  std::string detail;
  for (double rho : {0.9, 0.0}) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SynthConfig s;
      s.n_patients = 600;
      s.schemas = {{"tabular", 6}, {"series", 16}, {"vision", 32}};
      s.tasks = {{"t0", ProblemClass::binary}, {"t1", ProblemClass::binary}, {"t2", ProblemClass::binary}};
      s.latent_dim = 32;
      s.noise_scale = 0.3;
      s.label_noise = 0.25;
      s.task_correlation = rho;
      s.seed = 1000 + seed;
      const Dataset ds = synth_generate(s);
      const auto [train_ds, test_ds] = split_by_patient(ds, 0.2, seed);
      TrainConfig tc;
      tc.epochs = 20;
      tc.hyper = {64, 1e-3};
      tc.seed = seed;
      auto source_auroc = [&](std::vector<std::string> tasks) {
        tc.task_set = std::move(tasks);
        const TrainedModel tm = train(train_ds, mc, tc);
        for (const auto& r : evaluate_model(tm.model, test_ds, seed))
          if (r.task == "t0") return r.raw;
        throw ContractError("source task missing from the report");
      };
      total += source_auroc({"t0", "t1", "t2"}) - source_auroc({"t0"});
    }
    diff[rho] = total / 5.0;
    detail += "rho=" + fmt("%.1f", rho) + " mean gain " + fmt("%+.4f", diff[rho]) + ", ";
  }
  const double secs = seconds_since(t0);
  const bool ok = diff[0.9] >= 0.02 && std::abs(diff[0.0]) <= 0.02 && secs < 300.0;
  return {ok, detail + fmt("%.1f", secs) + " s"};
}

// ---- 7: imbalance bias ---------------------------------------------------

Outcome imbalance_bias() {
  auto run = [](double prevalence, double& mean_prob, bool& fired) {
    SynthConfig s;
    s.n_patients = 2000;
    s.schemas = {{"tabular", 6}, {"series", 16}};
    s.tasks = {{"rare", ProblemClass::binary}};
    s.prevalence["rare"] = prevalence;
    s.seed = 77;
    const Dataset ds = synth_generate(s);
    Model m(ds.schemas(), ds.tasks(), ModelConfig{});
    fired = !apply_imbalance_bias(m, ds).empty();
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const Matrix p = m.predict(ds, all).per_task[0];
    mean_prob = 0.0;
    for (double v : p.values()) mean_prob += v / static_cast<double>(p.rows());
  };
  double low_mean = 0.0, high_mean = 0.0;
  bool low_fired = false, high_fired = true;
  run(0.05, low_mean, low_fired);
  run(0.20, high_mean, high_fired);
  const bool ok = low_fired && std::abs(low_mean - 0.05) <= 0.02 && !high_fired;
  return {ok, std::string("prevalence 0.05: rule ") + (low_fired ? "fired" : "DID NOT FIRE") +
                  ", untrained mean probability " + fmt("%.4f", low_mean) + "; prevalence 0.20: rule " +
                  (high_fired ? "FIRED" : "idle")};
}

// ---- 8: clustering path --------------------------------------------------

bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::map<std::size_t, std::size_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (auto it = ab.find(a[i]); it != ab.end() && it->second != b[i]) return false;
    if (auto it = ba.find(b[i]); it != ba.end() && it->second != a[i]) return false;
    ab[a[i]] = b[i];
    ba[b[i]] = a[i];
  }
  return true;
}

Outcome clustering_path() {
  std::size_t recovered = 0;
  bool sil_ok = true, deterministic = true;
  std::string sils;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig s;
    s.n_patients = 400;
    s.schemas = {{"tabular", 6}, {"series", 16}, {"vision", 32}};
    TaskSpec phen{"phenotype", ProblemClass::cluster};
    phen.cluster_k = 4;
    s.tasks = {phen};
    s.latent_clusters = 4;
    s.seed = 500 + seed;
    const SynthOutput out = synth_generate_with_truth(s);
    TrainConfig tc;
    tc.seed = seed;
    tc.hyper = {64, 1e-3};
    auto latent_clusters = [&](double& sil) {
      const TrainedModel tm = train(out.data, ModelConfig{}, tc);
      std::vector<std::size_t> all(out.data.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const Matrix z = tm.model.predict(out.data, all).per_task[0];
      const KMeansResult km = kmeans(z, 4, seed);
      sil = silhouette(z, km.assignments);
      return km.assignments;
    };
    double sil = 0.0, sil_again = 0.0;
    const auto assign = latent_clusters(sil);
    if (latent_clusters(sil_again) != assign || sil != sil_again) deterministic = false;
    if (sil < 0.5) sil_ok = false;
    if (same_partition(assign, out.latent_cluster)) ++recovered;
    sils += (seed ? " " : "") + fmt("%.3f", sil);
  }
  return {sil_ok && recovered >= 4 && deterministic,
          "silhouettes [" + sils + "], partitions recovered on " + std::to_string(recovered) + "/5 seeds, " +
              (deterministic ? "deterministic" : "NOT deterministic")};
}

// ---- 9: protocol reproducibility -----------------------------------------

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(M3H_CLI_PATH) + " " + args + " >>" + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return raw == -1 ? -1 : WEXITSTATUS(raw);
}

Outcome protocol_reproducibility() {
  const fs::path root = fs::temp_directory_path() / "m3h_acceptance_protocol";
  fs::remove_all(root);
  fs::create_directories(root);
  write_file_atomic(root / "experiment.json", R"({
  "synth": {
    "n_patients": 120,
    "modalities": [{"name": "tabular", "dim": 6}, {"name": "series", "dim": 8}],
    "tasks": [{"name": "a", "class": "binary"}, {"name": "b", "class": "binary"},
              {"name": "m", "class": "multiclass", "num_classes": 3},
              {"name": "r", "class": "regression"}],
    "latent_dim": 6
  },
  "model": {"modality_hidden": [16, 8], "shared_hidden": [16, 8], "task_embed_dim": 8,
            "contrastive_proj_dim": 8},
  "train": {"epochs": 3, "batch_sizes": [16, 32], "learning_rates": [0.001, 0.005], "folds": 3},
  "tim": {"mode": "exact"}
})");
  const fs::path cfg = root / "experiment.json", log = root / "log.txt";
  std::string failure;
  auto protocol = [&](const fs::path& dir) {
    const std::string common = "--config " + cfg.string() + " --seed 9";
    const std::string data = "--data " + (dir / "data" / "manifest.json").string();
    const std::vector<std::string> steps{
        "synth " + common + " --out " + (dir / "data").string(),
        "cv " + common + " " + data + " --out " + (dir / "cv").string(),
        "train " + common + " " + data + " --hparams " + (dir / "cv" / "hparams.json").string() + " --out " +
            (dir / "train").string(),
        "eval " + common + " " + data + " --checkpoint " + (dir / "train" / "model.m3h").string() + " --out " +
            (dir / "eval").string(),
        "tim " + common + " " + data + " --tasks a,b,r --out " + (dir / "tim").string()};
    for (const auto& step : steps) {
      const int code = cli(step, log);
      if (code != 0 && failure.empty()) failure = "'" + step.substr(0, step.find(' ')) + "' exited " + std::to_string(code);
    }
  };
  protocol(root / "run1");
  protocol(root / "run2");
  if (!failure.empty()) return {false, failure + " (see " + log.string() + ")"};

  const std::vector<fs::path> artifacts{"cv/cv.csv", "cv/hparams.json", "train/metrics.csv", "train/training_log.csv",
                                        "train/model.m3h", "eval/metrics.csv", "tim/tim.csv", "tim/tim_heatmap.csv"};
  std::string differing;
  for (const auto& a : artifacts)
    if (read_file(root / "run1" / a) != read_file(root / "run2" / a)) differing += " " + a.string();
  const bool eval_matches = read_file(root / "run1" / "eval" / "metrics.csv") ==
                            read_file(root / "run1" / "train" / "metrics.csv");

  // checkpoint: load, compare bits, save again
  nlohmann::json extra;
  const Model m = load_checkpoint(root / "run1" / "train" / "model.m3h", &extra);
  const std::string original = read_file(root / "run1" / "train" / "model.m3h");
  const bool ckpt_exact = serialize_checkpoint(m, extra) == original;
  bool bits = true;
  const Model again = deserialize_checkpoint(original);
  for (std::size_t id = 0; id < m.params().size(); ++id) {
    const auto x = m.params().value(id).values(), y = again.params().value(id).values();
    if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) bits = false;
  }
  const bool ok = differing.empty() && eval_matches && ckpt_exact && bits;
  return {ok, std::string("two runs: ") + (differing.empty() ? "all CSVs and checkpoints byte-identical" : "DIFFER:" + differing) +
                  ", eval metrics " + (eval_matches ? "equal" : "DIFFER FROM") + " train metrics, checkpoint round trip " +
                  (ckpt_exact && bits ? "bit-exact" : "NOT bit-exact")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"attention invariants", attention_invariants},
      {"metric oracles", metric_oracles},
      {"TIM correctness", tim_correctness},
      {"greedy selection", greedy_selection},
      {"multitask gain", multitask_gain},
      {"imbalance bias", imbalance_bias},
      {"clustering path", clustering_path},
      {"protocol reproducibility", protocol_reproducibility},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::atoi(argv[i])));

  int failed = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (!only.empty() && !only.contains(c + 1)) continue;
    Outcome o;
    try {
      o = criteria[c].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", static_cast<int>(c + 1), criteria[c].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
