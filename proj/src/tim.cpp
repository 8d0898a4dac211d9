#include "m3h/tim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "m3h/error.hpp"
#include "m3h/evaluate.hpp"
#include "m3h/parallel.hpp"
#include "m3h/random.hpp"
#include "m3h/text_io.hpp"

namespace m3h {

TaskSet canonical(TaskSet tasks) {
  std::sort(tasks.begin(), tasks.end());
  tasks.erase(std::unique(tasks.begin(), tasks.end()), tasks.end());
  return tasks;
}

std::string join_task_set(const TaskSet& tasks, char sep) {
  std::string out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (i) out += sep;
    out += tasks[i];
  }
  return out;
}

void LookupOracle::set(TaskSet task_set, const std::string& measured, double value) {
  std::lock_guard lock(mu_);
  table_[{canonical(std::move(task_set)), measured}] = value;
}

double LookupOracle::score(const TaskSet& task_set, const std::string& measured) {
  std::lock_guard lock(mu_);
  ++calls_;
  const auto it = table_.find({task_set, measured});
  if (it == table_.end()) {
    throw ContractError("no score for task '" + measured + "' in {" + join_task_set(task_set, ',') + "}");
  }
  return it->second;
}

std::size_t LookupOracle::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

double FunctionOracle::score(const TaskSet& task_set, const std::string& measured) {
  {
    std::lock_guard lock(mu_);
    ++calls_;
  }
  return fn_(task_set, measured);
}

std::size_t FunctionOracle::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

double MemoOracle::score(const TaskSet& task_set, const std::string& measured) {
  std::shared_future<double> fut;
  std::promise<double> promise;
  bool owner = false;
  {
    std::lock_guard lock(mu_);
    auto key = std::make_pair(task_set, measured);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      fut = promise.get_future().share();
      cache_.emplace(std::move(key), fut);
      owner = true;
    } else {
      fut = it->second;
    }
  }
  if (owner) {
    try {
      promise.set_value(inner_.score(task_set, measured));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return fut.get();
}

std::size_t MemoOracle::evaluations() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

PipelineOracle::PipelineOracle(Dataset train, Dataset test, ModelConfig model_config,
                               TrainConfig train_config, std::uint64_t seed, bool cross_validate)
    : train_(std::move(train)),
      test_(std::move(test)),
      model_config_(std::move(model_config)),
      train_config_(std::move(train_config)),
      seed_(seed),
      cross_validate_(cross_validate) {}

std::uint64_t PipelineOracle::seed_for(const TaskSet& task_set) const {
  return mix_seed(stable_hash(join_task_set(canonical(task_set))), seed_);
}

std::vector<ScoreReport> PipelineOracle::scores_for(const TaskSet& task_set) {
  std::shared_future<std::vector<ScoreReport>> fut;
  std::promise<std::vector<ScoreReport>> promise;
  bool owner = false;
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(task_set);
    if (it == cache_.end()) {
      fut = promise.get_future().share();
      cache_.emplace(task_set, fut);
      owner = true;
    } else {
      fut = it->second;
    }
  }
  if (owner) {
    try {
      TrainConfig cfg = train_config_;
      cfg.task_set = task_set;
      cfg.seed = seed_for(task_set);
      if (cross_validate_) cfg.hyper = cross_validate(train_, model_config_, cfg).best;
      const TrainedModel tm = train(train_, model_config_, cfg);
      promise.set_value(evaluate_model(tm.model, test_, cfg.seed));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return fut.get();
}

double PipelineOracle::score(const TaskSet& task_set, const std::string& measured) {
  std::vector<ScoreReport> scores;
  try {
    scores = scores_for(task_set);
  } catch (const Error&) {
    rethrow_with_context("training {" + join_task_set(task_set, ',') + "}: ");
  }
  for (const auto& s : scores) {
    if (s.task != measured) continue;
    if (!s.valid) throw DomainError("task '" + measured + "' cannot be scored on the test split");
    return s.normalized;
  }
  throw ContractError("task '" + measured + "' is not in {" + join_task_set(task_set, ',') + "}");
}

std::size_t PipelineOracle::models_trained() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

std::string_view to_string(TimMode mode) {
  switch (mode) {
    case TimMode::exact:
      return "exact";
    case TimMode::pairwise:
      return "pairwise";
    case TimMode::sampled:
      return "sampled";
  }
  return "?";
}

TimMode parse_tim_mode(std::string_view text) {
  if (text == "exact") return TimMode::exact;
  if (text == "pairwise") return TimMode::pairwise;
  if (text == "sampled") return TimMode::sampled;
  throw ConfigError("unknown TIM mode '" + std::string(text) + "' (expected exact, pairwise or sampled)");
}

namespace {

void check_pair(const std::string& i, const std::string& j) {
  if (i == j) throw ContractError("TIM needs two distinct tasks, got '" + i + "' twice");
}

std::vector<std::string> others(const std::string& i, const std::string& j,
                                const std::vector<std::string>& all_tasks) {
  bool has_i = false, has_j = false;
  std::vector<std::string> rest;
  for (const auto& t : all_tasks) {
    if (t == i) has_i = true;
    else if (t == j) has_j = true;
    else rest.push_back(t);
  }
  if (!has_i || !has_j) throw ContractError("'" + i + "' and '" + j + "' must both be in the task list");
  if (canonical(rest).size() != rest.size()) throw ContractError("task list has duplicates");
  return rest;
}

double bracket(PerformanceOracle& oracle, const std::string& i, const std::string& j, TaskSet s) {
  s.push_back(i);
  const TaskSet without = canonical(s);
  s.push_back(j);
  const TaskSet with = canonical(std::move(s));
  return oracle.score(with, i) - oracle.score(without, i);
}

}  // namespace

TimResult tim_exact(PerformanceOracle& oracle, const std::string& i, const std::string& j,
                    const std::vector<std::string>& all_tasks) {
  check_pair(i, j);
  if (all_tasks.size() > kMaxExactTasks) {
    throw CapacityError("exact enumeration is limited to " + std::to_string(kMaxExactTasks) +
                        " tasks (got " + std::to_string(all_tasks.size()) + "); use sampled mode");
  }
  const auto rest = others(i, j, all_tasks);
  const std::size_t n = std::size_t{1} << rest.size();
  double total = 0.0;
  for (std::size_t mask = 0; mask < n; ++mask) {
    TaskSet s;
    for (std::size_t b = 0; b < rest.size(); ++b)
      if (mask >> b & 1U) s.push_back(rest[b]);
    total += bracket(oracle, i, j, std::move(s));
  }
  return {i, j, total / static_cast<double>(n), TimMode::exact, n, 0};
}

TimResult tim_pairwise(PerformanceOracle& oracle, const std::string& i, const std::string& j) {
  check_pair(i, j);
  return {i, j, bracket(oracle, i, j, {}), TimMode::pairwise, 1, 0};
}

TimResult tim_sampled(PerformanceOracle& oracle, const std::string& i, const std::string& j,
                      const std::vector<std::string>& all_tasks, std::size_t n_samples,
                      std::uint64_t seed, const SubsetSampler& sampler) {
  check_pair(i, j);
  if (n_samples < 1) throw DomainError("sampled TIM needs at least one sample");
  const auto rest = others(i, j, all_tasks);
  Rng rng(seed);
  double total = 0.0;
  for (std::size_t d = 0; d < n_samples; ++d) {
    std::vector<bool> take;
    if (sampler) {
      take = sampler(d, rng);
      if (take.size() != rest.size()) throw ContractError("sampler returned a mask of the wrong length");
    } else {
      for (std::size_t b = 0; b < rest.size(); ++b) take.push_back(rng.below(2) == 1);
    }
    TaskSet s;
    for (std::size_t b = 0; b < rest.size(); ++b)
      if (take[b]) s.push_back(rest[b]);
    total += bracket(oracle, i, j, std::move(s));
  }
  return {i, j, total / static_cast<double>(n_samples), TimMode::sampled, n_samples, seed};
}

TimMatrix tim_matrix(PerformanceOracle& oracle, const std::vector<std::string>& tasks,
                     const TimMatrixOptions& options) {
  const std::size_t m = tasks.size();
  if (canonical(tasks).size() != m) throw ContractError("task list has duplicates");
  MemoOracle memo(oracle);
  TimMatrix out;
  out.tasks = tasks;
  out.delta = Matrix(m, m);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b)
      if (a != b) pairs.emplace_back(a, b);
  out.pairs.resize(pairs.size());
  parallel_for(pairs.size(), options.workers, [&](std::size_t p) {
    const auto [a, b] = pairs[p];
    try {
      switch (options.mode) {
        case TimMode::pairwise:
          out.pairs[p] = tim_pairwise(memo, tasks[a], tasks[b]);
          break;
        case TimMode::exact:
          out.pairs[p] = tim_exact(memo, tasks[a], tasks[b], tasks);
          break;
        case TimMode::sampled:
          out.pairs[p] = tim_sampled(memo, tasks[a], tasks[b], tasks, options.n_samples,
                                     mix_seed(options.seed, a * m + b));
          break;
      }
    } catch (const Error&) {
      rethrow_with_context("pair (" + tasks[a] + ", " + tasks[b] + "): ");
    }
  });
  for (std::size_t p = 0; p < pairs.size(); ++p) out.delta(pairs[p].first, pairs[p].second) = out.pairs[p].delta;
  out.evaluations = memo.evaluations();
  return out;
}

namespace {

bool better(const ScoredSet& a, const ScoredSet& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tasks < b.tasks;
}

}  // namespace

GreedyResult greedy_select(PerformanceOracle& oracle, const std::string& source,
                           const std::vector<std::string>& candidates, std::size_t beam_width,
                           std::size_t workers) {
  if (beam_width < 1) throw ConfigError("beam width must be >= 1");
  if (std::find(candidates.begin(), candidates.end(), source) != candidates.end())
    throw ContractError("source task '" + source + "' must not be among the candidates");
  const TaskSet pool = canonical(candidates);
  MemoOracle memo(oracle);

  GreedyResult out;
  out.source = source;
  out.best = {source};
  out.best_score = out.source_score = memo.score(out.best, source);
  std::vector<TaskSet> beam{out.best};

  while (true) {
    std::set<TaskSet> expansions;
    for (const auto& member : beam) {
      for (const auto& c : pool) {
        if (std::binary_search(member.begin(), member.end(), c)) continue;
        TaskSet next = member;
        next.push_back(c);
        expansions.insert(canonical(std::move(next)));
      }
    }
    if (expansions.empty()) break;

    GreedyRound round;
    round.candidates.reserve(expansions.size());
    for (const auto& s : expansions) round.candidates.push_back({s, 0.0});
    parallel_for(round.candidates.size(), workers, [&](std::size_t k) {
      round.candidates[k].score = memo.score(round.candidates[k].tasks, source);
    });
    std::sort(round.candidates.begin(), round.candidates.end(), better);
    const bool improved = round.candidates.front().score > out.best_score;
    round.kept = improved ? std::min(beam_width, round.candidates.size()) : 0;
    out.rounds.push_back(round);
    if (!improved) break;

    out.best = round.candidates.front().tasks;
    out.best_score = round.candidates.front().score;
    beam.clear();
    for (std::size_t k = 0; k < round.kept; ++k) beam.push_back(round.candidates[k].tasks);
  }
  out.evaluations = memo.evaluations();
  return out;
}

std::string format_tim_csv(const std::vector<TimResult>& results) {
  std::string out = "source,added,delta,mode,n_subsets,seed\n";
  for (const auto& r : results) {
    out += r.source + "," + r.added + "," + format_double(r.delta) + "," + std::string(to_string(r.mode)) +
           "," + std::to_string(r.n_subsets) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

std::string format_heatmap_csv(const TimMatrix& m) {
  std::string out = "task";
  for (const auto& t : m.tasks) out += "," + t;
  out += "\n";
  for (std::size_t a = 0; a < m.tasks.size(); ++a) {
    out += m.tasks[a];
    for (std::size_t b = 0; b < m.tasks.size(); ++b) out += "," + format_double(m.delta(a, b));
    out += "\n";
  }
  return out;
}

std::string format_greedy_trace(const GreedyResult& result) {
  std::string out = "round,task_set,score,kept\n";
  out += "0," + result.source + "," + format_double(result.source_score) + ",1\n";
  for (std::size_t r = 0; r < result.rounds.size(); ++r) {
    const auto& round = result.rounds[r];
    for (std::size_t k = 0; k < round.candidates.size(); ++k) {
      out += std::to_string(r + 1) + "," + join_task_set(round.candidates[k].tasks) + "," +
             format_double(round.candidates[k].score) + "," + (k < round.kept ? "1" : "0") + "\n";
    }
  }
  return out;
}

}  // namespace m3h
