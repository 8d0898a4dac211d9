#pragma once

#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "m3h/dataset.hpp"
#include "m3h/matrix.hpp"
#include "m3h/model.hpp"
#include "m3h/trainer.hpp"

namespace m3h {

// A task set is kept as a sorted list of unique task names.
using TaskSet = std::vector<std::string>;
TaskSet canonical(TaskSet tasks);
std::string join_task_set(const TaskSet& tasks, char sep = ';');

// Score of `measured` when the tasks in `task_set` are learned jointly.
// Implementations must be deterministic and safe to call concurrently.
class PerformanceOracle {
 public:
  virtual ~PerformanceOracle() = default;
  // `task_set` is canonical and contains `measured`.
  virtual double score(const TaskSet& task_set, const std::string& measured) = 0;
};

// Fixed table; unknown queries raise ContractError.
class LookupOracle : public PerformanceOracle {
 public:
  LookupOracle() = default;
  void set(TaskSet task_set, const std::string& measured, double value);
  double score(const TaskSet& task_set, const std::string& measured) override;
  std::size_t calls() const;

 private:
  std::map<std::pair<TaskSet, std::string>, double> table_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
};

// Any function (task_set, measured) -> score.
class FunctionOracle : public PerformanceOracle {
 public:
  using Fn = std::function<double(const TaskSet&, const std::string&)>;
  explicit FunctionOracle(Fn fn) : fn_(std::move(fn)) {}
  double score(const TaskSet& task_set, const std::string& measured) override;
  std::size_t calls() const;

 private:
  Fn fn_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
};

// Evaluates each distinct (task_set, measured) query at most once, even when
// queried from several threads at the same time.
class MemoOracle : public PerformanceOracle {
 public:
  explicit MemoOracle(PerformanceOracle& inner) : inner_(inner) {}
  double score(const TaskSet& task_set, const std::string& measured) override;
  std::size_t evaluations() const;

 private:
  PerformanceOracle& inner_;
  mutable std::mutex mu_;
  std::map<std::pair<TaskSet, std::string>, std::shared_future<double>> cache_;
};

// Trains on the task set with the full pipeline and returns the measured
// task's normalized held-out score. One model is trained per task set, seeded
// from the sorted task names and the experiment seed. With `cross_validate`
// set, each task set first picks its hyperparameters by k-fold search.
class PipelineOracle : public PerformanceOracle {
 public:
  PipelineOracle(Dataset train, Dataset test, ModelConfig model_config, TrainConfig train_config,
                 std::uint64_t seed, bool cross_validate = false);
  double score(const TaskSet& task_set, const std::string& measured) override;
  std::size_t models_trained() const;

  // The seed used for a task set.
  std::uint64_t seed_for(const TaskSet& task_set) const;

 private:
  std::vector<ScoreReport> scores_for(const TaskSet& task_set);

  Dataset train_;
  Dataset test_;
  ModelConfig model_config_;
  TrainConfig train_config_;
  std::uint64_t seed_;
  bool cross_validate_;
  mutable std::mutex mu_;
  std::map<TaskSet, std::shared_future<std::vector<ScoreReport>>> cache_;
};

enum class TimMode { exact, pairwise, sampled };
std::string_view to_string(TimMode mode);
TimMode parse_tim_mode(std::string_view text);  // throws ConfigError

struct TimResult {
  std::string source;
  std::string added;
  double delta = 0.0;
  TimMode mode = TimMode::pairwise;
  std::size_t n_subsets = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxExactTasks = 12;

// Average over every S of all_tasks without {i, j} of
// f(S + {i, j}, i) - f(S + {i}, i). Throws CapacityError above kMaxExactTasks.
TimResult tim_exact(PerformanceOracle& oracle, const std::string& i, const std::string& j,
                    const std::vector<std::string>& all_tasks);

// f({i, j}, i) - f({i}, i).
TimResult tim_pairwise(PerformanceOracle& oracle, const std::string& i, const std::string& j);

// Membership of each task of all_tasks without {i, j} (in order) for draw `d`.
using SubsetSampler = std::function<std::vector<bool>(std::size_t d, Rng& rng)>;

// Averages the same bracketed difference over n_samples subsets drawn
// uniformly with replacement (each task present with probability 1/2).
TimResult tim_sampled(PerformanceOracle& oracle, const std::string& i, const std::string& j,
                      const std::vector<std::string>& all_tasks, std::size_t n_samples,
                      std::uint64_t seed, const SubsetSampler& sampler = {});

struct TimMatrixOptions {
  TimMode mode = TimMode::pairwise;
  std::size_t n_samples = 256;  // sampled mode
  std::uint64_t seed = 0;       // sampled mode; mixed with the pair position
  std::size_t workers = 1;
};

struct TimMatrix {
  std::vector<std::string> tasks;
  Matrix delta;                  // delta(i, j) measures task i; diagonal 0
  std::vector<TimResult> pairs;  // row-major over (i, j), i != j
  std::size_t evaluations = 0;   // distinct oracle queries
};

// Queries are memoized for the duration of the call.
TimMatrix tim_matrix(PerformanceOracle& oracle, const std::vector<std::string>& tasks,
                     const TimMatrixOptions& options = {});

struct ScoredSet {
  TaskSet tasks;
  double score = 0.0;
};

struct GreedyRound {
  std::vector<ScoredSet> candidates;  // sorted best first
  std::size_t kept = 0;               // leading candidates retained in the beam
};

struct GreedyResult {
  std::string source;
  TaskSet best;
  double best_score = 0.0;
  double source_score = 0.0;
  std::vector<GreedyRound> rounds;
  std::size_t evaluations = 0;
};

// Beam search from {source}: every round expands each beam member by each
// unused candidate, keeps the global top beam_width sets, and stops once the
// round's best does not beat the incumbent. Ties prefer the lexicographically
// smallest task-name set.
GreedyResult greedy_select(PerformanceOracle& oracle, const std::string& source,
                           const std::vector<std::string>& candidates, std::size_t beam_width = 3,
                           std::size_t workers = 1);

std::string format_tim_csv(const std::vector<TimResult>& results);
std::string format_heatmap_csv(const TimMatrix& m);
std::string format_greedy_trace(const GreedyResult& result);

}  // namespace m3h
