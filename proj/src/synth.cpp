#include "m3h/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "m3h/error.hpp"
#include "m3h/random.hpp"

namespace m3h {
namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  for (double& x : v) x /= n;
}

std::vector<double> gaussian(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

std::string padded(const char* prefix, std::size_t value, std::size_t width) {
  std::string digits = std::to_string(value);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_patients < 1) throw ConfigError("synth: n_patients must be >= 1");
  if (samples_per_patient < 1) throw ConfigError("synth: samples_per_patient must be >= 1");
  if (schemas.empty()) throw ConfigError("synth: at least one modality is required");
  if (latent_dim < 1) throw ConfigError("synth: latent_dim must be >= 1");
  if (!(task_correlation >= 0.0 && task_correlation <= 1.0)) {
    throw ConfigError("synth: task_correlation must lie in [0, 1]");
  }
  if (!(noise_scale >= 0.0) || !(label_noise >= 0.0) || !(sample_jitter >= 0.0)) {
    throw ConfigError("synth: noise scales must be >= 0");
  }
  Dataset shape(schemas, tasks);  // validates names and task specs
  std::size_t supervised = 0;
  for (const auto& t : tasks) {
    if (t.supervised()) ++supervised;
  }
  if (supervised + 1 > latent_dim) {
    throw ConfigError("synth: latent_dim must exceed the number of supervised tasks");
  }
  for (const auto& [name, p] : prevalence) {
    auto task = shape.find_task(name);
    if (!task || tasks[*task].problem != ProblemClass::binary) {
      throw ConfigError("synth: prevalence given for non-binary task '" + name + "'");
    }
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("synth: prevalence must lie in (0, 1)");
  }
}

SynthOutput synth_generate_with_truth(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t d = cfg.latent_dim;

  // Modality views: latent (1 x d) times a d x dim map.
  std::vector<std::vector<double>> views;
  for (const auto& s : cfg.schemas) {
    auto a = gaussian(rng, d * s.dim);
    for (double& x : a) x /= std::sqrt(static_cast<double>(d));
    views.push_back(std::move(a));
  }

  // Shared direction plus one orthogonal private direction per supervised task.
  std::vector<std::vector<double>> basis;
  auto next_orthonormal = [&] {
    auto v = gaussian(rng, d);
    for (const auto& b : basis) {
      const double proj = dot(v, b);
      for (std::size_t i = 0; i < d; ++i) v[i] -= proj * b[i];
    }
    normalize(v);
    basis.push_back(v);
    return v;
  };
  const auto shared = next_orthonormal();
  const double rho = cfg.task_correlation;
  std::vector<std::vector<double>> directions(cfg.tasks.size());
  for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
    if (!cfg.tasks[t].supervised()) continue;
    const auto own = next_orthonormal();
    directions[t].resize(d);
    for (std::size_t i = 0; i < d; ++i)
      directions[t][i] = std::sqrt(rho) * shared[i] + std::sqrt(1.0 - rho) * own[i];
  }

  std::vector<std::vector<double>> centres;
  for (std::size_t c = 0; c < cfg.latent_clusters; ++c) {
    auto v = gaussian(rng, d);
    for (double& x : v) x *= cfg.cluster_separation;
    centres.push_back(std::move(v));
  }

  const std::size_t n = cfg.n_patients * cfg.samples_per_patient;
  std::vector<std::vector<double>> latents;
  std::vector<std::size_t> truth;
  latents.reserve(n);
  for (std::size_t p = 0; p < cfg.n_patients; ++p) {
    auto base = gaussian(rng, d);
    std::size_t centre = 0;
    if (!centres.empty()) {
      centre = static_cast<std::size_t>(rng.below(centres.size()));
      for (std::size_t i = 0; i < d; ++i) base[i] += centres[centre][i];
    }
    for (std::size_t k = 0; k < cfg.samples_per_patient; ++k) {
      auto z = base;
      for (double& x : z) x += cfg.sample_jitter * rng.normal();
      latents.push_back(std::move(z));
      truth.push_back(centre);
    }
  }

  // Task scores, then labels by class.
  std::vector<std::vector<std::optional<double>>> labels(n, std::vector<std::optional<double>>(cfg.tasks.size()));
  for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
    const TaskSpec& task = cfg.tasks[t];
    if (!task.supervised()) continue;
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i)
      score[i] = dot(latents[i], directions[t]) + cfg.label_noise * rng.normal();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    switch (task.problem) {
      case ProblemClass::binary: {
        auto it = cfg.prevalence.find(task.name);
        const double prev = it == cfg.prevalence.end() ? 0.5 : it->second;
        auto n_pos = static_cast<std::size_t>(std::llround(prev * static_cast<double>(n)));
        n_pos = std::clamp<std::size_t>(n_pos, n > 1 ? 1 : 0, n > 1 ? n - 1 : n);
        for (std::size_t r = 0; r < n; ++r) labels[order[r]][t] = r >= n - n_pos ? 1.0 : 0.0;
        break;
      }
      case ProblemClass::multiclass:
        for (std::size_t r = 0; r < n; ++r)
          labels[order[r]][t] = static_cast<double>(r * task.num_classes / n);
        break;
      case ProblemClass::regression:
        for (std::size_t i = 0; i < n; ++i) labels[i][t] = score[i];
        break;
      case ProblemClass::cluster:
        break;
    }
  }

  SynthOutput out{Dataset(cfg.schemas, cfg.tasks), std::move(truth)};
  const std::size_t width = std::to_string(cfg.n_patients).size();
  std::vector<std::vector<double>> emb(cfg.schemas.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = i / cfg.samples_per_patient;
    for (std::size_t m = 0; m < cfg.schemas.size(); ++m) {
      const std::size_t dim = cfg.schemas[m].dim;
      emb[m].assign(dim, 0.0);
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t c = 0; c < dim; ++c) emb[m][c] += latents[i][j] * views[m][j * dim + c];
      for (double& x : emb[m]) x += cfg.noise_scale * rng.normal();
    }
    out.data.add_sample(padded("s", i, width + 2), padded("p", p, width), emb, std::move(labels[i]));
  }
  return out;
}

Dataset synth_generate(const SynthConfig& cfg) { return synth_generate_with_truth(cfg).data; }

}  // namespace m3h
