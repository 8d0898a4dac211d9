#include "m3h/evaluate.hpp"

#include <numeric>

#include "m3h/error.hpp"
#include "m3h/text_io.hpp"

namespace m3h {

namespace {

ScoreReport invalid(const TaskSpec& spec, std::size_t n) {
  ScoreReport r;
  r.task = spec.name;
  r.metric = metric_for(spec.problem);
  r.n_evaluated = n;
  r.valid = false;
  return r;
}

}  // namespace

std::vector<ScoreReport> evaluate_model(const Model& model, const Dataset& ds, std::uint64_t seed,
                                        const KMeansOptions& kmeans_options) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Predictions pred = model.predict(ds, all);

  std::vector<ScoreReport> out;
  for (std::size_t t = 0; t < model.tasks().size(); ++t) {
    const TaskSpec& spec = model.tasks()[t];
    const Matrix& p = pred.per_task[t];
    ScoreReport report;
    report.task = spec.name;
    report.metric = metric_for(spec.problem);
    try {
      if (spec.problem == ProblemClass::cluster) {
        report.n_evaluated = ds.size();
        const KMeansResult km = kmeans(p, spec.cluster_k, seed, kmeans_options);
        report.raw = silhouette(p, km.assignments);
      } else {
        const auto di = ds.find_task(spec.name);
        if (!di) {
          out.push_back(invalid(spec, 0));
          continue;
        }
        std::vector<std::size_t> rows;
        std::vector<double> labels;
        for (std::size_t i = 0; i < ds.size(); ++i) {
          if (const auto y = ds.label(*di, i)) {
            rows.push_back(i);
            labels.push_back(*y);
          }
        }
        report.n_evaluated = rows.size();
        if (spec.problem == ProblemClass::multiclass) {
          Matrix lp(rows.size(), p.cols());
          std::vector<std::size_t> classes;
          for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto src = p.row(rows[r]);
            std::copy(src.begin(), src.end(), lp.row(r).begin());
            classes.push_back(static_cast<std::size_t>(labels[r]));
          }
          report.raw = averaged_auroc(lp, classes);
        } else {
          std::vector<double> scores;
          for (auto r : rows) scores.push_back(p(r, 0));
          report.raw = spec.problem == ProblemClass::binary ? auroc(scores, labels)
                                                            : r_squared(scores, labels);
        }
      }
      report.normalized = normalize_score(report.metric, report.raw);
    } catch (const DomainError&) {
      // The evaluation data cannot support this metric.
      out.push_back(invalid(spec, report.n_evaluated));
      continue;
    }
    out.push_back(report);
  }
  return out;
}

std::string format_metrics_report(const std::vector<ScoreReport>& scores) {
  std::string out = "task,metric,raw,normalized,n\n";
  for (const auto& s : scores) {
    out += s.task + "," + std::string(to_string(s.metric)) + ",";
    if (s.valid) out += format_double(s.raw) + "," + format_double(s.normalized);
    else out += ",";
    out += "," + std::to_string(s.n_evaluated) + "\n";
  }
  return out;
}

}  // namespace m3h
