#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m3h/dataset.hpp"
#include "m3h/kmeans.hpp"
#include "m3h/metrics.hpp"
#include "m3h/model.hpp"

namespace m3h {

// Scores every model task on `ds` with its class metric. Supervised tasks use
// only labelled samples. The cluster task runs k-means (k = cluster_k) on the
// autoencoder latents and reports their silhouette. A task the data cannot
// support (single class, zero variance, too few samples) gets valid = false.
std::vector<ScoreReport> evaluate_model(const Model& model, const Dataset& ds, std::uint64_t seed,
                                        const KMeansOptions& kmeans_options = {});

// One line per task: task,metric,raw,normalized,n. Invalid scores leave raw
// and normalized empty.
std::string format_metrics_report(const std::vector<ScoreReport>& scores);

}  // namespace m3h
