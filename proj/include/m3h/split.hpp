#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "m3h/dataset.hpp"

namespace m3h {

inline constexpr double kDefaultTestFraction = 0.20;
inline constexpr std::size_t kDefaultFolds = 5;

// Sample indices on each side of a patient-grouped split.
struct IndexSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> held_out;
};

// Grouped shuffle: all samples of a patient land on one side. The held-out
// side gets round(test_fraction * patients) patients, clamped to [1, P-1].
IndexSplit split_indices_by_patient(const Dataset& ds, double test_fraction, std::uint64_t seed);
std::pair<Dataset, Dataset> split_by_patient(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed);

// k patient-disjoint validation folds; entry f trains on the other k-1 folds.
std::vector<IndexSplit> kfold_indices_by_patient(const Dataset& ds, std::size_t k,
                                                 std::uint64_t seed);
std::vector<std::pair<Dataset, Dataset>> kfold_by_patient(const Dataset& ds, std::size_t k,
                                                          std::uint64_t seed);

}  // namespace m3h
