#include "m3h/split.hpp"

#include <cmath>
#include <unordered_map>

#include "m3h/error.hpp"
#include "m3h/random.hpp"

namespace m3h {
namespace {

std::vector<std::string> shuffled_patients(const Dataset& ds, std::uint64_t seed) {
  auto patients = ds.patients();
  Rng rng(seed);
  rng.shuffle(patients);
  return patients;
}

IndexSplit partition(const Dataset& ds, const std::unordered_map<std::string, bool>& held_out) {
  IndexSplit out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (held_out.at(ds.patient_id(i))) {
      out.held_out.push_back(i);
    } else {
      out.train.push_back(i);
    }
  }
  return out;
}

}  // namespace

IndexSplit split_indices_by_patient(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DomainError("test_fraction must lie in (0, 1)");
  }
  const auto patients = shuffled_patients(ds, seed);
  if (patients.size() < 2) throw DomainError("patient split needs at least 2 patients");
  const auto p = static_cast<double>(patients.size());
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * p));
  n_test = std::clamp<std::size_t>(n_test, 1, patients.size() - 1);
  std::unordered_map<std::string, bool> held_out;
  for (std::size_t i = 0; i < patients.size(); ++i) held_out[patients[i]] = i < n_test;
  return partition(ds, held_out);
}

std::pair<Dataset, Dataset> split_by_patient(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed) {
  const auto split = split_indices_by_patient(ds, test_fraction, seed);
  return {ds.subset(split.train), ds.subset(split.held_out)};
}

std::vector<IndexSplit> kfold_indices_by_patient(const Dataset& ds, std::size_t k,
                                                 std::uint64_t seed) {
  if (k < 2) throw DomainError("k-fold needs k >= 2");
  const auto patients = shuffled_patients(ds, seed);
  if (patients.size() < k) {
    throw DomainError("k-fold with k=" + std::to_string(k) + " needs at least k patients, have " +
                      std::to_string(patients.size()));
  }
  std::unordered_map<std::string, std::size_t> fold_of;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t begin = f * patients.size() / k;
    const std::size_t end = (f + 1) * patients.size() / k;
    for (std::size_t i = begin; i < end; ++i) fold_of[patients[i]] = f;
  }
  std::vector<IndexSplit> folds(k);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::size_t f = fold_of.at(ds.patient_id(i));
    for (std::size_t g = 0; g < k; ++g) {
      if (g == f) {
        folds[g].held_out.push_back(i);
      } else {
        folds[g].train.push_back(i);
      }
    }
  }
  return folds;
}

std::vector<std::pair<Dataset, Dataset>> kfold_by_patient(const Dataset& ds, std::size_t k,
                                                          std::uint64_t seed) {
  std::vector<std::pair<Dataset, Dataset>> out;
  for (const auto& fold : kfold_indices_by_patient(ds, k, seed))
    out.emplace_back(ds.subset(fold.train), ds.subset(fold.held_out));
  return out;
}

}  // namespace m3h
