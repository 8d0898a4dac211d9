#include <gtest/gtest.h>

#include <cmath>

#include "m3h/dataset.hpp"
#include "m3h/error.hpp"
#include "m3h/synth.hpp"
#include "m3h/text_io.hpp"
#include "test_util.hpp"

using namespace m3h;

namespace {

SynthConfig two_binary(double rho, std::size_t patients, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_patients = patients;
  cfg.schemas = {{"tab", 6}, {"txt", 8}};
  cfg.tasks = {{"a", ProblemClass::binary}, {"b", ProblemClass::binary}};
  cfg.task_correlation = rho;
  cfg.seed = seed;
  return cfg;
}

double label_correlation(const Dataset& ds, std::size_t s, std::size_t t) {
  const double n = static_cast<double>(ds.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    ma += *ds.label(s, i);
    mb += *ds.label(t, i);
  }
  ma /= n;
  mb /= n;
  double cab = 0, caa = 0, cbb = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double a = *ds.label(s, i) - ma, b = *ds.label(t, i) - mb;
    cab += a * b;
    caa += a * a;
    cbb += b * b;
  }
  return cab / std::sqrt(caa * cbb);
}

}  // namespace

TEST(Synth, IndependentTasksAreUncorrelated) {
  const Dataset ds = synth_generate(two_binary(0.0, 2000, 3));
  EXPECT_LT(std::abs(label_correlation(ds, 0, 1)), 0.1);
}

TEST(Synth, PrevalenceIsHonoured) {
  SynthConfig cfg = two_binary(0.5, 2000, 4);
  cfg.prevalence["a"] = 0.3;
  const Dataset ds = synth_generate(cfg);
  const double rate = static_cast<double>(ds.positive_count(0)) / static_cast<double>(ds.size());
  EXPECT_GE(rate, 0.25);
  EXPECT_LE(rate, 0.35);
}

TEST(Synth, SameSeedGivesByteIdenticalFiles) {
  const auto a = fixture::scratch_dir("synth_a"), b = fixture::scratch_dir("synth_b");
  write_dataset(synth_generate(two_binary(0.4, 50, 11)), a);
  write_dataset(synth_generate(two_binary(0.4, 50, 11)), b);
  for (const char* f : {"manifest.json", "labels.csv", "tab.csv", "txt.csv"})
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  EXPECT_FALSE(synth_generate(two_binary(0.4, 50, 12)) == synth_generate(two_binary(0.4, 50, 11)));
}

TEST(Synth, SharedDirectionRaisesCorrelation) {
  double high = 0, low = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    high += label_correlation(synth_generate(two_binary(1.0, 400, seed)), 0, 1);
    low += label_correlation(synth_generate(two_binary(0.0, 400, seed)), 0, 1);
  }
  EXPECT_GT(high / 5, low / 5);
}

TEST(Synth, PatientsOwnTheirSamples) {
  SynthConfig cfg = two_binary(0.5, 20, 1);
  cfg.samples_per_patient = 3;
  const Dataset ds = synth_generate(cfg);
  EXPECT_EQ(ds.size(), 60u);
  EXPECT_EQ(ds.patients().size(), 20u);
  EXPECT_EQ(ds.patient_id(0), ds.patient_id(2));
  EXPECT_NE(ds.patient_id(2), ds.patient_id(3));
}

TEST(Synth, MixedClassesAndLatentClusters) {
  SynthConfig cfg;
  cfg.n_patients = 120;
  cfg.schemas = {{"m", 4}};
  TaskSpec mc{"mc", ProblemClass::multiclass};
  mc.num_classes = 4;
  TaskSpec clu{"clu", ProblemClass::cluster};
  clu.cluster_k = 3;
  cfg.tasks = {mc, {"r", ProblemClass::regression}, clu};
  cfg.latent_clusters = 3;
  cfg.seed = 2;
  const SynthOutput out = synth_generate_with_truth(cfg);
  ASSERT_EQ(out.latent_cluster.size(), out.data.size());
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    EXPECT_LT(out.latent_cluster[i], 3u);
    const double c = *out.data.label(0, i);
    EXPECT_TRUE(c >= 0 && c < 4 && c == std::floor(c));
    EXPECT_TRUE(out.data.label(1, i).has_value());
    EXPECT_FALSE(out.data.label(2, i).has_value());
  }
}

TEST(Synth, ConfigValidation) {
  SynthConfig cfg = two_binary(1.5, 10, 0);
  EXPECT_THROW(synth_generate(cfg), ConfigError);
  cfg = two_binary(0.5, 10, 0);
  cfg.prevalence["a"] = 1.0;
  EXPECT_THROW(synth_generate(cfg), ConfigError);
  cfg = two_binary(0.5, 10, 0);
  cfg.prevalence["zzz"] = 0.2;
  EXPECT_THROW(synth_generate(cfg), ConfigError);
}
