#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "m3h/dataset.hpp"

namespace m3h {

// Synthetic cohort: every patient owns a latent factor vector, modalities are
// noisy linear views of it, and supervised labels come from task directions
// whose pairwise cosine equals task_correlation.
struct SynthConfig {
  std::size_t n_patients = 200;
  std::size_t samples_per_patient = 1;
  std::vector<ModalitySchema> schemas;
  std::vector<TaskSpec> tasks;
  std::size_t latent_dim = 8;
  double task_correlation = 0.5;              // rho in [0, 1]
  std::map<std::string, double> prevalence;   // binary tasks; default 0.5
  double noise_scale = 0.5;                   // modality noise std
  double label_noise = 0.5;                   // noise on task scores before labelling
  double sample_jitter = 0.2;                 // within-patient latent noise std
  std::size_t latent_clusters = 0;            // > 0: latents drawn around this many centres
  double cluster_separation = 6.0;            // centre std relative to unit blob spread
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

struct SynthOutput {
  Dataset data;
  // Index of the latent centre behind each sample (all zero when latent_clusters == 0).
  std::vector<std::size_t> latent_cluster;
};

SynthOutput synth_generate_with_truth(const SynthConfig& cfg);
Dataset synth_generate(const SynthConfig& cfg);

}  // namespace m3h
