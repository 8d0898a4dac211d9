#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "m3h/model.hpp"
#include "m3h/synth.hpp"
#include "m3h/tim.hpp"
#include "m3h/trainer.hpp"

namespace m3h {

// Experiment description read from a JSON file; command-line flags override it.
//
//   {"seed": 7, "out": "runs/a", "data": "data/manifest.json",
//    "tasks": ["a", "b"],
//    "synth": {...}, "model": {...}, "train": {...},
//    "split": {"test_fraction": 0.2},
//    "cv": false,
//    "tim": {"mode": "pairwise", "n_samples": 256},
//    "select": {"source": "a", "beam": 3},
//    "boot": 1000,
//    "gradcheck": {"points": 10, "eps": 1e-5, "tolerance": 1e-4}}
//
// Relative paths in the file resolve against the file's directory.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> data;
  std::vector<std::string> tasks;
  SynthConfig synth;
  ModelConfig model;
  TrainConfig train;
  double test_fraction = 0.2;
  bool cv = false;
  TimMode tim_mode = TimMode::pairwise;
  std::size_t tim_samples = 256;
  std::optional<std::string> source;
  std::size_t beam = 3;
  std::size_t boot = 1000;
  std::size_t gradcheck_points = 10;
  double gradcheck_eps = 1e-5;
  double gradcheck_tolerance = 1e-4;
};

// Throws ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
SynthConfig synth_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
TaskSpec task_spec_from_json(const nlohmann::json& j);

// Exit codes: 0 success, 1 runtime or data errors, 2 usage or configuration errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace m3h
