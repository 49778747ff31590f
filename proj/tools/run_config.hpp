#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "anfm/datasets.hpp"
#include "anfm/filtration.hpp"
#include "anfm/finetune.hpp"
#include "anfm/model.hpp"
#include "anfm/training.hpp"

namespace anfm::cli {

struct EvalConfig {
  int samples = 256;
  int fixed_nodes = 0;  // 0 draws node counts from the training graphs
  SampleMode mode = SampleMode::kStochastic;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int threads = 0;
  DatasetSpec dataset;
  FiltrationConfig filtration;
  ModelConfig model;
  TrainConfig train;
  PPOConfig finetune;
  EvalConfig eval;

  // Propagates the global seed into the sections.
  void apply_seed(std::uint64_t s);
  void validate() const;
};

// Unknown keys and wrongly typed values raise ConfigError naming the key.
RunConfig parse_run_config(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace anfm::cli
