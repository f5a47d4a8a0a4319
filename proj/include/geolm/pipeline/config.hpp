#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geolm/common/io.hpp"
#include "geolm/lm/params.hpp"
#include "geolm/lm/train.hpp"
#include "geolm/lora/adapter.hpp"
#include "geolm/lora/sft.hpp"

namespace geolm::pipeline {

struct Paths {
  std::string raw_corpus;
  std::string rules;
  std::string signals;
  std::string templates;  // empty: built-in templates
  std::string sampling_plan;
  std::string general_instructions;
  std::string objective_bench;
  std::string subjective_bench;
  std::string output_root;
};

struct Seeds {
  std::uint64_t templates = 0;
  std::uint64_t sampling = 0;
  std::uint64_t init = 0;
  std::uint64_t pretrain = 0;
  std::uint64_t lora = 0;
  std::uint64_t tune = 0;
};

// Settings shared by a tuning stage in every arm; the dataset comes from the
// pipeline (general instructions or the forged signal set).
struct TuneStageSettings {
  int epochs = 1;
  double lr = 1e-3;
  int batch_size = 8;
  lora::LossMasking masking = lora::LossMasking::kOutputOnly;
};

struct TuneSettings {
  lora::LoraConfig lora;
  TuneStageSettings general;
  TuneStageSettings expert;
};

struct EvalSettings {
  int max_new = 48;
};

struct Versions {
  std::string prompt = "v1";
  std::string templates = "v1";
  std::string format = "TLM1";
  std::string sft_layout = "sft-v1";
};

struct PipelineConfig {
  std::string config_dir;  // relative paths resolve against this
  Paths paths;             // already resolved to absolute form
  Seeds seeds;
  lm::ModelConfig model;
  lm::TrainSchedule pretrain;
  TuneSettings tune;
  EvalSettings eval;
  Versions versions;
  Json raw;  // the parsed file, for hashing

  // Throws kInvalidArgument on a structurally bad config (missing seeds,
  // wrong types). Path existence is checked by validate().
  static PipelineConfig from_json(const Json& j, const std::string& config_dir);
  static PipelineConfig load(const std::string& path);
};

// The four tuning arms, in the order they are trained.
inline const std::vector<std::string>& arm_names() {
  static const std::vector<std::string> names = {"stage1_only", "stage2_only", "stage1_then_stage2", "mixed"};
  return names;
}

}  // namespace geolm::pipeline
