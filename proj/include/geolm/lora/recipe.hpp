#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "geolm/lora/sft.hpp"

namespace geolm::lora {

enum class RecipeMode { kSequential, kMixed };

struct StagePlan {
  std::vector<StageSpec> stages;
  RecipeMode mode = RecipeMode::kSequential;

  Json to_json() const;
  // Dataset paths are kept as written; see load_stage_datasets.
  static StagePlan from_json(const Json& j);
  static StagePlan load(const std::string& path);
};

// Reads every stage's dataset. Relative paths resolve against base_dir.
void load_stage_datasets(StagePlan& plan, const std::string& base_dir);

struct RecipeResult {
  AdapterSet<float> adapters;
  std::vector<StageResult> stages;
  std::map<std::string, std::size_t> provenance_counts;  // over all stages
};

// Called after each stage (once, for the merged stage in mixed mode). The
// returned JSON is stored in that stage's result.
using StageHook = std::function<Json(const StageResult&, const AdapterSet<float>&)>;

// Sequential mode runs the stages in order, each resuming from the previous
// stage's adapters unless it sets reinit. Mixed mode pools every stage's
// records (repeated by that stage's epochs), shuffles the pool with the first
// stage's seed and makes one pass using the first stage's lr, batch size and
// masking. A plan with no stages returns `initial` unchanged.
RecipeResult run_recipe(const lm::Checkpoint& base, const AdapterSet<float>& initial, const StagePlan& plan,
                        const StageHook& hook = {}, const EpochSink& on_epoch = {});

}  // namespace geolm::lora
