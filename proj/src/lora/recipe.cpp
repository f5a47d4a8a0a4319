#include "geolm/lora/recipe.hpp"

#include <filesystem>

#include "geolm/common/error.hpp"

namespace geolm::lora {

Json StagePlan::to_json() const {
  Json stages_json = Json::array();
  for (const auto& s : stages) stages_json.push_back(s.to_json());
  return Json{{"mode", mode == RecipeMode::kMixed ? "mixed" : "sequential"}, {"stages", stages_json}};
}

StagePlan StagePlan::from_json(const Json& j) {
  StagePlan p;
  const std::string mode = j.value("mode", std::string("sequential"));
  if (mode == "sequential") {
    p.mode = RecipeMode::kSequential;
  } else if (mode == "mixed") {
    p.mode = RecipeMode::kMixed;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown recipe mode '" + mode + "'");
  }
  if (j.contains("stages")) {
    for (const auto& s : j.at("stages")) p.stages.push_back(StageSpec::from_json(s));
  }
  return p;
}

StagePlan StagePlan::load(const std::string& path) {
  StagePlan p = from_json(Json::parse(read_file(path)));
  load_stage_datasets(p, std::filesystem::path(path).parent_path().string());
  return p;
}

void load_stage_datasets(StagePlan& plan, const std::string& base_dir) {
  for (auto& s : plan.stages) {
    std::filesystem::path p(s.dataset);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    s.records = load_instruction_records(p.string());
  }
}

namespace {

void add_counts(std::map<std::string, std::size_t>& into, const std::map<std::string, std::size_t>& from) {
  for (const auto& [k, v] : from) into[k] += v;
}

}  // namespace

RecipeResult run_recipe(const lm::Checkpoint& base, const AdapterSet<float>& initial, const StagePlan& plan,
                        const StageHook& hook, const EpochSink& on_epoch) {
  RecipeResult result{initial, {}, {}};
  if (plan.stages.empty()) return result;

  if (plan.mode == RecipeMode::kSequential) {
    for (const auto& stage : plan.stages) {
      if (stage.reinit) result.adapters = attach(base, result.adapters.config);
      StageResult sr = tune_stage(base, result.adapters, stage, on_epoch);
      if (hook) sr.eval = hook(sr, result.adapters);
      add_counts(result.provenance_counts, sr.provenance_counts);
      result.stages.push_back(std::move(sr));
    }
    return result;
  }

  const StageSpec& first = plan.stages.front();
  StageSpec merged = first;
  merged.epochs = 1;
  merged.records.clear();
  for (const auto& s : plan.stages) {
    for (int e = 0; e < s.epochs; ++e) merged.records.insert(merged.records.end(), s.records.begin(), s.records.end());
  }
  merged.name = "mixed";
  StageResult sr = tune_stage(base, result.adapters, merged, on_epoch);
  if (hook) sr.eval = hook(sr, result.adapters);
  add_counts(result.provenance_counts, sr.provenance_counts);
  result.stages.push_back(std::move(sr));
  return result;
}

}  // namespace geolm::lora
