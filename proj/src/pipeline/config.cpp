#include "geolm/pipeline/config.hpp"

#include <filesystem>

#include "geolm/common/error.hpp"

namespace geolm::pipeline {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& dir, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_relative()) path = fs::path(dir) / path;
  return path.lexically_normal().string();
}

std::uint64_t required_seed(const Json& seeds, const char* name) {
  if (!seeds.contains(name)) throw Error(ErrorCode::kInvalidArgument, std::string("seeds.") + name + " is required");
  return seeds.at(name).get<std::uint64_t>();
}

TuneStageSettings stage_settings(const Json& j) {
  TuneStageSettings s;
  s.epochs = j.value("epochs", s.epochs);
  s.lr = j.value("lr", s.lr);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.masking = lora::parse_loss_masking(j.value("loss_masking", std::string("output_only")));
  if (s.epochs < 0 || s.batch_size <= 0 || !(s.lr > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tune stage needs epochs >= 0, batch_size > 0, lr > 0");
  }
  return s;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const Json& j, const std::string& config_dir) {
  PipelineConfig c;
  c.config_dir = config_dir;
  c.raw = j;
  try {
    const Json& p = j.at("paths");
    auto get = [&](const char* key, bool required) {
      if (!p.contains(key) || p.at(key).is_null()) {
        if (required) throw Error(ErrorCode::kInvalidArgument, std::string("paths.") + key + " is required");
        return std::string();
      }
      return resolve(config_dir, p.at(key).get<std::string>());
    };
    c.paths.raw_corpus = get("raw_corpus", true);
    c.paths.rules = get("rules", true);
    c.paths.signals = get("signals", true);
    c.paths.templates = get("templates", false);
    c.paths.sampling_plan = get("sampling_plan", true);
    c.paths.general_instructions = get("general_instructions", true);
    c.paths.objective_bench = get("objective_bench", true);
    c.paths.subjective_bench = get("subjective_bench", true);
    c.paths.output_root = get("output_root", true);

    if (!j.contains("seeds")) throw Error(ErrorCode::kInvalidArgument, "seeds section is required");
    const Json& s = j.at("seeds");
    c.seeds.templates = required_seed(s, "templates");
    c.seeds.sampling = required_seed(s, "sampling");
    c.seeds.init = required_seed(s, "init");
    c.seeds.pretrain = required_seed(s, "pretrain");
    c.seeds.lora = required_seed(s, "lora");
    c.seeds.tune = required_seed(s, "tune");

    c.model = lm::ModelConfig::from_json(j.value("model", Json::object()));
    Json sched = j.value("pretrain", Json::object());
    sched["seed"] = c.seeds.pretrain;
    c.pretrain = lm::TrainSchedule::from_json(sched);

    const Json tune = j.value("tune", Json::object());
    c.tune.lora = lora::LoraConfig::from_json(tune.value("lora", Json::object()));
    c.tune.lora.seed = c.seeds.lora;
    c.tune.general = stage_settings(tune.value("general", Json::object()));
    c.tune.expert = stage_settings(tune.value("expert", Json::object()));

    const Json ev = j.value("eval", Json::object());
    c.eval.max_new = ev.value("max_new", c.eval.max_new);

    const Json v = j.value("versions", Json::object());
    c.versions.prompt = v.value("prompt", c.versions.prompt);
    c.versions.templates = v.value("templates", c.versions.templates);
    c.versions.format = v.value("format", c.versions.format);
    c.versions.sft_layout = v.value("sft_layout", c.versions.sft_layout);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
  return from_json(j, fs::absolute(fs::path(path)).parent_path().string());
}

}  // namespace geolm::pipeline
