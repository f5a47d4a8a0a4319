#include "geolm/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "geolm/common/error.hpp"
#include "geolm/common/hash.hpp"
#include "geolm/doc/normalize.hpp"
#include "geolm/eval/bench.hpp"
#include "geolm/eval/metrics.hpp"
#include "geolm/eval/scorer.hpp"
#include "geolm/lm/checkpoint.hpp"
#include "geolm/lm/tokenizer.hpp"
#include "geolm/lm/train.hpp"
#include "geolm/lora/recipe.hpp"
#include "geolm/signal/restructure.hpp"
#include "geolm/signal/sampling.hpp"
#include "geolm/signal/templates.hpp"

namespace geolm::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kCorpusJsonl = "corpus.jsonl";
constexpr std::string_view kCorpusText = "corpus.txt";
constexpr std::string_view kCorpusStats = "corpus_stats.json";
constexpr std::string_view kGeoSignal = "geosignal.jsonl";
constexpr std::string_view kRejects = "rejects.jsonl";
constexpr std::string_view kDatasetStats = "dataset_stats.json";
constexpr std::string_view kCheckpointIndex = "checkpoints/index.json";
constexpr std::string_view kLossLog = "checkpoints/loss.csv";
constexpr std::string_view kTuneSummary = "adapters/summary.json";
constexpr std::string_view kCurveCsv = "eval/curve.csv";
constexpr std::string_view kCurveJson = "eval/curve.json";
constexpr std::string_view kAblationJson = "eval/ablation.json";
constexpr std::string_view kReportJson = "report.json";

std::string dump(const Json& j) { return j.dump(2, ' ', false, Json::error_handler_t::replace) + "\n"; }

std::string checkpoint_name(std::uint64_t step) {
  std::ostringstream os;
  os << "checkpoints/step_" << std::setw(6) << std::setfill('0') << step << ".tlm";
  return os.str();
}

std::string final_adapter_name(const std::string& arm) { return "adapters/" + arm + "/final.tla"; }

// Writes stage outputs under the output root and remembers their hashes.
class OutputSet {
 public:
  explicit OutputSet(std::string root) : root_(std::move(root)) {}

  void write(std::string_view rel, std::string_view contents) {
    write_file_atomic(path(rel), contents);
    hashes_[std::string(rel)] = sha256_hex(contents);
  }

  std::string path(std::string_view rel) const { return (fs::path(root_) / std::string(rel)).string(); }
  const std::map<std::string, std::string>& hashes() const { return hashes_; }

 private:
  std::string root_;
  std::map<std::string, std::string> hashes_;
};

// Hash of a stage's parameters plus the content of each input file.
class InputHasher {
 public:
  InputHasher(Stage stage, const std::string& root) : root_(root) {
    buf_ << "stage=" << to_string(stage) << '\n';
  }

  void param(std::string_view key, const Json& value) { buf_ << key << '=' << value.dump() << '\n'; }

  // Absolute input file; must exist.
  void file(std::string_view key, const std::string& path) {
    if (!fs::is_regular_file(path)) throw Error(ErrorCode::kIo, "missing input " + path);
    buf_ << key << '=' << sha256_file(path) << '\n';
  }

  // Upstream output, relative to the output root.
  void output(std::string_view rel) { file(rel, (fs::path(root_) / std::string(rel)).string()); }

  std::string finish() const { return sha256_hex(buf_.str()); }

 private:
  std::string root_;
  std::ostringstream buf_;
};

Json read_json(const std::string& path) { return Json::parse(read_file(path)); }

struct CheckpointEntry {
  std::uint64_t step;
  std::string file;
};

std::vector<CheckpointEntry> read_checkpoint_index(const std::string& root) {
  const std::string p = (fs::path(root) / std::string(kCheckpointIndex)).string();
  if (!fs::exists(p)) throw Error(ErrorCode::kIo, "no pretraining checkpoints at " + p);
  std::vector<CheckpointEntry> out;
  const Json index = read_json(p);
  for (const auto& e : index.at("checkpoints")) {
    out.push_back({e.at("step").get<std::uint64_t>(), e.at("file").get<std::string>()});
  }
  if (out.empty()) throw Error(ErrorCode::kIo, "checkpoint index is empty");
  return out;
}

signal::TemplateSet load_templates(const PipelineConfig& cfg) {
  signal::TemplateSet t =
      cfg.paths.templates.empty() ? signal::TemplateSet::builtin(cfg.seeds.templates) : signal::TemplateSet::load(cfg.paths.templates);
  t.set_seed(cfg.seeds.templates);
  t.validate();
  return t;
}

std::vector<signal::SourceRecord> load_sources(const std::string& path) {
  std::vector<signal::SourceRecord> out;
  for_each_jsonl(path, [&](std::size_t line, const Json& j) {
    try {
      out.push_back(signal::source_record_from_json(j));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kFormat, path + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

signal::SamplingPlan load_plan(const PipelineConfig& cfg) {
  signal::SamplingPlan plan = signal::SamplingPlan::load(cfg.paths.sampling_plan);
  plan.seed = cfg.seeds.sampling;
  return plan;
}

// --- stages ---------------------------------------------------------------

void run_ingest(const PipelineConfig& cfg, OutputSet& out) {
  const auto rules = doc::load_rules(cfg.paths.rules);
  std::vector<Json> rows;
  std::string text;
  doc::CorpusStats stats;
  bool first = true;
  for_each_jsonl(cfg.paths.raw_corpus, [&](std::size_t line, const Json& j) {
    doc::RawDocument raw;
    try {
      raw = doc::raw_document_from_json(j);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kFormat, cfg.paths.raw_corpus + ":" + std::to_string(line) + ": " + e.what());
    }
    const auto norm = doc::normalize_document(raw, rules);
    stats.add(norm);
    rows.push_back(doc::normalized_to_json(norm));
    if (norm.text.empty()) return;
    if (!first) text += doc::kCorpusSeparator;
    text += norm.text;
    first = false;
  });
  out.write(kCorpusJsonl, to_jsonl(rows));
  out.write(kCorpusText, text);
  out.write(kCorpusStats, dump(stats.to_json()));
}

void run_forge(const PipelineConfig& cfg, OutputSet& out) {
  const auto templates = load_templates(cfg);
  const auto forged = signal::forge(load_sources(cfg.paths.signals), templates);
  const auto dataset = signal::sample_and_clean(forged.records, load_plan(cfg));
  std::vector<Json> rows;
  for (const auto& r : dataset.records) rows.push_back(signal::instruction_to_json(r));
  std::vector<Json> rejects;
  for (const auto& r : forged.rejects) rejects.push_back(signal::reject_to_json(r));
  Json stats = dataset.stats_json();
  stats["forged"] = forged.records.size();
  stats["rejected"] = forged.rejects.size();
  stats["template_version"] = templates.version();
  out.write(kGeoSignal, to_jsonl(rows));
  out.write(kRejects, to_jsonl(rejects));
  out.write(kDatasetStats, dump(stats));
}

void run_pretrain(const PipelineConfig& cfg, OutputSet& out, std::ostream* log) {
  const std::string corpus = read_file(out.path(kCorpusText));
  const auto stream = lm::ByteTokenizer::encode(corpus);
  const auto docs = lm::documents_from_stream(stream, cfg.model.context_len);
  lm::Checkpoint start = lm::init_checkpoint(cfg.model, cfg.seeds.init);
  Json index = Json::array();
  auto save = [&](const lm::Checkpoint& c) {
    const std::string rel = checkpoint_name(c.step);
    out.write(rel, lm::serialize_checkpoint(c));
    index.push_back({{"step", c.step}, {"file", rel}});
    if (log) *log << "  checkpoint " << rel << "\n";
  };
  save(start);
  const auto result = lm::train(start, docs, cfg.pretrain, save);
  out.write(kLossLog, lm::loss_log_csv(result.log));
  out.write(kCheckpointIndex, dump(Json{{"checkpoints", index}}));
}

lora::StageSpec make_stage(const std::string& name, const TuneStageSettings& s, std::uint64_t seed,
                           std::vector<signal::InstructionRecord> records) {
  lora::StageSpec spec;
  spec.name = name;
  spec.epochs = s.epochs;
  spec.lr = s.lr;
  spec.batch_size = s.batch_size;
  spec.masking = s.masking;
  spec.seed = seed;
  spec.records = std::move(records);
  return spec;
}

lora::StagePlan arm_plan(const std::string& arm, const lora::StageSpec& general, const lora::StageSpec& expert) {
  lora::StagePlan plan;
  if (arm == "stage1_only") {
    plan.stages = {general};
  } else if (arm == "stage2_only") {
    plan.stages = {expert};
  } else if (arm == "stage1_then_stage2") {
    plan.stages = {general, expert};
  } else {
    plan.stages = {general, expert};
    plan.mode = lora::RecipeMode::kMixed;
  }
  return plan;
}

std::string counts_digest(const std::map<std::string, std::size_t>& counts) {
  std::string buf;
  for (const auto& [k, v] : counts) buf += k + "=" + std::to_string(v) + "\n";
  return sha256_hex(buf);
}

void run_tune(const PipelineConfig& cfg, OutputSet& out, std::ostream* log) {
  const auto index = read_checkpoint_index(out.path(""));
  const lm::Checkpoint base = lm::load_checkpoint(out.path(index.back().file));
  const auto general = make_stage("general", cfg.tune.general, cfg.seeds.tune,
                                  lora::load_instruction_records(cfg.paths.general_instructions));
  const auto expert =
      make_stage("expert", cfg.tune.expert, cfg.seeds.tune, lora::load_instruction_records(out.path(kGeoSignal)));
  const auto initial = lora::attach(base, cfg.tune.lora);

  Json summary = Json::object();
  for (const auto& arm : arm_names()) {
    if (log) *log << "  arm " << arm << "\n";
    const auto plan = arm_plan(arm, general, expert);
    auto on_epoch = [&](const std::string& stage, int epoch, const lora::AdapterSet<float>& a) {
      out.write("adapters/" + arm + "/" + stage + "_epoch" + std::to_string(epoch) + ".tla", lora::serialize_adapters(a));
    };
    const auto result = lora::run_recipe(base, initial, plan, {}, on_epoch);
    out.write(final_adapter_name(arm), lora::serialize_adapters(result.adapters));
    std::vector<lm::StepLog> merged;
    Json stages = Json::array();
    for (const auto& sr : result.stages) {
      stages.push_back({{"name", sr.name},
                        {"steps", sr.steps},
                        {"final_loss", sr.log.empty() ? Json(nullptr) : Json(sr.log.back().loss)}});
      for (auto row : sr.log) {
        row.step = merged.size() + 1;
        merged.push_back(row);
      }
    }
    out.write("adapters/" + arm + "/loss.csv", lm::loss_log_csv(merged));
    std::size_t touched = 0;
    for (const auto& [k, v] : result.provenance_counts) touched += v;
    summary[arm] = {{"mode", plan.mode == lora::RecipeMode::kMixed ? "mixed" : "sequential"},
                    {"stages", stages},
                    {"records_touched", touched},
                    {"provenance_digest", counts_digest(result.provenance_counts)},
                    {"trainable_parameters", result.adapters.parameter_count()}};
  }
  out.write(kTuneSummary, dump(summary));
}

Json subset_scores_json(const std::map<std::string, eval::SubsetScore>& subsets) {
  Json j = Json::object();
  for (const auto& [k, s] : subsets) j[k] = s.accuracy();
  return j;
}

void run_eval(const PipelineConfig& cfg, OutputSet& out, std::ostream* log) {
  const auto items = eval::load_objective(cfg.paths.objective_bench);
  const auto subjective = eval::load_subjective(cfg.paths.subjective_bench);
  const auto index = read_checkpoint_index(out.path(""));
  if (index.size() < 2) throw Error(ErrorCode::kInvalidArgument, "curve needs at least two checkpoints");

  std::vector<std::unique_ptr<eval::LocalScorer>> curve_scorers;
  std::vector<eval::CurveInput> inputs;
  for (const auto& e : index) {
    curve_scorers.push_back(std::make_unique<eval::LocalScorer>(lm::load_checkpoint(out.path(e.file)), std::nullopt,
                                                                "checkpoint:" + std::to_string(e.step)));
    inputs.push_back({e.step, curve_scorers.back().get()});
  }
  if (log) *log << "  curve over " << inputs.size() << " checkpoints\n";
  const auto curve = eval::checkpoint_curve(inputs, items);
  out.write(kCurveCsv, curve.to_csv());
  out.write(kCurveJson, dump(curve.to_json()));

  const lm::Checkpoint& base = curve_scorers.back()->checkpoint();
  eval::LocalScorer base_scorer(base, std::nullopt, "base");
  std::map<std::string, std::unique_ptr<eval::LocalScorer>> arm_scorers;
  for (const auto& arm : arm_names()) {
    const std::string p = out.path(final_adapter_name(arm));
    if (!fs::exists(p)) throw Error(ErrorCode::kIo, "missing adapters " + p);
    arm_scorers[arm] = std::make_unique<eval::LocalScorer>(base, lora::load_adapters(p), arm);
  }
  std::map<std::string, eval::Scorer*> arms{{"base", &base_scorer}};
  for (auto& [name, s] : arm_scorers) arms[name] = s.get();
  if (log) *log << "  ablation over " << arms.size() << " arms\n";
  const auto ablation = eval::ablation_matrix(arms, items);
  out.write(kAblationJson, dump(ablation.to_json()));

  auto& final_scorer = *arm_scorers.at("stage1_then_stage2");
  Json meta{{"checkpoint_step", base.step}, {"adapters", "stage1_then_stage2"}, {"seed", cfg.seeds.tune}};
  auto final_report = eval::accuracy(final_scorer, items, meta);
  if (log) *log << "  subjective items: " << subjective.size() << "\n";
  for (const auto& item : subjective) {
    final_report.subjective.push_back(eval::evaluate_subjective(final_scorer, base_scorer, item, cfg.eval.max_new));
  }

  const double step0 = curve.points.front().overall.accuracy();
  const double pretrained = curve.points.back().overall.accuracy();
  const double tuned = final_report.overall.accuracy();
  Json curve_rows = Json::array();
  for (const auto& p : curve.points) {
    curve_rows.push_back({{"step", p.step}, {"accuracy", p.overall.accuracy()}, {"subsets", subset_scores_json(p.subsets)}});
  }
  Json report{{"versions", {{"prompt", cfg.versions.prompt},
                            {"templates", cfg.versions.templates},
                            {"format", cfg.versions.format},
                            {"sft_layout", cfg.versions.sft_layout}}},
              {"items", items.size()},
              {"step0_accuracy", step0},
              {"pretrained_accuracy", pretrained},
              {"final_accuracy", tuned},
              {"accuracy_gain", tuned - step0},
              {"curve", curve_rows},
              {"ablation", ablation.to_json()},
              {"final", final_report.to_json()},
              {"human_eval", {{"scale", {1, 3}},
                              {"criteria", {"rationality", "correctness", "consistency"}},
                              {"entries", Json::array()}}}};
  out.write(kReportJson, dump(report));
}

void compute_inputs(const PipelineConfig& cfg, Stage stage, InputHasher& h) {
  switch (stage) {
    case Stage::kIngest:
      h.file("raw_corpus", cfg.paths.raw_corpus);
      h.file("rules", cfg.paths.rules);
      h.param("format", cfg.versions.format);
      break;
    case Stage::kForge:
      h.file("signals", cfg.paths.signals);
      if (!cfg.paths.templates.empty()) h.file("templates", cfg.paths.templates);
      h.file("sampling_plan", cfg.paths.sampling_plan);
      h.param("seed_templates", cfg.seeds.templates);
      h.param("seed_sampling", cfg.seeds.sampling);
      h.param("template_version", cfg.versions.templates);
      break;
    case Stage::kPretrain:
      h.output(kCorpusText);
      h.param("model", cfg.model.to_json());
      h.param("schedule", cfg.pretrain.to_json());
      h.param("seed_init", cfg.seeds.init);
      break;
    case Stage::kTune: {
      const auto index = read_checkpoint_index(fs::path(cfg.paths.output_root).string());
      h.output(index.back().file);
      h.output(kGeoSignal);
      h.file("general_instructions", cfg.paths.general_instructions);
      h.param("lora", cfg.tune.lora.to_json());
      for (const auto* s : {&cfg.tune.general, &cfg.tune.expert}) {
        h.param("stage", Json{{"epochs", s->epochs}, {"lr", s->lr}, {"batch", s->batch_size},
                              {"masking", std::string(lora::to_string(s->masking))}});
      }
      h.param("seed_tune", cfg.seeds.tune);
      h.param("sft_layout", cfg.versions.sft_layout);
      break;
    }
    case Stage::kEval: {
      for (const auto& e : read_checkpoint_index(cfg.paths.output_root)) h.output(e.file);
      for (const auto& arm : arm_names()) h.output(final_adapter_name(arm));
      h.file("objective_bench", cfg.paths.objective_bench);
      h.file("subjective_bench", cfg.paths.subjective_bench);
      h.param("max_new", cfg.eval.max_new);
      h.param("prompt_version", cfg.versions.prompt);
      break;
    }
  }
}

bool outputs_intact(const std::string& root, const StageRecord& rec) {
  if (rec.outputs.empty()) return false;
  for (const auto& [rel, sha] : rec.outputs) {
    const auto p = fs::path(root) / rel;
    if (!fs::is_regular_file(p) || sha256_file(p.string()) != sha) return false;
  }
  return true;
}

std::string config_hash(const PipelineConfig& cfg) {
  Json j = cfg.raw;
  if (j.contains("paths")) j["paths"].erase("output_root");
  return sha256_hex(j.dump());
}

void write_manifest(const std::string& root, const RunManifest& m) {
  write_file_atomic((fs::path(root) / std::string(kManifestName)).string(), dump(m.to_json()));
}

}  // namespace

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> s = {Stage::kIngest, Stage::kForge, Stage::kPretrain, Stage::kTune, Stage::kEval};
  return s;
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kIngest: return "ingest";
    case Stage::kForge: return "forge";
    case Stage::kPretrain: return "pretrain";
    case Stage::kTune: return "tune";
    case Stage::kEval: return "eval";
  }
  return "";
}

Stage parse_stage(std::string_view s) {
  for (Stage st : all_stages()) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown stage '" + std::string(s) + "'");
}

Json ValidationReport::to_json() const { return Json{{"ok", ok()}, {"errors", errors}, {"warnings", warnings}}; }

ValidationReport validate(const PipelineConfig& cfg) {
  ValidationReport rep;
  auto need_file = [&](const char* key, const std::string& path) {
    if (path.empty()) return false;
    if (!fs::is_regular_file(path)) {
      rep.errors.push_back(std::string(key) + ": missing file " + path);
      return false;
    }
    return true;
  };
  auto attempt = [&](const char* what, const auto& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      rep.errors.push_back(std::string(what) + ": " + e.what());
    }
  };

  if (need_file("paths.raw_corpus", cfg.paths.raw_corpus)) {
    attempt("paths.raw_corpus", [&] {
      for_each_jsonl(cfg.paths.raw_corpus, [](std::size_t, const Json& j) { doc::raw_document_from_json(j); });
    });
  }
  if (need_file("paths.rules", cfg.paths.rules)) attempt("paths.rules", [&] { doc::load_rules(cfg.paths.rules); });
  if (!cfg.paths.templates.empty() && need_file("paths.templates", cfg.paths.templates)) {
    attempt("paths.templates", [&] { load_templates(cfg); });
  }
  if (need_file("paths.general_instructions", cfg.paths.general_instructions)) {
    attempt("paths.general_instructions", [&] {
      if (lora::load_instruction_records(cfg.paths.general_instructions).empty()) {
        throw Error(ErrorCode::kEmptyDataset, "no records");
      }
    });
  }
  if (need_file("paths.objective_bench", cfg.paths.objective_bench)) {
    attempt("paths.objective_bench", [&] {
      if (eval::load_objective(cfg.paths.objective_bench).empty()) throw Error(ErrorCode::kEmptyDataset, "no items");
    });
  }
  if (need_file("paths.subjective_bench", cfg.paths.subjective_bench)) {
    attempt("paths.subjective_bench", [&] { eval::load_subjective(cfg.paths.subjective_bench); });
  }
  const bool have_signals = need_file("paths.signals", cfg.paths.signals);
  const bool have_plan = need_file("paths.sampling_plan", cfg.paths.sampling_plan);
  if (have_signals && have_plan) {
    attempt("paths.signals", [&] {
      const auto forged = signal::forge(load_sources(cfg.paths.signals), load_templates(cfg));
      const auto plan = load_plan(cfg);
      const auto ds = signal::sample_and_clean(forged.records, plan);
      for (const auto& s : ds.stats) {
        if (s.shortfall > 0) {
          rep.warnings.push_back("sampling plan: task " + std::string(signal::to_string(s.task)) + " targets " +
                                 std::to_string(s.target) + " but only " + std::to_string(s.available) +
                                 " records are available (shortfall " + std::to_string(s.shortfall) + ")");
        }
      }
    });
  }
  attempt("tune.lora", [&] { lora::validate_config(cfg.tune.lora, cfg.model); });
  if (cfg.pretrain.checkpoint_steps().empty()) rep.errors.push_back("pretrain: total_steps must be positive");
  return rep;
}

Json RunManifest::to_json() const {
  Json stages_json = Json::object();
  for (Stage s : all_stages()) {
    auto it = stages.find(std::string(to_string(s)));
    if (it == stages.end()) continue;
    Json outputs = Json::object();
    for (const auto& [k, v] : it->second.outputs) outputs[k] = v;
    stages_json[it->first] = {{"input_hash", it->second.input_hash},
                              {"outputs", outputs},
                              {"seconds", it->second.seconds},
                              {"skipped", it->second.skipped}};
  }
  return Json{{"versions", versions}, {"config_hash", config_hash}, {"digest", digest()}, {"stages", stages_json}};
}

RunManifest RunManifest::from_json(const Json& j) {
  RunManifest m;
  m.versions = j.value("versions", Json::object());
  m.config_hash = j.value("config_hash", std::string());
  const Json stages = j.value("stages", Json::object());
  for (const auto& [name, s] : stages.items()) {
    StageRecord r;
    r.input_hash = s.value("input_hash", std::string());
    const Json outputs = s.value("outputs", Json::object());
    for (const auto& [k, v] : outputs.items()) r.outputs[k] = v.get<std::string>();
    r.seconds = s.value("seconds", 0.0);
    r.skipped = s.value("skipped", false);
    m.stages[name] = std::move(r);
  }
  return m;
}

std::string RunManifest::digest() const {
  std::ostringstream os;
  os << versions.dump() << '\n' << config_hash << '\n';
  for (const auto& [name, r] : stages) {
    os << name << ' ' << r.input_hash << '\n';
    for (const auto& [k, v] : r.outputs) os << "  " << k << ' ' << v << '\n';
  }
  return sha256_hex(os.str());
}

RunManifest load_manifest(const std::string& output_root) {
  const auto p = fs::path(output_root) / std::string(kManifestName);
  return RunManifest::from_json(read_json(p.string()));
}

RunManifest run(const PipelineConfig& cfg, const std::vector<Stage>& stages, std::ostream* log) {
  const std::string& root = cfg.paths.output_root;
  RunManifest manifest;
  if (fs::exists(fs::path(root) / std::string(kManifestName))) {
    try {
      manifest = load_manifest(root);
    } catch (const std::exception&) {
      manifest = RunManifest{};
    }
  }
  const std::string chash = config_hash(cfg);
  manifest.versions = Json{{"prompt", cfg.versions.prompt},
                           {"templates", cfg.versions.templates},
                           {"format", cfg.versions.format},
                           {"sft_layout", cfg.versions.sft_layout}};
  manifest.config_hash = chash;

  for (Stage stage : all_stages()) {
    if (std::find(stages.begin(), stages.end(), stage) == stages.end()) continue;
    const std::string name(to_string(stage));
    const auto t0 = std::chrono::steady_clock::now();
    try {
      InputHasher hasher(stage, root);
      compute_inputs(cfg, stage, hasher);
      const std::string input_hash = hasher.finish();
      auto it = manifest.stages.find(name);
      if (it != manifest.stages.end() && it->second.input_hash == input_hash && outputs_intact(root, it->second)) {
        it->second.skipped = true;
        it->second.seconds = 0.0;
        if (log) *log << "[" << name << "] unchanged, skipped\n";
        write_manifest(root, manifest);
        continue;
      }
      if (log) *log << "[" << name << "] running\n";
      OutputSet out(root);
      switch (stage) {
        case Stage::kIngest: run_ingest(cfg, out); break;
        case Stage::kForge: run_forge(cfg, out); break;
        case Stage::kPretrain: run_pretrain(cfg, out, log); break;
        case Stage::kTune: run_tune(cfg, out, log); break;
        case Stage::kEval: run_eval(cfg, out, log); break;
      }
      StageRecord rec;
      rec.input_hash = input_hash;
      rec.outputs = out.hashes();
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      manifest.stages[name] = std::move(rec);
      write_manifest(root, manifest);
      if (log) *log << "[" << name << "] done in " << std::fixed << std::setprecision(1) << manifest.stages[name].seconds
                    << "s\n" << std::defaultfloat;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kStageFailed) throw;
      throw Error(ErrorCode::kStageFailed, name + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kStageFailed, name + ": " + e.what());
    }
  }
  return manifest;
}

std::string report(const RunManifest& manifest, const std::string& output_root) {
  std::ostringstream os;
  os << "# Pipeline report\n\n";
  os << "Manifest digest: `" << manifest.digest() << "`\n\n";
  os << "| stage | seconds | skipped |\n| --- | --- | --- |\n";
  for (Stage s : all_stages()) {
    auto it = manifest.stages.find(std::string(to_string(s)));
    if (it == manifest.stages.end()) continue;
    os << "| " << it->first << " | " << std::fixed << std::setprecision(1) << it->second.seconds << " | "
       << (it->second.skipped ? "yes" : "no") << " |\n";
  }
  os << std::defaultfloat;
  const auto root = fs::path(output_root);

  if (manifest.stages.count("ingest") && fs::exists(root / std::string(kCorpusStats))) {
    const Json cs = read_json((root / std::string(kCorpusStats)).string());
    os << "\n## Corpus\n\n";
    os << "| source | documents | tokens |\n| --- | --- | --- |\n";
    for (const auto& [src, n] : cs.at("documents_by_source").items()) {
      os << "| " << src << " | " << n.get<std::size_t>() << " | " << cs.at("tokens_by_source").value(src, 0) << " |\n";
    }
    os << "| total | " << cs.at("documents").get<std::size_t>() << " | " << cs.at("tokens").get<std::size_t>()
       << " |\n";
  }

  if (manifest.stages.count("forge") && fs::exists(root / std::string(kDatasetStats))) {
    const Json ds = read_json((root / std::string(kDatasetStats)).string());
    os << "\n## Instruction dataset\n\n";
    os << "| task | available | target | sampled | shortfall |\n| --- | --- | --- | --- | --- |\n";
    std::size_t avail = 0, target = 0, sampled = 0, shortfall = 0;
    for (const auto& row : ds.at("tasks")) {
      const auto task = signal::parse_task(row.at("task").get<std::string>());
      const auto a = row.at("available").get<std::size_t>();
      const auto t = row.at("target").get<std::size_t>();
      const auto s = row.at("sampled").get<std::size_t>();
      const auto f = row.at("shortfall").get<std::size_t>();
      avail += a;
      target += t;
      sampled += s;
      shortfall += f;
      os << "| " << signal::display_name(task) << " | " << a << " | " << t << " | " << s << " | " << f << " |\n";
    }
    os << "| Total | " << avail << " | " << target << " | " << sampled << " | " << shortfall << " |\n";
  }

  if (manifest.stages.count("eval") && fs::exists(root / std::string(kReportJson))) {
    const Json rep = read_json((root / std::string(kReportJson)).string());
    os << "\n## Evaluation\n\n";
    os << "### Accuracy by pretraining step\n\n| step | accuracy |\n| --- | --- |\n";
    os << std::fixed << std::setprecision(3);
    for (const auto& p : rep.at("curve")) {
      os << "| " << p.at("step").get<std::uint64_t>() << " | " << p.at("accuracy").get<double>() << " |\n";
    }
    os << "\nStep-0 accuracy " << rep.at("step0_accuracy").get<double>() << ", tuned accuracy "
       << rep.at("final_accuracy").get<double>() << ".\n";
    os << "\n### Ablation\n\n| arm | accuracy |\n| --- | --- |\n";
    for (const auto& row : rep.at("ablation")) {
      os << "| " << row.at("arm").get<std::string>() << " | " << row.at("overall").at("accuracy").get<double>()
         << " |\n";
    }
    os << std::defaultfloat;
  }
  return os.str();
}

}  // namespace geolm::pipeline
