// Command-line front end: one subcommand per pipeline step plus the
// end-to-end `pipeline` driver.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>

#include "geolm/common/error.hpp"
#include "geolm/common/io.hpp"
#include "geolm/doc/normalize.hpp"
#include "geolm/eval/bench.hpp"
#include "geolm/eval/metrics.hpp"
#include "geolm/eval/remote.hpp"
#include "geolm/lm/checkpoint.hpp"
#include "geolm/lm/tokenizer.hpp"
#include "geolm/lm/train.hpp"
#include "geolm/lora/recipe.hpp"
#include "geolm/pipeline/pipeline.hpp"
#include "geolm/signal/restructure.hpp"
#include "geolm/signal/sampling.hpp"
#include "geolm/signal/templates.hpp"

namespace fs = std::filesystem;
using geolm::Json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string pretty(const Json& j) { return j.dump(2, ' ', false, Json::error_handler_t::replace) + "\n"; }

int cmd_ingest(const std::string& in, const std::string& rules_path, const std::string& out, const std::string& stats,
               const std::string& corpus_text) {
  using namespace geolm::doc;
  const auto rules = rules_path.empty() ? CleaningRuleSet{} : load_rules(rules_path);
  std::vector<Json> rows;
  std::string text;
  CorpusStats cs;
  geolm::for_each_jsonl(in, [&](std::size_t, const Json& j) {
    const auto norm = normalize_document(raw_document_from_json(j), rules);
    cs.add(norm);
    rows.push_back(normalized_to_json(norm));
    if (norm.text.empty()) return;
    if (!text.empty()) text += kCorpusSeparator;
    text += norm.text;
  });
  geolm::write_file_atomic(out, geolm::to_jsonl(rows));
  if (!stats.empty()) geolm::write_file_atomic(stats, pretty(cs.to_json()));
  if (!corpus_text.empty()) geolm::write_file_atomic(corpus_text, text);
  std::cerr << "normalized " << rows.size() << " documents\n";
  return 0;
}

int cmd_forge(const std::string& signals, const std::string& templates_path, const std::string& plan_path,
              std::uint64_t seed, const std::string& out, const std::string& rejects, const std::string& stats) {
  using namespace geolm::signal;
  TemplateSet templates = templates_path.empty() ? TemplateSet::builtin(seed) : TemplateSet::load(templates_path);
  templates.set_seed(seed);
  templates.validate();
  std::vector<SourceRecord> sources;
  geolm::for_each_jsonl(signals, [&](std::size_t, const Json& j) { sources.push_back(source_record_from_json(j)); });
  const auto forged = forge(sources, templates);
  const auto plan = plan_path.empty() ? SamplingPlan::reference_targets(seed) : SamplingPlan::load(plan_path);
  const auto ds = sample_and_clean(forged.records, plan);
  std::vector<Json> rows;
  for (const auto& r : ds.records) rows.push_back(instruction_to_json(r));
  geolm::write_file_atomic(out, geolm::to_jsonl(rows));
  if (!rejects.empty()) {
    std::vector<Json> rj;
    for (const auto& r : forged.rejects) rj.push_back(reject_to_json(r));
    geolm::write_file_atomic(rejects, geolm::to_jsonl(rj));
  }
  if (!stats.empty()) geolm::write_file_atomic(stats, pretty(ds.stats_json()));
  std::cerr << "forged " << forged.records.size() << " records, " << forged.rejects.size() << " rejects, sampled "
            << ds.records.size() << "\n";
  return 0;
}

int cmd_pretrain(const std::string& corpus, const std::string& model_path, const std::string& schedule_path,
                 const std::string& init, std::uint64_t seed, const std::string& out_dir) {
  using namespace geolm::lm;
  const ModelConfig cfg =
      model_path.empty() ? ModelConfig{} : ModelConfig::from_json(Json::parse(geolm::read_file(model_path)));
  const TrainSchedule sched = schedule_path.empty()
                                  ? TrainSchedule{}
                                  : TrainSchedule::from_json(Json::parse(geolm::read_file(schedule_path)));
  const Checkpoint start = init.empty() ? init_checkpoint(cfg, seed) : load_checkpoint(init);
  const auto stream = ByteTokenizer::encode(geolm::read_file(corpus));
  const auto docs = documents_from_stream(stream, start.config.context_len);
  auto save = [&](const Checkpoint& c) {
    const auto p = (fs::path(out_dir) / ("step_" + std::to_string(c.step) + ".tlm")).string();
    save_checkpoint(p, c);
    std::cerr << "saved " << p << "\n";
  };
  save(start);
  const auto result = train(start, docs, sched, save);
  geolm::write_file_atomic((fs::path(out_dir) / "loss.csv").string(), loss_log_csv(result.log));
  return 0;
}

int cmd_tune(const std::string& base_path, const std::string& plan_path, const std::string& lora_path,
             const std::string& out_dir) {
  using namespace geolm::lora;
  const auto base = geolm::lm::load_checkpoint(base_path);
  const LoraConfig cfg = lora_path.empty() ? LoraConfig{} : LoraConfig::from_json(Json::parse(geolm::read_file(lora_path)));
  const auto plan = StagePlan::load(plan_path);
  auto on_epoch = [&](const std::string& stage, int epoch, const AdapterSet<float>& a) {
    save_adapters((fs::path(out_dir) / (stage + "_epoch" + std::to_string(epoch) + ".tla")).string(), a);
  };
  const auto result = run_recipe(base, attach(base, cfg), plan, {}, on_epoch);
  save_adapters((fs::path(out_dir) / "final.tla").string(), result.adapters);
  for (const auto& s : result.stages) {
    std::cerr << "stage " << s.name << ": " << s.steps << " steps, final loss "
              << (s.log.empty() ? 0.0 : s.log.back().loss) << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& bench, const std::string& subjective, const std::string& scorer_spec,
             const std::string& evaluator_spec, int max_new, const std::string& report_path) {
  using namespace geolm::eval;
  auto scorer = make_scorer(scorer_spec);
  const auto items = load_objective(bench);
  auto rep = accuracy(*scorer, items);
  if (!subjective.empty()) {
    auto evaluator = evaluator_spec.empty() ? nullptr : make_scorer(evaluator_spec);
    Scorer& ev = evaluator ? *evaluator : *scorer;
    for (const auto& item : load_subjective(subjective)) rep.subjective.push_back(evaluate_subjective(*scorer, ev, item, max_new));
  }
  geolm::write_file_atomic(report_path, pretty(rep.to_json()));
  std::cout << "accuracy " << rep.overall.accuracy() << " (" << rep.overall.correct << "/" << rep.overall.total << ")\n";
  return 0;
}

int cmd_serve(const std::string& scorer_spec, int port, bool stdio) {
  using namespace geolm::eval;
  auto scorer = make_scorer(scorer_spec);
  ScoringServer server(*scorer);
  if (stdio) {
    server.serve_stream(std::cin, std::cout);
    return 0;
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.serve_tcp(port, g_stop, [](int p) { std::cerr << "listening on 127.0.0.1:" << p << std::endl; });
  return 0;
}

geolm::pipeline::PipelineConfig load_config(const std::string& path, const std::string& output_root) {
  auto cfg = geolm::pipeline::PipelineConfig::load(path);
  if (!output_root.empty()) cfg.paths.output_root = fs::absolute(output_root).lexically_normal().string();
  return cfg;
}

int cmd_pipeline(const std::string& action, const std::string& config, const std::string& output_root,
                 const std::vector<std::string>& stage_names) {
  using namespace geolm::pipeline;
  PipelineConfig cfg;
  try {
    cfg = load_config(config, output_root);
  } catch (const geolm::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  if (action == "validate") {
    const auto rep = validate(cfg);
    std::cout << pretty(rep.to_json());
    return rep.ok() ? 0 : 1;
  }
  if (action == "report") {
    try {
      std::cout << report(load_manifest(cfg.paths.output_root), cfg.paths.output_root);
    } catch (const std::exception& e) {
      std::cerr << "cannot read manifest: " << e.what() << "\n";
      return 1;
    }
    return 0;
  }
  const auto rep = validate(cfg);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  if (!rep.ok()) {
    for (const auto& e : rep.errors) std::cerr << "error: " << e << "\n";
    return 1;
  }
  std::vector<Stage> stages;
  try {
    for (const auto& s : stage_names) stages.push_back(parse_stage(s));
  } catch (const geolm::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  if (stages.empty()) stages = all_stages();
  try {
    const auto manifest = run(cfg, stages, &std::cerr);
    std::cout << "manifest digest " << manifest.digest() << "\n";
  } catch (const geolm::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-adaptation pipeline: corpus normalization, instruction data, tiny LM, LoRA, evaluation"};
  app.require_subcommand(1);

  std::string in, rules, out, stats, corpus_text;
  auto* ingest = app.add_subcommand("ingest", "Normalize raw documents into marker-annotated text");
  ingest->add_option("--in", in, "raw documents (JSONL)")->required();
  ingest->add_option("--rules", rules, "cleaning rules file");
  ingest->add_option("--out", out, "normalized documents (JSONL)")->required();
  ingest->add_option("--stats", stats, "corpus statistics (JSON)");
  ingest->add_option("--corpus-text", corpus_text, "concatenated corpus text");

  std::string signals, templates, plan, rejects;
  std::uint64_t seed = 0;
  auto* forge = app.add_subcommand("forge", "Restructure signals into instruction records and sample them");
  forge->add_option("--signals", signals, "source records (JSONL)")->required();
  forge->add_option("--templates", templates, "instruction templates (JSON)");
  forge->add_option("--plan", plan, "sampling plan (JSON)");
  forge->add_option("--seed", seed, "template selection seed");
  forge->add_option("--out", out, "instruction records (JSONL)")->required();
  forge->add_option("--rejects", rejects, "rejected sources (JSONL)");
  forge->add_option("--stats", stats, "per-task statistics (JSON)");

  std::string corpus, model, schedule, init, out_dir;
  auto* pretrain = app.add_subcommand("pretrain", "Train the tiny LM on a corpus text file");
  pretrain->add_option("--corpus", corpus, "corpus text")->required();
  pretrain->add_option("--model", model, "model config (JSON)");
  pretrain->add_option("--schedule", schedule, "training schedule (JSON)");
  pretrain->add_option("--init", init, "checkpoint to continue from");
  pretrain->add_option("--seed", seed, "initialization seed");
  pretrain->add_option("--out-dir", out_dir, "checkpoint directory")->required();

  std::string base, lora_cfg;
  auto* tune = app.add_subcommand("tune", "Run a staged LoRA tuning plan");
  tune->add_option("--base", base, "base checkpoint")->required();
  tune->add_option("--plan", plan, "stage plan (JSON)")->required();
  tune->add_option("--lora", lora_cfg, "adapter config (JSON)");
  tune->add_option("--out", out_dir, "adapter directory")->required();

  std::string bench, subjective, scorer, evaluator, report_path;
  int max_new = 48;
  auto* eval = app.add_subcommand("eval", "Score a benchmark");
  eval->add_option("--bench", bench, "objective items (JSONL)")->required();
  eval->add_option("--subjective", subjective, "subjective items (JSONL)");
  eval->add_option("--scorer", scorer, "local:ckpt.tlm[+adapters.tla] or remote:host:port")->required();
  eval->add_option("--evaluator", evaluator, "scorer for perplexity and gptscore (defaults to --scorer)");
  eval->add_option("--max-new", max_new, "generation length for subjective items");
  eval->add_option("--report", report_path, "report (JSON)")->required();

  int port = 0;
  bool stdio = false;
  auto* serve = app.add_subcommand("serve", "Serve a scorer over newline-delimited JSON");
  serve->add_option("--scorer", scorer, "local:ckpt.tlm[+adapters.tla]")->required();
  serve->add_option("--port", port, "TCP port on 127.0.0.1 (0 picks one)");
  serve->add_flag("--stdio", stdio, "serve on stdin/stdout instead of TCP");

  std::string action, config, output_root;
  std::vector<std::string> stage_names;
  auto* pipeline = app.add_subcommand("pipeline", "Run the whole recipe from one config");
  pipeline->add_option("action", action, "validate | run | report")
      ->required()
      ->check(CLI::IsMember({"validate", "run", "report"}));
  pipeline->add_option("--config", config, "pipeline config (JSON)")->required();
  pipeline->add_option("--output-root", output_root, "override paths.output_root");
  pipeline->add_option("--stages", stage_names, "subset of ingest,forge,pretrain,tune,eval")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(in, rules, out, stats, corpus_text);
    if (*forge) return cmd_forge(signals, templates, plan, seed, out, rejects, stats);
    if (*pretrain) return cmd_pretrain(corpus, model, schedule, init, seed, out_dir);
    if (*tune) return cmd_tune(base, plan, lora_cfg, out_dir);
    if (*eval) return cmd_eval(bench, subjective, scorer, evaluator, max_new, report_path);
    if (*serve) return cmd_serve(scorer, port, stdio);
    if (*pipeline) return cmd_pipeline(action, config, output_root, stage_names);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
