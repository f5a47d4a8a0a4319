#include "geolm/lora/sft.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "geolm/common/error.hpp"
#include "geolm/common/hash.hpp"
#include "geolm/common/rng.hpp"

namespace geolm::lora {

std::string_view to_string(LossMasking m) { return m == LossMasking::kFull ? "full" : "output_only"; }

LossMasking parse_loss_masking(std::string_view s) {
  if (s == "output_only") return LossMasking::kOutputOnly;
  if (s == "full") return LossMasking::kFull;
  throw Error(ErrorCode::kInvalidArgument, "unknown loss_masking '" + std::string(s) + "'");
}

std::string format_sft_prompt(std::string_view instruction, std::string_view input) {
  std::string out = "Instruction:\n";
  out += instruction;
  if (!input.empty()) {
    out += "\n\nInput:\n";
    out += input;
  }
  out += "\n\nResponse:\n";
  return out;
}

lm::Example make_sft_example(const signal::InstructionRecord& rec, int context_len, LossMasking masking) {
  using lm::ByteTokenizer;
  const auto prompt = ByteTokenizer::encode(format_sft_prompt(rec.instruction, rec.input));
  const auto output = ByteTokenizer::encode(rec.output);
  const std::size_t tail = output.size() + 1;
  const auto ctx = static_cast<std::size_t>(context_len);
  if (1 + tail > ctx) {
    throw Error(ErrorCode::kSequenceTooLong, "output of " + std::to_string(output.size()) +
                                                 " tokens does not fit the context");
  }
  const std::size_t keep = std::min(prompt.size(), ctx - 1 - tail);
  lm::Example ex;
  ex.tokens.push_back(ByteTokenizer::kBos);
  ex.tokens.insert(ex.tokens.end(), prompt.end() - static_cast<std::ptrdiff_t>(keep), prompt.end());
  const std::size_t out_begin = ex.tokens.size();
  ex.tokens.insert(ex.tokens.end(), output.begin(), output.end());
  ex.tokens.push_back(ByteTokenizer::kEos);
  ex.mask.assign(ex.tokens.size(), 0);
  const std::size_t first = masking == LossMasking::kFull ? 1 : out_begin;
  for (std::size_t i = first; i < ex.mask.size(); ++i) ex.mask[i] = 1;
  return ex;
}

Json StageSpec::to_json() const {
  return Json{{"name", name},         {"dataset", dataset},
              {"epochs", epochs},     {"lr", lr},
              {"batch_size", batch_size}, {"loss_masking", std::string(to_string(masking))},
              {"reinit", reinit},     {"seed", seed}};
}

StageSpec StageSpec::from_json(const Json& j) {
  StageSpec s;
  s.name = j.at("name").get<std::string>();
  s.dataset = j.value("dataset", std::string());
  s.epochs = j.value("epochs", s.epochs);
  s.lr = j.value("lr", s.lr);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.masking = parse_loss_masking(j.value("loss_masking", std::string("output_only")));
  s.reinit = j.value("reinit", s.reinit);
  s.seed = j.value("seed", s.seed);
  if (s.name.empty()) throw Error(ErrorCode::kInvalidArgument, "stage name is empty");
  if (s.epochs < 0) throw Error(ErrorCode::kInvalidArgument, "stage '" + s.name + "': epochs must be >= 0");
  if (s.batch_size <= 0) throw Error(ErrorCode::kInvalidArgument, "stage '" + s.name + "': batch_size must be > 0");
  if (!(s.lr > 0.0)) throw Error(ErrorCode::kInvalidArgument, "stage '" + s.name + "': lr must be > 0");
  return s;
}

std::vector<signal::InstructionRecord> load_instruction_records(const std::string& path) {
  std::vector<signal::InstructionRecord> out;
  for_each_jsonl(path, [&](std::size_t line, const Json& j) {
    try {
      out.push_back(signal::instruction_from_json(j));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kFormat, path + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

std::string provenance_key(const signal::InstructionRecord& rec) {
  std::ostringstream os;
  const std::string body = std::string(signal::to_string(rec.task)) + '\x1f' + rec.instruction + '\x1f' + rec.input +
                           '\x1f' + rec.output;
  os << rec.provenance.source_kind << ':' << rec.provenance.source_id << ':' << std::hex << fnv1a64(body);
  return os.str();
}

StageResult tune_examples(const lm::Checkpoint& base, AdapterSet<float>& adapters, std::vector<lm::Example> examples,
                          std::vector<std::string> keys, const StageSpec& stage, const EpochSink& on_epoch) {
  if (examples.empty()) throw Error(ErrorCode::kEmptyDataset, "stage '" + stage.name + "' has no records");
  check_compatible(adapters, base.config);
  StageResult result;
  result.name = stage.name;

  AdapterSet<float> grads = adapters.zeros_like();
  std::vector<Matrix<float>*> params;
  std::vector<const Matrix<float>*> gptrs;
  std::vector<Matrix<float>*> gmut;
  for (std::size_t i = 0; i < adapters.pairs.size(); ++i) {
    params.push_back(&adapters.pairs[i].a);
    params.push_back(&adapters.pairs[i].b);
    gmut.push_back(&grads.pairs[i].a);
    gmut.push_back(&grads.pairs[i].b);
  }
  gptrs.assign(gmut.begin(), gmut.end());

  lm::Adam adam;
  const std::size_t n = examples.size();
  const auto batch = static_cast<std::size_t>(stage.batch_size);
  std::vector<std::size_t> order(n);
  std::uint64_t tokens_seen = 0;
  for (int epoch = 0; epoch < stage.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(mix64(mix64(stage.seed, fnv1a64(stage.name)), static_cast<std::uint64_t>(epoch)));
    seeded_shuffle(order, rng);
    for (std::size_t begin = 0; begin < n; begin += batch) {
      std::vector<lm::Example> chunk;
      for (std::size_t i = begin; i < std::min(n, begin + batch); ++i) {
        chunk.push_back(examples[order[i]]);
        ++result.provenance_counts[keys[order[i]]];
        tokens_seen += examples[order[i]].tokens.size();
      }
      grads.set_zero();
      const auto loss = lm::batch_loss<float>(base.config, base.params, &adapters, chunk,
                                               lm::Gradients<float>{nullptr, &grads});
      adam.step(params, gptrs, stage.lr);
      ++result.steps;
      result.log.push_back({result.steps, loss.loss, stage.lr, tokens_seen});
    }
    if (on_epoch) on_epoch(stage.name, epoch + 1, adapters);
  }
  return result;
}

StageResult tune_stage(const lm::Checkpoint& base, AdapterSet<float>& adapters, const StageSpec& stage,
                       const EpochSink& on_epoch) {
  if (stage.records.empty()) throw Error(ErrorCode::kEmptyDataset, "stage '" + stage.name + "' has no records");
  std::vector<lm::Example> examples;
  std::vector<std::string> keys;
  for (const auto& rec : stage.records) {
    examples.push_back(make_sft_example(rec, base.config.context_len, stage.masking));
    keys.push_back(provenance_key(rec));
  }
  return tune_examples(base, adapters, std::move(examples), std::move(keys), stage, on_epoch);
}

}  // namespace geolm::lora
