#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "geolm/lm/checkpoint.hpp"
#include "geolm/lm/train.hpp"
#include "geolm/lm/transformer.hpp"
#include "geolm/lora/adapter.hpp"
#include "geolm/signal/records.hpp"

namespace geolm::lora {

inline constexpr std::string_view kSftLayoutVersion = "sft-v1";

enum class LossMasking { kOutputOnly, kFull };

std::string_view to_string(LossMasking m);
LossMasking parse_loss_masking(std::string_view s);

// "Instruction:\n{instruction}\n\nInput:\n{input}\n\nResponse:\n", with the
// input block left out when input is empty. The output and EOS follow.
std::string format_sft_prompt(std::string_view instruction, std::string_view input);

// BOS + prompt + output + EOS. kOutputOnly marks the output bytes and the EOS
// as targets; kFull marks every token after BOS. When the sequence is longer
// than context_len, prompt tokens are dropped from the left. Throws
// kSequenceTooLong if the output alone does not fit.
lm::Example make_sft_example(const signal::InstructionRecord& rec, int context_len, LossMasking masking);

struct StageSpec {
  std::string name;
  std::string dataset;  // JSONL of instruction records
  int epochs = 1;
  double lr = 1e-3;
  int batch_size = 8;
  LossMasking masking = LossMasking::kOutputOnly;
  bool reinit = false;  // sequential mode: start this stage from fresh adapters
  std::uint64_t seed = 0;
  std::vector<signal::InstructionRecord> records;  // filled by load_stage_dataset

  Json to_json() const;
  static StageSpec from_json(const Json& j);
};

std::vector<signal::InstructionRecord> load_instruction_records(const std::string& path);

// Multiset key identifying a record for provenance bookkeeping.
std::string provenance_key(const signal::InstructionRecord& rec);

struct StageResult {
  std::string name;
  std::size_t steps = 0;
  std::vector<lm::StepLog> log;
  std::map<std::string, std::size_t> provenance_counts;
  Json eval;  // filled by the recipe's stage hook, null otherwise
};

// Called after every epoch with the stage name, 1-based epoch and current adapters.
using EpochSink = std::function<void(const std::string& stage, int epoch, const AdapterSet<float>&)>;

// Tunes only the adapter tensors on stage.records: each epoch is a seeded
// shuffle cut into ceil(n / batch_size) batches, one Adam step per batch.
// Throws kEmptyDataset on an empty record list; kAllMasked propagates.
StageResult tune_stage(const lm::Checkpoint& base, AdapterSet<float>& adapters, const StageSpec& stage,
                       const EpochSink& on_epoch = {});

// Lower-level form over prebuilt examples, in the given order each epoch
// after a seeded shuffle.
StageResult tune_examples(const lm::Checkpoint& base, AdapterSet<float>& adapters, std::vector<lm::Example> examples,
                          std::vector<std::string> keys, const StageSpec& stage, const EpochSink& on_epoch = {});

}  // namespace geolm::lora
