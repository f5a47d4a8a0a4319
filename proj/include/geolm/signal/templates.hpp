#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "geolm/common/io.hpp"

namespace geolm::signal {

// Instruction template families. Summarization and QA have more than one
// because their source signals call for different instructions.
enum class Family {
  kExplanation,
  kNer,
  kReasoning,
  kFactVerification,
  kSummarizeTitle,
  kSummarizeReference,
  kClassification,
  kWordSemantics,
  kQaCaption,
};

std::string_view to_string(Family f);
Family parse_family(std::string_view s);

// Slots a restructurer provides for each family.
const std::set<std::string>& family_slots(Family f);

struct InstructionTemplate {
  std::string instruction;
  // Explanation only: overrides the input field (e.g. "{term}" or "").
  std::optional<std::string> input;
};

// Substitutes "{name}" slots. Throws kInvalidArgument on an unknown slot.
std::string render_slots(std::string_view tmpl, const std::map<std::string, std::string>& slots);

// Names of the "{slot}" references in a template.
std::set<std::string> slot_names(std::string_view tmpl);

class TemplateSet {
 public:
  // The shipped templates (version "v1"), at least three per family, and the
  // built-in label sets "dde18" (18 disciplines) and "dict8" (8 dictionary fields).
  static TemplateSet builtin(std::uint64_t seed = 0);
  static TemplateSet from_json(const Json& j);
  static TemplateSet load(const std::string& path);
  Json to_json() const;

  // Deterministic in (seed, family, record_id).
  const InstructionTemplate& pick(Family f, std::string_view record_id) const;

  const std::vector<std::string>* label_set(std::string_view id) const;
  void add_label_set(std::string id, std::vector<std::string> labels);
  void set_family(Family f, std::vector<InstructionTemplate> templates);

  // Throws kInvalidArgument when a family is missing, a template names a slot
  // its restructurer does not provide, or an input override is used outside
  // the explanation family.
  void validate() const;

  const std::string& version() const { return version_; }
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

 private:
  std::string version_ = "v1";
  std::uint64_t seed_ = 0;
  std::map<Family, std::vector<InstructionTemplate>> families_;
  std::map<std::string, std::vector<std::string>, std::less<>> label_sets_;
};

}  // namespace geolm::signal
