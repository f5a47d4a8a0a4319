#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "geolm/common/io.hpp"
#include "geolm/pipeline/config.hpp"

namespace geolm::pipeline {

enum class Stage { kIngest, kForge, kPretrain, kTune, kEval };

const std::vector<Stage>& all_stages();
std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }
  Json to_json() const;
};

// Checks that every referenced file exists and parses, and compares the
// sampling plan against the number of records the signals actually yield.
ValidationReport validate(const PipelineConfig& cfg);

struct StageRecord {
  std::string input_hash;
  std::map<std::string, std::string> outputs;  // path relative to output_root -> sha256
  double seconds = 0.0;
  bool skipped = false;
};

struct RunManifest {
  Json versions = Json::object();
  std::string config_hash;
  std::map<std::string, StageRecord> stages;  // keyed by stage name

  Json to_json() const;
  static RunManifest from_json(const Json& j);
  // sha256 over versions, config hash and every stage's input and output
  // hashes. Timings and skip flags are left out.
  std::string digest() const;
};

inline constexpr std::string_view kManifestName = "manifest.json";

// Runs the requested stages in dependency order, rewriting the manifest after
// each one. A stage whose input hash and outputs match the manifest is
// skipped. Failures raise kStageFailed naming the stage.
RunManifest run(const PipelineConfig& cfg, const std::vector<Stage>& stages, std::ostream* log = nullptr);

RunManifest load_manifest(const std::string& output_root);

// Markdown summary: dataset statistics, checkpoint curve and ablation rows.
// Sections whose stage is absent from the manifest are left out.
std::string report(const RunManifest& manifest, const std::string& output_root);

}  // namespace geolm::pipeline
