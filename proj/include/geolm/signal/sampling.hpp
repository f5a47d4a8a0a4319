#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "geolm/common/io.hpp"
#include "geolm/signal/records.hpp"

namespace geolm::signal {

struct SamplingPlan {
  std::map<Task, std::size_t> targets;
  std::uint64_t seed = 0;
  bool dedup = true;

  // Cleaned-dataset sizes per task from the reference GeoSignal build
  // (39,749 records in total). QA composition stays configurable.
  static SamplingPlan reference_targets(std::uint64_t seed = 0);
  static SamplingPlan from_json(const Json& j);
  static SamplingPlan load(const std::string& path);
  Json to_json() const;
  std::size_t target(Task t) const;
};

struct TaskStats {
  Task task;
  std::size_t raw = 0;        // before dedup
  std::size_t available = 0;  // after dedup
  std::size_t target = 0;
  std::size_t sampled = 0;
  std::size_t shortfall = 0;  // target - sampled when target exceeds availability
};

struct GeoSignalDataset {
  std::vector<InstructionRecord> records;  // task order of kAllTasks, input order within a task
  std::vector<TaskStats> stats;

  std::size_t total_available() const;
  std::size_t total_sampled() const;
  Json stats_json() const;
};

// Exact dedup on (task, input, output) keeps the first occurrence, then
// uniform sampling without replacement per task. Sampled count per task is
// min(target, available); shortfalls are reported, never padded. Records with
// an empty input are keyed on their instruction instead.
GeoSignalDataset sample_and_clean(const std::vector<InstructionRecord>& records, const SamplingPlan& plan);

}  // namespace geolm::signal
