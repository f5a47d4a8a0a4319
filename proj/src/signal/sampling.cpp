#include "geolm/signal/sampling.hpp"

#include <algorithm>
#include <unordered_set>

#include "geolm/common/error.hpp"
#include "geolm/common/hash.hpp"
#include "geolm/common/rng.hpp"

namespace geolm::signal {

SamplingPlan SamplingPlan::reference_targets(std::uint64_t seed) {
  SamplingPlan p;
  p.seed = seed;
  p.targets = {
      {Task::kNamedEntityRecognition, 2400}, {Task::kReasoning, 600},          {Task::kFactVerification, 8000},
      {Task::kSummarization, 800},           {Task::kTextClassification, 2000}, {Task::kWordSemantics, 6400},
      {Task::kExplanation, 4200},            {Task::kQuestionAnswering, 15349},
  };
  return p;
}

SamplingPlan SamplingPlan::from_json(const Json& j) {
  SamplingPlan p;
  try {
    p.seed = j.value("seed", std::uint64_t{0});
    p.dedup = j.value("dedup", true);
    for (const auto& [name, v] : j.at("targets").items()) {
      const auto n = v.get<long long>();
      if (n < 0) throw Error(ErrorCode::kInvalidArgument, "negative target for " + name);
      p.targets[parse_task(name)] = static_cast<std::size_t>(n);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("sampling plan: ") + e.what());
  }
  return p;
}

SamplingPlan SamplingPlan::load(const std::string& path) { return from_json(Json::parse(read_file(path))); }

Json SamplingPlan::to_json() const {
  Json j;
  j["seed"] = seed;
  j["dedup"] = dedup;
  j["targets"] = Json::object();
  for (Task t : kAllTasks) j["targets"][std::string(to_string(t))] = target(t);
  return j;
}

std::size_t SamplingPlan::target(Task t) const {
  auto it = targets.find(t);
  return it == targets.end() ? 0 : it->second;
}

std::size_t GeoSignalDataset::total_available() const {
  std::size_t n = 0;
  for (const auto& s : stats) n += s.available;
  return n;
}

std::size_t GeoSignalDataset::total_sampled() const {
  std::size_t n = 0;
  for (const auto& s : stats) n += s.sampled;
  return n;
}

Json GeoSignalDataset::stats_json() const {
  Json rows = Json::array();
  for (const auto& s : stats) {
    rows.push_back({{"task", std::string(to_string(s.task))},
                    {"raw", s.raw},
                    {"available", s.available},
                    {"target", s.target},
                    {"sampled", s.sampled},
                    {"shortfall", s.shortfall}});
  }
  Json j;
  j["tasks"] = std::move(rows);
  j["total_available"] = total_available();
  j["total_sampled"] = total_sampled();
  return j;
}

GeoSignalDataset sample_and_clean(const std::vector<InstructionRecord>& records, const SamplingPlan& plan) {
  std::map<Task, std::vector<std::size_t>> by_task;
  std::map<Task, std::size_t> raw;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    ++raw[r.task];
    if (plan.dedup) {
      std::string key(to_string(r.task));
      key += '\x1f';
      // Question-style records carry their content in the instruction.
      key += r.input.empty() ? r.instruction : r.input;
      key += '\x1f';
      key += r.output;
      if (!seen.insert(std::move(key)).second) continue;
    }
    by_task[r.task].push_back(i);
  }

  GeoSignalDataset ds;
  for (Task t : kAllTasks) {
    const auto& pool = by_task[t];
    TaskStats s{t, raw[t], pool.size(), plan.target(t), 0, 0};
    s.sampled = std::min(s.target, s.available);
    s.shortfall = s.target - s.sampled;

    // Partial Fisher-Yates over the index list picks `sampled` distinct items;
    // they are emitted in input order.
    std::vector<std::size_t> picks(pool);
    SplitMix64 rng(mix64(plan.seed, fnv1a64(to_string(t))));
    for (std::size_t i = 0; i < s.sampled; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(picks.size() - i));
      std::swap(picks[i], picks[j]);
    }
    picks.resize(s.sampled);
    std::sort(picks.begin(), picks.end());
    for (std::size_t idx : picks) ds.records.push_back(records[idx]);
    ds.stats.push_back(s);
  }
  return ds;
}

}  // namespace geolm::signal
