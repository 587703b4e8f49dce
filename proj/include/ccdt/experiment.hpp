#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ccdt/ibea.hpp"
#include "ccdt/json.hpp"
#include "ccdt/model.hpp"
#include "ccdt/network.hpp"
#include "ccdt/pipeline.hpp"
#include "ccdt/rules.hpp"
#include "ccdt/schema.hpp"

namespace ccdt {

/// A source/target rule-set pair: source size plus the evolution applied.
struct Preset {
  std::string name;
  std::size_t source_rules = 30;
  std::vector<int> addition_arities;
  std::size_t modifications = 2;
  std::string source_version;
  std::string target_version;
};

/// "s1t1" (30 -> 35 rules), "s2t2" (40 -> 45), "s3t3" (51 -> 56).
Preset preset_by_name(std::string_view name);
std::vector<std::string> preset_names();

struct PresetRules {
  RuleSet source;
  RuleSet target;
};

/// The source and target rule sets an experiment with base seed `seed` uses
/// for preset `name`.
PresetRules preset_rulesets(const MessageSchema& schema, std::string_view name, std::uint64_t seed);

/// Reduced network used by the experiment runners so that repeated
/// pretraining and fine-tuning fit on one CPU core.
ArchConfig desk_arch();
inline constexpr std::size_t kDeskTextDim = 8;

struct ExperimentConfig {
  std::string rq = "rq1";  // rq1 | rq2 | rq3
  std::vector<std::string> presets{"s1t1"};
  std::vector<std::string> methods;  // empty: EvoCLINICAL+TFS+OTS (rq1), EvoCLINICAL+RS (rq2), EvoCLINICAL (rq3)
  std::size_t repeats = 10;
  std::uint64_t seed = 2024;
  std::size_t candidates = 800;
  std::size_t budget = 80;                          // 0 means ceil(0.1 * candidates)
  std::vector<std::size_t> sizes{100, 200, 400, 800};  // rq3 sweep; budget is 10% of each size
  std::size_t pretrain_size = 2000;
  std::size_t test_size = 1000;
  double violation_rate = 0.3;
  std::size_t d_text = kDeskTextDim;
  ArchConfig arch = desk_arch();
  TrainingConfig pretrain;
  SearchConfig search;
  EvolutionConfig evolution;

  std::vector<std::string> effective_methods() const;
  void validate() const;
};

Json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const Json& doc);

/// Runs the configured research question. Seeds for every stage derive from
/// cfg.seed, so the report (which holds no timings) is reproducible.
Json run_experiment(const ExperimentConfig& cfg, SchemaPtr schema,
                    const std::function<void(const std::string&)>& log = {});

/// Plain-text tables of medians, p-values and A12 from a report.
std::string summarize_experiment(const Json& report);

}  // namespace ccdt
