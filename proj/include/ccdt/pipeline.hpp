#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccdt/ibea.hpp"
#include "ccdt/json.hpp"
#include "ccdt/model.hpp"
#include "ccdt/objectives.hpp"
#include "ccdt/query_client.hpp"
#include "ccdt/rules.hpp"
#include "ccdt/stats.hpp"

namespace ccdt {

struct EvolutionConfig {
  double inconsistent_target_fraction = 0.5;
  std::size_t max_duplication = 10;
  // Size of the randomly sampled part; unset means the balanced part's size.
  std::optional<std::size_t> extra_sample_size;
  FineTuneOptions fine_tune;
  // Training used by the from-scratch baseline.
  TrainingConfig scratch_training;
  std::uint64_t seed = 0;
  bool record_timings = true;

  void validate() const;
};

Json evolution_to_json(const EvolutionConfig& cfg);
EvolutionConfig evolution_from_json(const Json& doc);

/// How many inconsistent and consistent rows the balanced set holds.
struct BalancePlan {
  std::size_t inconsistent_rows = 0;
  std::size_t consistent_rows = 0;
  bool resampled = false;
};

/// Up-samples the inconsistent messages towards `fraction` of the balanced
/// set, capped at `max_dup` copies each; if the cap binds, the consistent
/// messages are down-sampled instead.
BalancePlan plan_balance(std::size_t n_inconsistent, std::size_t n_consistent, double fraction, std::size_t max_dup);

struct AugmentResult {
  LabelledDataset balanced;
  std::vector<std::size_t> rows;     // row of `selected` behind each balanced row
  std::vector<std::uint8_t> inconsistent;  // per row of `selected`
  std::size_t n_inconsistent = 0;
  bool resampled = false;
  std::vector<std::string> warnings;
};

/// A message is inconsistent when the source model's argmax disagrees with
/// its target label on any rule both versions share.
AugmentResult augment(const LabelledDataset& selected, const CCDT& source, const EvolutionConfig& cfg,
                      std::uint64_t seed);

struct EvolutionDataset {
  LabelledDataset balanced;
  LabelledDataset sampled;
  Solution solution;
  std::vector<std::size_t> balanced_candidates;  // candidate index per balanced row
  std::vector<std::uint8_t> duplicated;          // per balanced row: repeat of an earlier row
  std::vector<std::size_t> sampled_candidates;
  std::size_t n_inconsistent = 0;
  std::size_t queries = 0;
  std::vector<std::string> warnings;

  LabelledDataset combined() const;
  Json provenance() const;
};

EvolutionDataset build_evolution_dataset(const CandidateSet& candidates, const Solution& solution,
                                         QueryClient& target, const CCDT& source, const EvolutionConfig& cfg);

/// Uniform random subset of `size` candidates.
Solution random_subset(std::size_t nc, std::size_t size, std::uint64_t seed);

struct RunResult {
  CCDT model;
  Solution solution;
  std::size_t queries = 0;
  Json report;
};

/// Search, pick, query, augment and fine-tune.
RunResult evolve(const CCDT& source, const RuleSet& source_rules, const RuleSet& target_rules, QueryClient& target,
                 const CandidateSet& candidates, const SearchConfig& search, const EvolutionConfig& cfg);

enum class Baseline { tfs, ots, rs };
std::string_view to_string(Baseline b) noexcept;
Baseline parse_baseline(std::string_view text);

/// TFS and RS draw a uniform random subset of `subset_size` candidates (the
/// same one for a given seed); OTS makes no queries.
RunResult run_baseline(Baseline mode, const CCDT& source, const RuleSet& source_rules, const RuleSet& target_rules,
                       QueryClient& target, const CandidateSet& candidates, std::size_t subset_size,
                       const EvolutionConfig& cfg);

/// Metrics of `model` against target-labelled `test` data: all rules, the
/// rules shared with the source version, and each new rule.
struct EvaluationReport {
  MetricsReport all;
  MetricsReport base;
  std::vector<MetricsReport> new_rules;
};

EvaluationReport evaluate_model(const CCDT& model, const LabelledDataset& test, const RuleSetDiff& diff);
EvaluationReport evaluate_predictions(const std::vector<std::vector<ResultCode>>& predicted,
                                      const LabelledDataset& test, const RuleSetDiff& diff);
Json evaluation_to_json(const EvaluationReport& r);

}  // namespace ccdt
