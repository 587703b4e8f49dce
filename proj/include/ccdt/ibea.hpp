#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "ccdt/json.hpp"
#include "ccdt/objectives.hpp"

namespace ccdt {

/// How one solution is taken from the front. `scalarized` ranks the members
/// within budget by the normalised quality sum alone, which favours the
/// smallest subsets because CMD, RCD, FPP and PU are all averages.
/// `fill_budget` first keeps the members with the largest SS within budget.
enum class PickPolicy { fill_budget, scalarized };

std::string_view to_string(PickPolicy p) noexcept;
PickPolicy parse_pick_policy(std::string_view text);

struct SearchConfig {
  std::size_t population_size = 100;
  std::size_t max_evaluations = 30000;
  double crossover_prob = 0.9;
  double mutation_prob = 0.0;  // 0 means 1/nc
  double kappa = 0.05;
  std::uint64_t seed = 0;
  std::size_t budget = 0;  // 0 means ceil(0.1 * nc)
  bool literal_similarity = false;
  // Keep every non-dominated solution evaluated during the run and return
  // that set; otherwise return the final population's non-dominated members.
  bool external_archive = true;
  // Offspring equal to any subset already evaluated in this run are mutated
  // again up to this many times.
  std::size_t duplicate_retries = 20;
  PickPolicy pick = PickPolicy::fill_budget;

  /// Fills the nc-dependent defaults and checks invariants. Throws ConfigError.
  SearchConfig resolved(std::size_t nc) const;
};

Json search_to_json(const SearchConfig& cfg);
SearchConfig search_from_json(const Json& doc);

struct FrontMember {
  Solution solution;
  ObjectiveVector objectives;
};

struct SearchResult {
  std::vector<FrontMember> front;  // mutually non-dominated, distinct objective vectors
  std::size_t evaluations = 0;
  std::size_t generations = 0;
  SearchConfig config;  // resolved
};

/// a is no worse than b in every minimised objective and better in one.
bool dominates(const std::array<double, 5>& a, const std::array<double, 5>& b);

/// Non-dominated members of `members`, dropping repeated objective vectors
/// (first occurrence kept). Order of survivors is preserved.
std::vector<FrontMember> non_dominated(const std::vector<FrontMember>& members);

/// IBEA with the additive epsilon indicator over (SS, -CMD, -RCD, -FPP, -PU).
/// Throws ConfigError when nc < 2 or the config is invalid.
SearchResult ibea_search(const CandidateSet& candidates, const SearchConfig& cfg);

/// Index of the member to use under budget `budget`: among members with
/// SS <= budget (or the smallest-SS members when none qualify), the largest
/// equal-weight sum of min-max normalised CMD, RCD, FPP and PU; ties go to
/// smaller SS, then lower index. With `fill_budget` only the eligible members
/// of the largest SS are ranked.
std::size_t pick_solution(const std::vector<FrontMember>& front, std::size_t budget,
                          PickPolicy policy = PickPolicy::scalarized);

/// Chosen mask (run-length encoded), its objectives, the full front, the
/// resolved config and the seed.
Json selection_report(const SearchResult& result, std::size_t chosen);

}  // namespace ccdt
