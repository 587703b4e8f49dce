#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccdt/json.hpp"
#include "ccdt/model.hpp"
#include "ccdt/result_code.hpp"
#include "ccdt/rules.hpp"
#include "ccdt/schema.hpp"

namespace ccdt {

/// A subset of the candidate pool as a bitmask.
class Solution {
 public:
  Solution() = default;
  explicit Solution(std::size_t n) : n_(n), words_((n + 63) / 64, 0) {}

  std::size_t universe() const noexcept { return n_; }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool on = true) {
    if (on)
      words_[i >> 6] |= std::uint64_t{1} << (i & 63);
    else
      words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63));
  }
  void flip(std::size_t i) { words_[i >> 6] ^= std::uint64_t{1} << (i & 63); }
  std::size_t count() const noexcept;
  std::vector<std::size_t> indices() const;
  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  static Solution from_indices(std::size_t n, const std::vector<std::size_t>& idx);

  bool operator==(const Solution&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

struct SolutionHash {
  std::size_t operator()(const Solution& s) const noexcept;
};

/// Alternating run lengths starting with a (possibly empty) run of zeros.
Json encode_mask(const Solution& s);
Solution decode_mask(const Json& doc);

/// The candidate pool with everything the objectives need, computed once:
/// source-model predictions, source-engine truth and the per-rule reference
/// result-code distributions over the whole pool.
struct CandidateSet {
  Dataset data;
  std::vector<std::string> rule_ids;                    // source rules
  std::vector<Prediction> predictions;                  // [message][rule]
  std::vector<std::vector<ResultCode>> predicted;       // argmax of predictions
  std::vector<std::vector<ResultCode>> truth;           // source engine labels
  std::vector<std::array<double, 4>> reference;         // D^CM per rule
  std::vector<std::uint8_t> mispredicted;               // any rule disagrees with truth
  std::vector<double> uncertainty;                      // mean entropy over rules
  std::vector<std::vector<std::uint32_t>> value_ids;    // [message][field], equal ids iff equal values
  std::vector<std::size_t> value_counts;                // distinct values per field

  std::size_t nc() const noexcept { return data.size(); }
  std::size_t nr() const noexcept { return rule_ids.size(); }
  std::size_t nv() const noexcept { return data.schema->nv(); }
};

/// Throws ShapeError when predictions or truth do not line up with `data`.
CandidateSet make_candidate_set(Dataset data, std::vector<std::string> rule_ids, std::vector<Prediction> predictions,
                                std::vector<std::vector<ResultCode>> truth);

/// Predicts with `source_model` and labels with `source_rules` (reordered to
/// the model's rule order).
CandidateSet build_candidate_set(const Dataset& data, const CCDT& source_model, const RuleSet& source_rules);

struct ObjectiveVector {
  std::size_t ss = 0;
  double cmd = 0.0, rcd = 0.0, fpp = 0.0, pu = 0.0;

  /// (SS, -CMD, -RCD, -FPP, -PU), all to be minimised.
  std::array<double, 5> minimised() const noexcept { return {static_cast<double>(ss), -cmd, -rcd, -fpp, -pu}; }
  bool operator==(const ObjectiveVector&) const = default;
};

Json objectives_to_json(const ObjectiveVector& o);

struct ObjectiveOptions {
  // Use count_identical/nv as printed instead of 1 - count_identical/nv.
  bool literal_similarity = false;
};

/// 1 - (number of equal fields)/nv, or the equal share itself if `literal`.
double pair_divergence(const CancerMessage& a, const CancerMessage& b, const MessageSchema& schema,
                       bool literal = false);

std::size_t objective_ss(const Solution& sol);
double objective_cmd(const Solution& sol, const CandidateSet& c, const ObjectiveOptions& opt = {});
double objective_rcd(const Solution& sol, const CandidateSet& c);
double objective_fpp(const Solution& sol, const CandidateSet& c);
double objective_pu(const Solution& sol, const CandidateSet& c);

/// Jensen-Shannon divergence (natural log) of two distributions over the
/// four codes. Throws ConfigError on negative or unnormalised input.
double js_divergence(const std::array<double, 4>& p, const std::array<double, 4>& q);

/// Shannon entropy (natural log). Throws ConfigError unless pv is a distribution.
double entropy(const std::array<double, 4>& pv);

/// Mean entropy over the rules of one message's prediction.
double message_uncertainty(const Prediction& prediction);

/// Code frequencies. Throws ConfigError on an empty input.
std::array<double, 4> result_code_distribution(std::span<const ResultCode> codes);

/// All five objectives from the cached data only.
ObjectiveVector evaluate_solution(const Solution& sol, const CandidateSet& c, const ObjectiveOptions& opt = {});

}  // namespace ccdt
