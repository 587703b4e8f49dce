#include "ccdt/objectives.hpp"

#include <bit>
#include <cmath>
#include <map>

#include "ccdt/error.hpp"

namespace ccdt {

std::size_t Solution::count() const noexcept {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

std::vector<std::size_t> Solution::indices() const {
  std::vector<std::size_t> out;
  out.reserve(count());
  for (std::size_t w = 0; w < words_.size(); ++w) {
    std::uint64_t bits = words_[w];
    while (bits) {
      out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
      bits &= bits - 1;
    }
  }
  return out;
}

Solution Solution::from_indices(std::size_t n, const std::vector<std::size_t>& idx) {
  Solution s(n);
  for (auto i : idx) {
    if (i >= n) throw ShapeError("solution index " + std::to_string(i) + " outside pool of " + std::to_string(n));
    s.set(i);
  }
  return s;
}

std::size_t SolutionHash::operator()(const Solution& s) const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (auto w : s.words()) {
    h ^= w;
    h *= 1099511628211ull;
    h ^= h >> 29;
  }
  return static_cast<std::size_t>(h);
}

Json encode_mask(const Solution& s) {
  Json runs = Json::array();
  bool current = false;
  std::size_t run = 0;
  for (std::size_t i = 0; i < s.universe(); ++i) {
    if (s.test(i) == current) {
      ++run;
    } else {
      runs.push_back(run);
      current = !current;
      run = 1;
    }
  }
  runs.push_back(run);
  Json j;
  j["size"] = s.universe();
  j["runs"] = std::move(runs);
  return j;
}

Solution decode_mask(const Json& doc) {
  try {
    Solution s(doc.at("size").get<std::size_t>());
    std::size_t pos = 0;
    bool on = false;
    for (const auto& r : doc.at("runs")) {
      auto len = r.get<std::size_t>();
      if (pos + len > s.universe()) throw FormatError("mask runs exceed mask size");
      if (on)
        for (std::size_t i = pos; i < pos + len; ++i) s.set(i);
      pos += len;
      on = !on;
    }
    if (pos != s.universe()) throw FormatError("mask runs do not cover the mask");
    return s;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("mask: ") + e.what());
  }
}

// ---- scalar pieces -------------------------------------------------------------

namespace {

void check_distribution(const std::array<double, 4>& p, double tol, const char* what) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + ": negative or non-finite entry");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > tol) throw ConfigError(std::string(what) + ": entries do not sum to 1");
}

double kl_to_mixture(const std::array<double, 4>& p, const std::array<double, 4>& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / m[i]);
  return s;
}

double entropy_unchecked(const std::array<double, 4>& pv) {
  double h = 0.0;
  for (double p : pv)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace

double js_divergence(const std::array<double, 4>& p, const std::array<double, 4>& q) {
  check_distribution(p, 1e-9, "js_divergence");
  check_distribution(q, 1e-9, "js_divergence");
  std::array<double, 4> m{};
  for (std::size_t i = 0; i < 4; ++i) m[i] = 0.5 * (p[i] + q[i]);
  double js = 0.5 * kl_to_mixture(p, m) + 0.5 * kl_to_mixture(q, m);
  return std::max(0.0, js);
}

double entropy(const std::array<double, 4>& pv) {
  check_distribution(pv, 1e-6, "entropy");
  return entropy_unchecked(pv);
}

double message_uncertainty(const Prediction& prediction) {
  if (prediction.empty()) return 0.0;
  double s = 0.0;
  for (const auto& pv : prediction) s += entropy(pv);
  return s / static_cast<double>(prediction.size());
}

std::array<double, 4> result_code_distribution(std::span<const ResultCode> codes) {
  if (codes.empty()) throw ConfigError("result code distribution of an empty message set");
  std::array<double, 4> d{};
  for (auto c : codes) d[index_of(c)] += 1.0;
  for (auto& v : d) v /= static_cast<double>(codes.size());
  return d;
}

double pair_divergence(const CancerMessage& a, const CancerMessage& b, const MessageSchema& schema, bool literal) {
  if (a.values.size() != schema.nv() || b.values.size() != schema.nv())
    throw ShapeError("pair_divergence: messages do not match the schema");
  std::size_t same = 0;
  for (std::size_t f = 0; f < schema.nv(); ++f) same += a.values[f] == b.values[f] ? 1 : 0;
  double share = static_cast<double>(same) / static_cast<double>(schema.nv());
  return literal ? share : 1.0 - share;
}

// ---- candidate set ---------------------------------------------------------------

CandidateSet make_candidate_set(Dataset data, std::vector<std::string> rule_ids, std::vector<Prediction> predictions,
                                std::vector<std::vector<ResultCode>> truth) {
  const std::size_t n = data.size();
  if (predictions.size() != n || truth.size() != n)
    throw ShapeError("candidate caches are not aligned with the candidate messages");
  for (std::size_t i = 0; i < n; ++i) {
    if (predictions[i].size() != rule_ids.size() || truth[i].size() != rule_ids.size())
      throw ShapeError("candidate " + std::to_string(i) + " has the wrong number of rule entries");
  }
  CandidateSet c;
  c.data = std::move(data);
  c.rule_ids = std::move(rule_ids);
  c.predictions = std::move(predictions);
  c.truth = std::move(truth);
  c.predicted = predicted_codes(c.predictions);

  const std::size_t nr = c.rule_ids.size();
  c.reference.assign(nr, std::array<double, 4>{});
  c.mispredicted.assign(n, 0);
  c.uncertainty.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < nr; ++r) {
      c.reference[r][index_of(c.predicted[i][r])] += 1.0;
      if (c.predicted[i][r] != c.truth[i][r]) c.mispredicted[i] = 1;
    }
    c.uncertainty[i] = message_uncertainty(c.predictions[i]);
  }
  if (n > 0)
    for (auto& d : c.reference)
      for (auto& v : d) v /= static_cast<double>(n);

  const std::size_t nv = c.data.schema ? c.data.schema->nv() : 0;
  c.value_ids.assign(n, std::vector<std::uint32_t>(nv, 0));
  c.value_counts.assign(nv, 0);
  for (std::size_t f = 0; f < nv; ++f) {
    std::map<FieldValue, std::uint32_t> ids;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, inserted] = ids.try_emplace(c.data.messages[i].values[f], static_cast<std::uint32_t>(ids.size()));
      c.value_ids[i][f] = it->second;
    }
    c.value_counts[f] = ids.size();
  }
  return c;
}

CandidateSet build_candidate_set(const Dataset& data, const CCDT& source_model, const RuleSet& source_rules) {
  auto preds = predict_batch(source_model, data);
  auto labelled = validate_batch(data, source_rules);
  std::vector<std::size_t> cols;
  for (const auto& id : source_model.rule_ids) {
    auto c = labelled.rule_index(id);
    if (!c) throw ConfigError("source rule set has no rule " + id + " for the model's module");
    cols.push_back(*c);
  }
  std::vector<std::vector<ResultCode>> truth(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    for (auto c : cols) truth[i].push_back(labelled.labels[i][c]);
  return make_candidate_set(data, source_model.rule_ids, std::move(preds), std::move(truth));
}

// ---- objectives ----------------------------------------------------------------

Json objectives_to_json(const ObjectiveVector& o) {
  Json j;
  j["SS"] = o.ss;
  j["CMD"] = o.cmd;
  j["RCD"] = o.rcd;
  j["FPP"] = o.fpp;
  j["PU"] = o.pu;
  return j;
}

std::size_t objective_ss(const Solution& sol) { return sol.count(); }

double objective_cmd(const Solution& sol, const CandidateSet& c, const ObjectiveOptions& opt) {
  const auto idx = sol.indices();
  const std::size_t k = idx.size();
  if (k < 2) return 0.0;
  // Equal-field pairs counted per field from value frequencies instead of
  // enumerating all pairs.
  const std::size_t nv = c.nv();
  double identical = 0.0;
  std::vector<std::uint32_t> freq;
  for (std::size_t f = 0; f < nv; ++f) {
    freq.assign(c.value_counts[f], 0);
    for (auto i : idx) ++freq[c.value_ids[i][f]];
    for (auto n : freq) identical += 0.5 * static_cast<double>(n) * static_cast<double>(n - (n > 0 ? 1 : 0));
  }
  const double pairs = 0.5 * static_cast<double>(k) * static_cast<double>(k - 1);
  const double share = identical / (pairs * static_cast<double>(nv));
  return opt.literal_similarity ? share : 1.0 - share;
}

double objective_rcd(const Solution& sol, const CandidateSet& c) {
  const auto idx = sol.indices();
  if (idx.empty()) throw ConfigError("RCD needs a non-empty solution");
  const std::size_t nr = c.nr();
  if (nr == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < nr; ++r) {
    std::array<double, 4> d{};
    for (auto i : idx) d[index_of(c.predicted[i][r])] += 1.0;
    for (auto& v : d) v /= static_cast<double>(idx.size());
    total += js_divergence(d, c.reference[r]);
  }
  return -total / static_cast<double>(nr);
}

double objective_fpp(const Solution& sol, const CandidateSet& c) {
  const auto idx = sol.indices();
  if (idx.empty()) return 0.0;
  std::size_t fp = 0;
  for (auto i : idx) fp += c.mispredicted[i];
  return static_cast<double>(fp) / static_cast<double>(idx.size());
}

double objective_pu(const Solution& sol, const CandidateSet& c) {
  const auto idx = sol.indices();
  if (idx.empty()) return 0.0;
  double s = 0.0;
  for (auto i : idx) s += c.uncertainty[i];
  return s / static_cast<double>(idx.size());
}

ObjectiveVector evaluate_solution(const Solution& sol, const CandidateSet& c, const ObjectiveOptions& opt) {
  if (sol.universe() != c.nc()) throw ShapeError("solution size does not match the candidate pool");
  ObjectiveVector o;
  o.ss = objective_ss(sol);
  o.cmd = objective_cmd(sol, c, opt);
  o.rcd = objective_rcd(sol, c);
  o.fpp = objective_fpp(sol, c);
  o.pu = objective_pu(sol, c);
  return o;
}

}  // namespace ccdt
