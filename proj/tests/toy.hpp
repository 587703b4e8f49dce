#pragma once

// Small candidate pools and brute-force objective oracles shared by the unit
// tests and the acceptance binary. The oracles recompute everything from the
// raw messages and probability vectors without the library's caches.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ccdt/ibea.hpp"
#include "ccdt/objectives.hpp"
#include "ccdt/schema.hpp"

namespace ccdt::toy {

/// `nc` generated messages with random predictions over `nr` rules. A few
/// duplicates are planted so that CMD sees equal messages.
inline CandidateSet candidates(std::size_t nc, std::size_t nr, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto data = generate_messages(default_schema(), nc, seed, 0.0);
  if (nc >= 4) data.messages[nc - 1] = data.messages[0];
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Prediction> preds(nc);
  std::vector<std::vector<ResultCode>> truth(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t r = 0; r < nr; ++r) {
      std::array<double, 4> pv{};
      // Mostly peaked vectors, some flat ones.
      const double sharp = u(gen) < 0.7 ? 4.0 : 0.5;
      double sum = 0.0;
      for (auto& v : pv) {
        v = std::pow(u(gen), sharp) + 1e-3;
        sum += v;
      }
      for (auto& v : pv) v /= sum;
      preds[i].push_back(pv);
      truth[i].push_back(u(gen) < 0.8 ? predicted_code(pv) : code_at(gen() % 4));
    }
  }
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < nr; ++r) ids.push_back("R" + std::to_string(r + 1));
  return make_candidate_set(std::move(data), std::move(ids), std::move(preds), std::move(truth));
}

inline std::size_t argmax(const std::array<double, 4>& p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < 4; ++k)
    if (p[k] > p[best]) best = k;
  return best;
}

inline double js(const std::array<double, 4>& p, const std::array<double, 4>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const double m = 0.5 * (p[k] + q[k]);
    if (p[k] > 0) s += 0.5 * p[k] * std::log(p[k] / m);
    if (q[k] > 0) s += 0.5 * q[k] * std::log(q[k] / m);
  }
  return s;
}

inline double entropy(const std::array<double, 4>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0) h -= v * std::log(v);
  return h;
}

/// Objectives of the subset `idx` straight from the definitions.
inline ObjectiveVector brute_force(const CandidateSet& c, const std::vector<std::size_t>& idx) {
  ObjectiveVector o;
  o.ss = idx.size();
  const auto& msgs = c.data.messages;
  const std::size_t nv = c.data.schema->nv();
  if (idx.size() >= 2) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        std::size_t diff = 0;
        for (std::size_t f = 0; f < nv; ++f) diff += msgs[idx[a]].values[f] == msgs[idx[b]].values[f] ? 0 : 1;
        sum += static_cast<double>(diff) / static_cast<double>(nv);
        ++pairs;
      }
    o.cmd = sum / static_cast<double>(pairs);
  }
  const std::size_t nr = c.rule_ids.size();
  double rcd = 0.0;
  for (std::size_t r = 0; r < nr; ++r) {
    std::array<double, 4> sub{}, all{};
    for (auto i : idx) sub[argmax(c.predictions[i][r])] += 1.0 / static_cast<double>(idx.size());
    for (std::size_t i = 0; i < c.data.size(); ++i)
      all[argmax(c.predictions[i][r])] += 1.0 / static_cast<double>(c.data.size());
    rcd += js(sub, all);
  }
  o.rcd = -rcd / static_cast<double>(nr);
  std::size_t wrong = 0;
  double pu = 0.0;
  for (auto i : idx) {
    bool miss = false;
    double h = 0.0;
    for (std::size_t r = 0; r < nr; ++r) {
      miss = miss || code_at(argmax(c.predictions[i][r])) != c.truth[i][r];
      h += entropy(c.predictions[i][r]);
    }
    wrong += miss ? 1 : 0;
    pu += h / static_cast<double>(nr);
  }
  o.fpp = static_cast<double>(wrong) / static_cast<double>(idx.size());
  o.pu = pu / static_cast<double>(idx.size());
  return o;
}

inline std::vector<std::size_t> bits(std::uint64_t mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; mask >> i; ++i)
    if ((mask >> i) & 1u) idx.push_back(i);
  return idx;
}

/// Pareto-optimal objective vectors over every subset with at least two members.
inline std::vector<std::array<double, 5>> exhaustive_front(const CandidateSet& c) {
  std::vector<std::array<double, 5>> all;
  for (std::uint64_t m = 1; m < (std::uint64_t{1} << c.nc()); ++m) {
    auto idx = bits(m);
    if (idx.size() < 2) continue;
    all.push_back(evaluate_solution(Solution::from_indices(c.nc(), idx), c).minimised());
  }
  std::vector<std::array<double, 5>> front;
  for (const auto& a : all) {
    bool dominated = false;
    for (const auto& b : all)
      if (dominates(b, a)) {
        dominated = true;
        break;
      }
    if (!dominated && std::find(front.begin(), front.end(), a) == front.end()) front.push_back(a);
  }
  return front;
}

/// Share of `exact` vectors found (within 1e-9) among the search's front.
inline double coverage(const std::vector<std::array<double, 5>>& exact, const std::vector<FrontMember>& found) {
  std::size_t hit = 0;
  for (const auto& e : exact) {
    for (const auto& f : found) {
      const auto v = f.objectives.minimised();
      bool same = true;
      for (std::size_t k = 0; k < 5; ++k) same = same && std::fabs(v[k] - e[k]) <= 1e-9;
      if (same) {
        ++hit;
        break;
      }
    }
  }
  return exact.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(exact.size());
}

}  // namespace ccdt::toy
