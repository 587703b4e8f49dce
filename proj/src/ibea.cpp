#include "ccdt/ibea.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "ccdt/error.hpp"
#include "ccdt/random.hpp"

namespace ccdt {

std::string_view to_string(PickPolicy p) noexcept {
  return p == PickPolicy::fill_budget ? "fill-budget" : "scalarized";
}

PickPolicy parse_pick_policy(std::string_view text) {
  if (text == "fill-budget") return PickPolicy::fill_budget;
  if (text == "scalarized") return PickPolicy::scalarized;
  throw ConfigError("unknown pick policy '" + std::string(text) + "' (expected fill-budget or scalarized)");
}

SearchConfig SearchConfig::resolved(std::size_t nc) const {
  SearchConfig c = *this;
  if (nc < 2) throw ConfigError("search needs at least 2 candidates");
  if (c.mutation_prob == 0.0) c.mutation_prob = 1.0 / static_cast<double>(nc);
  if (c.budget == 0) c.budget = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(nc)));
  if (c.population_size < 2) throw ConfigError("population_size must be at least 2");
  if (c.max_evaluations < c.population_size) throw ConfigError("max_evaluations must be >= population_size");
  if (!(c.crossover_prob >= 0.0 && c.crossover_prob <= 1.0)) throw ConfigError("crossover_prob must be in [0,1]");
  if (!(c.mutation_prob > 0.0 && c.mutation_prob <= 1.0)) throw ConfigError("mutation_prob must be in (0,1]");
  if (!(c.kappa > 0.0)) throw ConfigError("kappa must be positive");
  return c;
}

Json search_to_json(const SearchConfig& cfg) {
  Json j;
  j["algorithm"] = "IBEA";
  j["indicator"] = "additive-epsilon";
  j["population_size"] = cfg.population_size;
  j["max_evaluations"] = cfg.max_evaluations;
  j["crossover"] = "single-point";
  j["crossover_prob"] = cfg.crossover_prob;
  j["mutation"] = "bit-flip";
  j["mutation_prob"] = cfg.mutation_prob;
  j["kappa"] = cfg.kappa;
  j["seed"] = cfg.seed;
  j["budget"] = cfg.budget;
  j["literal_similarity"] = cfg.literal_similarity;
  j["external_archive"] = cfg.external_archive;
  j["duplicate_retries"] = cfg.duplicate_retries;
  j["pick"] = to_string(cfg.pick);
  return j;
}

SearchConfig search_from_json(const Json& doc) {
  SearchConfig c;
  reject_unknown_keys(doc, search_to_json(c), "search");
  c.population_size = doc.value("population_size", c.population_size);
  c.max_evaluations = doc.value("max_evaluations", c.max_evaluations);
  c.crossover_prob = doc.value("crossover_prob", c.crossover_prob);
  c.mutation_prob = doc.value("mutation_prob", c.mutation_prob);
  c.kappa = doc.value("kappa", c.kappa);
  c.seed = doc.value("seed", c.seed);
  c.budget = doc.value("budget", c.budget);
  c.literal_similarity = doc.value("literal_similarity", c.literal_similarity);
  c.external_archive = doc.value("external_archive", c.external_archive);
  c.duplicate_retries = doc.value("duplicate_retries", c.duplicate_retries);
  if (doc.contains("pick")) c.pick = parse_pick_policy(doc["pick"].get<std::string>());
  return c;
}

bool dominates(const std::array<double, 5>& a, const std::array<double, 5>& b) {
  bool better = false;
  for (std::size_t i = 0; i < 5; ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) better = true;
  }
  return better;
}

std::vector<FrontMember> non_dominated(const std::vector<FrontMember>& members) {
  std::vector<FrontMember> out;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto fi = members[i].objectives.minimised();
    bool keep = true;
    for (std::size_t j = 0; j < members.size() && keep; ++j) {
      if (j == i) continue;
      const auto fj = members[j].objectives.minimised();
      if (dominates(fj, fi) || (j < i && fj == fi)) keep = false;
    }
    if (keep) out.push_back(members[i]);
  }
  return out;
}

namespace {

class Archive {
 public:
  void insert(const Solution& s, const ObjectiveVector& o) {
    const auto f = o.minimised();
    for (const auto& m : members_) {
      const auto g = m.objectives.minimised();
      if (g == f || dominates(g, f)) return;
    }
    std::erase_if(members_, [&](const FrontMember& m) { return dominates(f, m.objectives.minimised()); });
    members_.push_back({s, o});
  }
  const std::vector<FrontMember>& members() const { return members_; }

 private:
  std::vector<FrontMember> members_;
};

struct Individual {
  Solution solution;
  ObjectiveVector objectives;
  double fitness = 0.0;
};

void repair(Solution& s, Rng& rng) {
  while (s.count() < 2) s.set(uniform_index(rng, s.universe()));
}

void mutate(Solution& s, double p, Rng& rng) {
  for (std::size_t i = 0; i < s.universe(); ++i)
    if (bernoulli(rng, p)) s.flip(i);
}

// Additive epsilon indicator on normalised objectives, fitness assignment and
// iterative truncation to `keep` members.
void environmental_selection(std::vector<Individual>& pool, std::size_t keep, double kappa) {
  const std::size_t n = pool.size();
  std::array<double, 5> lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  std::vector<std::array<double, 5>> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = pool[i].objectives.minimised();
    for (std::size_t k = 0; k < 5; ++k) {
      lo[k] = std::min(lo[k], f[i][k]);
      hi[k] = std::max(hi[k], f[i][k]);
    }
  }
  for (auto& v : f)
    for (std::size_t k = 0; k < 5; ++k) v[k] = hi[k] > lo[k] ? (v[k] - lo[k]) / (hi[k] - lo[k]) : 0.0;

  // ind[a * n + b] = I(a, b): smallest shift making a weakly dominate b.
  std::vector<double> ind(n * n, 0.0);
  double c = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      double e = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < 5; ++k) e = std::max(e, f[a][k] - f[b][k]);
      ind[a * n + b] = e;
      c = std::max(c, std::fabs(e));
    }
  }
  if (c == 0.0) c = 1.0;
  const double scale = c * kappa;
  std::vector<double> fit(n, 0.0);
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      if (y != x) fit[x] -= std::exp(-ind[y * n + x] / scale);

  std::vector<char> alive(n, 1);
  std::size_t remaining = n;
  while (remaining > keep) {
    std::size_t worst = n;
    for (std::size_t x = 0; x < n; ++x)
      if (alive[x] && (worst == n || fit[x] < fit[worst])) worst = x;
    alive[worst] = 0;
    --remaining;
    for (std::size_t x = 0; x < n; ++x)
      if (alive[x]) fit[x] += std::exp(-ind[worst * n + x] / scale);
  }
  std::vector<Individual> next;
  next.reserve(keep);
  for (std::size_t x = 0; x < n; ++x) {
    if (!alive[x]) continue;
    pool[x].fitness = fit[x];
    next.push_back(std::move(pool[x]));
  }
  pool = std::move(next);
}

std::size_t tournament(const std::vector<Individual>& pop, Rng& rng) {
  std::size_t a = uniform_index(rng, pop.size());
  std::size_t b = uniform_index(rng, pop.size());
  return pop[b].fitness > pop[a].fitness ? b : a;
}

}  // namespace

SearchResult ibea_search(const CandidateSet& candidates, const SearchConfig& cfg_in) {
  const std::size_t nc = candidates.nc();
  const SearchConfig cfg = cfg_in.resolved(nc);
  const ObjectiveOptions opt{cfg.literal_similarity};
  Rng rng(derive_seed(cfg.seed, "ibea"));
  Archive archive;
  SearchResult result;
  result.config = cfg;

  // Every subset evaluated so far. Offspring that repeat one are re-mutated
  // (up to duplicate_retries times) before spending an evaluation.
  std::unordered_set<Solution, SolutionHash> seen;

  auto evaluate = [&](Individual& ind) {
    seen.insert(ind.solution);
    ind.objectives = evaluate_solution(ind.solution, candidates, opt);
    ++result.evaluations;
    if (cfg.external_archive) archive.insert(ind.solution, ind.objectives);
  };

  std::vector<Individual> population;
  population.reserve(2 * cfg.population_size);
  for (std::size_t i = 0; i < cfg.population_size; ++i) {
    // Densities spread over (0, 1] so the initial population spans subset sizes.
    const double density = 1.0 - uniform01(rng);
    Individual ind{Solution(nc), {}, 0.0};
    for (std::size_t b = 0; b < nc; ++b)
      if (bernoulli(rng, density)) ind.solution.set(b);
    repair(ind.solution, rng);
    evaluate(ind);
    population.push_back(std::move(ind));
  }
  environmental_selection(population, cfg.population_size, cfg.kappa);

  while (result.evaluations < cfg.max_evaluations) {
    ++result.generations;
    const std::size_t n_off = std::min(cfg.population_size, cfg.max_evaluations - result.evaluations);
    std::vector<Individual> offspring;
    offspring.reserve(n_off);
    while (offspring.size() < n_off) {
      const auto& p1 = population[tournament(population, rng)].solution;
      const auto& p2 = population[tournament(population, rng)].solution;
      Solution c1 = p1, c2 = p2;
      if (bernoulli(rng, cfg.crossover_prob) && nc > 1) {
        const std::size_t cut = 1 + uniform_index(rng, nc - 1);
        for (std::size_t b = cut; b < nc; ++b) {
          c1.set(b, p2.test(b));
          c2.set(b, p1.test(b));
        }
      }
      for (Solution* child : {&c1, &c2}) {
        if (offspring.size() >= n_off) break;
        mutate(*child, cfg.mutation_prob, rng);
        repair(*child, rng);
        for (std::size_t t = 0; t < cfg.duplicate_retries && seen.count(*child); ++t) {
          child->flip(uniform_index(rng, nc));
          repair(*child, rng);
        }
        Individual ind{std::move(*child), {}, 0.0};
        evaluate(ind);
        offspring.push_back(std::move(ind));
      }
    }
    for (auto& o : offspring) population.push_back(std::move(o));
    environmental_selection(population, cfg.population_size, cfg.kappa);
  }

  if (cfg.external_archive) {
    result.front = archive.members();
  } else {
    std::vector<FrontMember> members;
    for (const auto& ind : population) members.push_back({ind.solution, ind.objectives});
    result.front = non_dominated(members);
  }
  return result;
}

std::size_t pick_solution(const std::vector<FrontMember>& front, std::size_t budget, PickPolicy policy) {
  if (front.empty()) throw ConfigError("cannot pick from an empty front");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < front.size(); ++i)
    if (front[i].objectives.ss <= budget) eligible.push_back(i);
  if (eligible.empty()) {
    std::size_t min_ss = front[0].objectives.ss;
    for (const auto& m : front) min_ss = std::min(min_ss, m.objectives.ss);
    for (std::size_t i = 0; i < front.size(); ++i)
      if (front[i].objectives.ss == min_ss) eligible.push_back(i);
  }
  if (policy == PickPolicy::fill_budget) {
    std::size_t max_ss = 0;
    for (auto i : eligible) max_ss = std::max(max_ss, front[i].objectives.ss);
    std::erase_if(eligible, [&](std::size_t i) { return front[i].objectives.ss != max_ss; });
  }
  auto metric = [&](std::size_t i, int k) {
    const auto& o = front[i].objectives;
    switch (k) {
      case 0: return o.cmd;
      case 1: return o.rcd;
      case 2: return o.fpp;
      default: return o.pu;
    }
  };
  std::array<double, 4> lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (auto i : eligible)
    for (int k = 0; k < 4; ++k) {
      lo[k] = std::min(lo[k], metric(i, k));
      hi[k] = std::max(hi[k], metric(i, k));
    }
  std::size_t best = eligible[0];
  double best_score = -1.0;
  for (auto i : eligible) {
    double score = 0.0;
    for (int k = 0; k < 4; ++k) score += hi[k] > lo[k] ? (metric(i, k) - lo[k]) / (hi[k] - lo[k]) : 0.0;
    const bool better = score > best_score ||
                        (score == best_score && front[i].objectives.ss < front[best].objectives.ss);
    if (better) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

Json selection_report(const SearchResult& result, std::size_t chosen) {
  Json j;
  j["seed"] = result.config.seed;
  j["config"] = search_to_json(result.config);
  j["evaluations"] = result.evaluations;
  j["generations"] = result.generations;
  j["chosen_index"] = chosen;
  j["chosen"] = {{"mask", encode_mask(result.front.at(chosen).solution)},
                 {"objectives", objectives_to_json(result.front[chosen].objectives)}};
  Json front = Json::array();
  for (const auto& m : result.front) front.push_back({{"mask", encode_mask(m.solution)}, {"objectives", objectives_to_json(m.objectives)}});
  j["front"] = std::move(front);
  return j;
}

}  // namespace ccdt
