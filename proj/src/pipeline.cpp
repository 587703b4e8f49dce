#include "ccdt/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ccdt/error.hpp"
#include "ccdt/random.hpp"

namespace ccdt {

void EvolutionConfig::validate() const {
  if (!(inconsistent_target_fraction > 0.0 && inconsistent_target_fraction < 1.0))
    throw ConfigError("inconsistent_target_fraction must be in (0,1)");
  if (max_duplication < 1) throw ConfigError("max_duplication must be at least 1");
  fine_tune.training.validate();
  scratch_training.validate();
}

Json evolution_to_json(const EvolutionConfig& cfg) {
  Json j;
  j["inconsistent_target_fraction"] = cfg.inconsistent_target_fraction;
  j["max_duplication"] = cfg.max_duplication;
  j["extra_sample_size"] = cfg.extra_sample_size ? Json(*cfg.extra_sample_size) : Json("balanced");
  j["fine_tune"] = training_to_json(cfg.fine_tune.training);
  j["modified_from_scratch"] = cfg.fine_tune.modified_from_scratch;
  j["scratch_training"] = training_to_json(cfg.scratch_training);
  j["seed"] = cfg.seed;
  return j;
}

EvolutionConfig evolution_from_json(const Json& doc) {
  EvolutionConfig c;
  reject_unknown_keys(doc, evolution_to_json(c), "evolution");
  c.inconsistent_target_fraction = doc.value("inconsistent_target_fraction", c.inconsistent_target_fraction);
  c.max_duplication = doc.value("max_duplication", c.max_duplication);
  if (doc.contains("extra_sample_size") && doc["extra_sample_size"].is_number_unsigned())
    c.extra_sample_size = doc["extra_sample_size"].get<std::size_t>();
  if (doc.contains("fine_tune")) c.fine_tune.training = training_from_json(doc["fine_tune"], c.fine_tune.training);
  c.fine_tune.modified_from_scratch = doc.value("modified_from_scratch", false);
  if (doc.contains("scratch_training")) c.scratch_training = training_from_json(doc["scratch_training"], c.scratch_training);
  c.seed = doc.value("seed", c.seed);
  c.validate();
  return c;
}

BalancePlan plan_balance(std::size_t n_inc, std::size_t n_con, double f, std::size_t max_dup) {
  BalancePlan p{n_inc, n_con, false};
  const std::size_t n = n_inc + n_con;
  if (n_inc == 0 || n_con == 0) return p;
  if (static_cast<double>(n_inc) / static_cast<double>(n) >= f) return p;
  const auto k = static_cast<std::size_t>(std::llround(f * static_cast<double>(n_con) / (1.0 - f)));
  const std::size_t cap = max_dup * n_inc;
  p.resampled = true;
  if (k <= cap) {
    p.inconsistent_rows = std::max(k, n_inc);
  } else {
    p.inconsistent_rows = cap;
    p.consistent_rows = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(static_cast<double>(cap) * (1.0 - f) / f)), 1, n_con);
  }
  return p;
}

AugmentResult augment(const LabelledDataset& selected, const CCDT& source, const EvolutionConfig& cfg,
                      std::uint64_t seed) {
  AugmentResult out;
  const std::size_t n = selected.size();
  std::vector<std::pair<std::size_t, std::size_t>> shared;  // (model module, label column)
  for (std::size_t m = 0; m < source.size(); ++m)
    if (auto col = selected.rule_index(source.rule_ids[m])) shared.emplace_back(m, *col);

  out.inconsistent.assign(n, 0);
  if (n > 0 && !shared.empty()) {
    const auto preds = predict_batch(source, selected.data);
    for (std::size_t i = 0; i < n; ++i)
      for (auto [m, col] : shared)
        if (predicted_code(preds[i][m]) != selected.labels[i][col]) {
          out.inconsistent[i] = 1;
          break;
        }
  }
  std::vector<std::size_t> inc, con;
  for (std::size_t i = 0; i < n; ++i) (out.inconsistent[i] ? inc : con).push_back(i);
  out.n_inconsistent = inc.size();
  if (inc.empty()) out.warnings.push_back("no inconsistent messages; balanced set equals the selection");

  const auto plan = plan_balance(inc.size(), con.size(), cfg.inconsistent_target_fraction, cfg.max_duplication);
  out.resampled = plan.resampled;
  Rng rng(seed);
  std::vector<char> keep(n, 1);
  if (plan.consistent_rows < con.size()) {
    auto pick = con;
    shuffle(pick.begin(), pick.end(), rng);
    for (std::size_t k = plan.consistent_rows; k < pick.size(); ++k) keep[pick[k]] = 0;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.rows.push_back(i);
  std::vector<std::size_t> copies(n, 1);
  for (std::size_t extra = inc.size(); extra < plan.inconsistent_rows; ++extra) {
    std::vector<std::size_t> open;
    for (auto i : inc)
      if (copies[i] < cfg.max_duplication) open.push_back(i);
    if (open.empty()) break;
    const std::size_t i = open[uniform_index(rng, open.size())];
    ++copies[i];
    out.rows.push_back(i);
  }
  out.balanced = subset(selected, out.rows);
  return out;
}

LabelledDataset EvolutionDataset::combined() const {
  if (sampled.size() == 0) return balanced;
  if (balanced.size() == 0) return sampled;
  return concat(balanced, sampled);
}

Json EvolutionDataset::provenance() const {
  Json j;
  j["solution"] = encode_mask(solution);
  j["selected"] = solution.count();
  j["inconsistent"] = n_inconsistent;
  j["balanced_size"] = balanced.size();
  j["duplicated_rows"] = std::count(duplicated.begin(), duplicated.end(), 1);
  j["sampled_size"] = sampled.size();
  j["queries"] = queries;
  j["warnings"] = warnings;
  return j;
}

Solution random_subset(std::size_t nc, std::size_t size, std::uint64_t seed) {
  if (size > nc) throw ConfigError("random subset larger than the pool");
  std::vector<std::size_t> idx(nc);
  for (std::size_t i = 0; i < nc; ++i) idx[i] = i;
  Rng rng(seed);
  // Partial Fisher-Yates: the first `size` entries are the sample.
  for (std::size_t i = 0; i < size; ++i) std::swap(idx[i], idx[i + uniform_index(rng, nc - i)]);
  idx.resize(size);
  return Solution::from_indices(nc, idx);
}

EvolutionDataset build_evolution_dataset(const CandidateSet& candidates, const Solution& solution,
                                         QueryClient& target, const CCDT& source, const EvolutionConfig& cfg) {
  cfg.validate();
  if (solution.universe() != candidates.nc()) throw ShapeError("solution does not match the candidate pool");
  EvolutionDataset ed;
  ed.solution = solution;
  const auto chosen = solution.indices();
  const auto selected = target.query(subset(candidates.data, chosen));
  auto aug = augment(selected, source, cfg, derive_seed(cfg.seed, "augment"));
  ed.balanced = std::move(aug.balanced);
  ed.n_inconsistent = aug.n_inconsistent;
  ed.warnings = std::move(aug.warnings);
  std::vector<char> seen(chosen.size(), 0);
  for (auto r : aug.rows) {
    ed.balanced_candidates.push_back(chosen[r]);
    ed.duplicated.push_back(seen[r]);
    seen[r] = 1;
  }

  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < candidates.nc(); ++i)
    if (!solution.test(i)) pool.push_back(i);
  std::size_t extra = cfg.extra_sample_size.value_or(ed.balanced.size());
  if (extra > pool.size()) {
    ed.warnings.push_back("extra sample of " + std::to_string(extra) + " exceeds the remaining pool of " +
                          std::to_string(pool.size()));
    extra = pool.size();
  }
  Rng rng(derive_seed(cfg.seed, "extra-sample"));
  for (std::size_t i = 0; i < extra; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
  pool.resize(extra);
  std::sort(pool.begin(), pool.end());
  ed.sampled_candidates = pool;
  if (extra > 0) {
    ed.sampled = target.query(subset(candidates.data, pool));
  } else {
    ed.sampled = LabelledDataset{Dataset{candidates.data.schema, {}, candidates.data.seed}, selected.rule_ids, {}};
  }
  ed.queries = chosen.size() + extra;
  return ed;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

Json base_report(std::string_view method, const RuleSet& source_rules, const RuleSet& target_rules,
                 const EvolutionConfig& cfg) {
  Json r;
  r["method"] = method;
  r["source_version"] = source_rules.version();
  r["target_version"] = target_rules.version();
  r["evolution_config"] = evolution_to_json(cfg);
  return r;
}

}  // namespace

RunResult evolve(const CCDT& source, const RuleSet& source_rules, const RuleSet& target_rules, QueryClient& target,
                 const CandidateSet& candidates, const SearchConfig& search, const EvolutionConfig& cfg) {
  const auto t0 = Clock::now();
  Json report = base_report("EvoCLINICAL", source_rules, target_rules, cfg);
  const auto found = ibea_search(candidates, search);
  const std::size_t chosen = pick_solution(found.front, found.config.budget, found.config.pick);
  const auto t_search = seconds_since(t0);

  const auto before = target.count();
  const auto t1 = Clock::now();
  auto ed = build_evolution_dataset(candidates, found.front[chosen].solution, target, source, cfg);
  const auto t_query = seconds_since(t1);

  const auto t2 = Clock::now();
  const auto diff = diff_rulesets(source_rules, target_rules);
  RunResult out{fine_tune(source, target_rules, diff, ed.combined(), cfg.fine_tune), ed.solution,
                target.count() - before, {}};
  const auto t_train = seconds_since(t2);

  report["search"] = search_to_json(found.config);
  report["evaluations"] = found.evaluations;
  report["front_size"] = found.front.size();
  report["chosen_objectives"] = objectives_to_json(found.front[chosen].objectives);
  report["evolution_dataset"] = ed.provenance();
  report["query_count"] = out.queries;
  report["modules"] = out.model.size();
  if (cfg.record_timings)
    report["timings"] = {{"search_s", t_search}, {"query_s", t_query}, {"fine_tune_s", t_train}};
  out.report = std::move(report);
  return out;
}

std::string_view to_string(Baseline b) noexcept {
  switch (b) {
    case Baseline::tfs: return "TFS";
    case Baseline::ots: return "OTS";
    case Baseline::rs: return "RS";
  }
  return "?";
}

Baseline parse_baseline(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "tfs") return Baseline::tfs;
  if (t == "ots") return Baseline::ots;
  if (t == "rs") return Baseline::rs;
  throw ConfigError("unknown baseline '" + std::string(text) + "' (expected TFS, OTS or RS)");
}

RunResult run_baseline(Baseline mode, const CCDT& source, const RuleSet& source_rules, const RuleSet& target_rules,
                       QueryClient& target, const CandidateSet& candidates, std::size_t subset_size,
                       const EvolutionConfig& cfg) {
  const auto t0 = Clock::now();
  Json report = base_report(to_string(mode), source_rules, target_rules, cfg);
  RunResult out;
  if (mode == Baseline::ots) {
    out.model = extend_untrained(source, target_rules);
    out.queries = 0;
    report["query_count"] = 0;
    report["modules"] = out.model.size();
    out.report = std::move(report);
    return out;
  }
  const auto before = target.count();
  out.solution = random_subset(candidates.nc(), subset_size, derive_seed(cfg.seed, "random-subset"));
  auto ed = build_evolution_dataset(candidates, out.solution, target, source, cfg);
  out.queries = target.count() - before;
  const auto t_query = seconds_since(t0);
  const auto t1 = Clock::now();
  if (mode == Baseline::rs) {
    out.model = fine_tune(source, target_rules, diff_rulesets(source_rules, target_rules), ed.combined(), cfg.fine_tune);
  } else {
    out.model = make_ccdt(source.encoder, target_rules.ids(), target_rules.version(),
                          derive_seed(cfg.seed, "scratch-init"), source.arch);
    train(out.model, ed.combined(), cfg.scratch_training);
  }
  report["subset_size"] = subset_size;
  report["evolution_dataset"] = ed.provenance();
  report["query_count"] = out.queries;
  report["modules"] = out.model.size();
  if (cfg.record_timings) report["timings"] = {{"query_s", t_query}, {"train_s", seconds_since(t1)}};
  out.report = std::move(report);
  return out;
}

// ---- evaluation ------------------------------------------------------------------

EvaluationReport evaluate_predictions(const std::vector<std::vector<ResultCode>>& predicted,
                                      const LabelledDataset& test, const RuleSetDiff& diff) {
  if (predicted.size() != test.size()) throw ShapeError("predictions and test set differ in size");
  auto scope = [&](const std::vector<std::size_t>& cols, std::string name) {
    std::vector<ResultCode> p, t;
    for (std::size_t i = 0; i < test.size(); ++i)
      for (auto c : cols) {
        p.push_back(predicted[i].at(c));
        t.push_back(test.labels[i][c]);
      }
    return metrics(confusion(std::span<const ResultCode>(p), std::span<const ResultCode>(t)), std::move(name));
  };
  std::vector<std::size_t> all, base;
  for (std::size_t c = 0; c < test.rule_ids.size(); ++c) {
    all.push_back(c);
    const auto& id = test.rule_ids[c];
    auto in = [&](const std::vector<std::string>& v) { return std::find(v.begin(), v.end(), id) != v.end(); };
    if (in(diff.retained_ids) || in(diff.modified_ids)) base.push_back(c);
  }
  EvaluationReport r;
  r.all = scope(all, "all");
  r.base = scope(base, "base");
  for (const auto& id : diff.new_ids)
    if (auto c = test.rule_index(id)) r.new_rules.push_back(scope({*c}, id));
  return r;
}

EvaluationReport evaluate_model(const CCDT& model, const LabelledDataset& test, const RuleSetDiff& diff) {
  std::vector<std::size_t> module_for;
  for (const auto& id : test.rule_ids) {
    auto m = model.index_of(id);
    if (!m) throw ConfigError("model has no module for test rule " + id);
    module_for.push_back(*m);
  }
  const auto codes = predicted_codes(predict_batch(model, test.data));
  std::vector<std::vector<ResultCode>> aligned(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i)
    for (auto m : module_for) aligned[i].push_back(codes[i][m]);
  return evaluate_predictions(aligned, test, diff);
}

Json evaluation_to_json(const EvaluationReport& r) {
  Json j;
  j["all"] = metrics_to_json(r.all);
  j["base"] = metrics_to_json(r.base);
  Json per = Json::object();
  for (const auto& m : r.new_rules) per[m.scope] = metrics_to_json(m);
  j["new_rules"] = std::move(per);
  return j;
}

}  // namespace ccdt
