#include "ccdt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "ccdt/error.hpp"
#include "ccdt/objectives.hpp"
#include "ccdt/query_client.hpp"
#include "ccdt/random.hpp"
#include "ccdt/stats.hpp"

namespace ccdt {

namespace {

constexpr std::string_view kEvo = "EvoCLINICAL";

}  // namespace

Preset preset_by_name(std::string_view name) {
  if (name == "s1t1") return {"s1t1", 30, {1, 1, 1, 1, 1}, 2, "S1", "T1"};
  if (name == "s2t2") return {"s2t2", 40, {1, 1, 1, 2, 2}, 2, "S2", "T2"};
  if (name == "s3t3") return {"s3t3", 51, {1, 2, 2, 2, 3}, 2, "S3", "T3"};
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected s1t1, s2t2 or s3t3)");
}

std::vector<std::string> preset_names() { return {"s1t1", "s2t2", "s3t3"}; }

PresetRules preset_rulesets(const MessageSchema& schema, std::string_view name, std::uint64_t seed) {
  const auto p = preset_by_name(name);
  const auto base = derive_seed(seed, "preset:" + p.name);
  PresetRules out;
  out.source = generate_ruleset(schema, p.source_rules, derive_seed(base, "source-rules"), p.source_version);
  EvolutionSpec spec{p.addition_arities, p.modifications, derive_seed(base, "target-rules"), p.target_version};
  out.target = evolve_ruleset(schema, out.source, spec);
  return out;
}

ArchConfig desk_arch() {
  ArchConfig a;
  a.filters = {4, 8, 16, 16};
  a.dense = 32;
  a.head = 16;
  return a;
}

std::vector<std::string> ExperimentConfig::effective_methods() const {
  if (!methods.empty()) return methods;
  if (rq == "rq1") return {std::string(kEvo), "TFS", "OTS"};
  if (rq == "rq2") return {std::string(kEvo), "RS"};
  return {std::string(kEvo)};
}

void ExperimentConfig::validate() const {
  if (rq != "rq1" && rq != "rq2" && rq != "rq3") throw ConfigError("rq must be rq1, rq2 or rq3");
  if (presets.empty()) throw ConfigError("at least one preset is required");
  for (const auto& p : presets) preset_by_name(p);
  if (repeats == 0) throw ConfigError("repeats must be positive");
  auto ms = effective_methods();
  if (std::find(ms.begin(), ms.end(), kEvo) == ms.end()) throw ConfigError("methods must include EvoCLINICAL");
  for (const auto& m : ms)
    if (m != kEvo) parse_baseline(m);
  if (rq == "rq3" && sizes.empty()) throw ConfigError("rq3 needs candidate sizes");
  if (candidates < 2 || pretrain_size == 0 || test_size == 0) throw ConfigError("data sizes must be positive");
  if (!(violation_rate >= 0.0 && violation_rate <= 1.0)) throw ConfigError("violation_rate must be in [0,1]");
  pretrain.validate();
  evolution.validate();
}

Json experiment_config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["rq"] = cfg.rq;
  j["presets"] = cfg.presets;
  j["methods"] = cfg.effective_methods();
  j["repeats"] = cfg.repeats;
  j["seed"] = cfg.seed;
  j["candidates"] = cfg.candidates;
  j["budget"] = cfg.budget;
  j["sizes"] = cfg.sizes;
  j["pretrain_size"] = cfg.pretrain_size;
  j["test_size"] = cfg.test_size;
  j["violation_rate"] = cfg.violation_rate;
  j["d_text"] = cfg.d_text;
  j["arch"] = arch_to_json(cfg.arch);
  j["pretrain"] = training_to_json(cfg.pretrain);
  j["search"] = search_to_json(cfg.search);
  j["evolution"] = evolution_to_json(cfg.evolution);
  return j;
}

ExperimentConfig experiment_config_from_json(const Json& doc) {
  ExperimentConfig c;
  reject_unknown_keys(doc, experiment_config_to_json(c), "experiment");
  try {
    c.rq = doc.value("rq", c.rq);
    c.presets = doc.value("presets", c.presets);
    if (doc.contains("methods")) c.methods = doc["methods"].get<std::vector<std::string>>();
    c.repeats = doc.value("repeats", c.repeats);
    c.seed = doc.value("seed", c.seed);
    c.candidates = doc.value("candidates", c.candidates);
    c.budget = doc.value("budget", c.budget);
    c.sizes = doc.value("sizes", c.sizes);
    c.pretrain_size = doc.value("pretrain_size", c.pretrain_size);
    c.test_size = doc.value("test_size", c.test_size);
    c.violation_rate = doc.value("violation_rate", c.violation_rate);
    c.d_text = doc.value("d_text", c.d_text);
    if (doc.contains("arch")) c.arch = arch_from_json(doc["arch"]);
    if (doc.contains("pretrain")) c.pretrain = training_from_json(doc["pretrain"], c.pretrain);
    if (doc.contains("search")) c.search = search_from_json(doc["search"]);
    if (doc.contains("evolution")) c.evolution = evolution_from_json(doc["evolution"]);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

struct PresetContext {
  Preset preset;
  RuleSet source, target;
  RuleSetDiff diff;
  CCDT ccdt_s;
};

PresetContext prepare_preset(const ExperimentConfig& cfg, const SchemaPtr& schema, const std::string& name,
                             const std::function<void(const std::string&)>& log) {
  PresetContext ctx;
  ctx.preset = preset_by_name(name);
  const auto base = derive_seed(cfg.seed, "preset:" + name);
  auto rules = preset_rulesets(*schema, name, cfg.seed);
  ctx.source = std::move(rules.source);
  ctx.target = std::move(rules.target);
  ctx.diff = diff_rulesets(ctx.source, ctx.target);

  auto data = generate_messages(schema, cfg.pretrain_size, derive_seed(base, "pretrain-data"), cfg.violation_rate,
                                ctx.source.recipes());
  auto labelled = validate_batch(data, ctx.source);
  ctx.ccdt_s = make_ccdt(make_encoder(*schema, cfg.d_text), ctx.source.ids(), ctx.source.version(),
                         derive_seed(base, "source-model"), cfg.arch);
  auto train_cfg = cfg.pretrain;
  train_cfg.seed = derive_seed(base, "pretrain");
  if (log) log(name + ": pretraining source model on " + std::to_string(data.size()) + " messages");
  train(ctx.ccdt_s, labelled, train_cfg);
  return ctx;
}

Json macro_json(const MetricsReport& m) {
  return Json{{"precision", m.macro_precision}, {"recall", m.macro_recall}, {"f1", m.macro_f1}};
}

Json run_json(std::size_t repeat, std::uint64_t seed, const RunResult& run, const EvaluationReport& ev) {
  Json j;
  j["repeat"] = repeat;
  j["seed"] = seed;
  j["queries"] = run.queries;
  j["subset_size"] = run.solution.universe() ? run.solution.count() : 0;
  j["all"] = macro_json(ev.all);
  j["base"] = macro_json(ev.base);
  j["micro_f1"] = ev.all.micro_f1;
  Json nr = Json::object();
  for (const auto& m : ev.new_rules) nr[m.scope] = macro_json(m);
  j["new_rules"] = std::move(nr);
  if (run.report.contains("chosen_objectives")) j["objectives"] = run.report["chosen_objectives"];
  if (run.report.contains("evolution_dataset")) {
    const auto& e = run.report["evolution_dataset"];
    j["evolution_dataset"] = {{"balanced_size", e["balanced_size"]},
                              {"sampled_size", e["sampled_size"]},
                              {"inconsistent", e["inconsistent"]}};
  }
  return j;
}

// Runs every method for `repeats` seeded repeats on one candidate size.
Json run_cell(const ExperimentConfig& cfg, const SchemaPtr& schema, const PresetContext& ctx, std::size_t nc,
              std::size_t budget, const std::vector<std::string>& methods, const std::string& cell_key,
              const std::function<void(const std::string&)>& log) {
  Json runs = Json::object();
  for (const auto& m : methods) runs[m] = Json::array();
  const auto recipes = ctx.target.recipes();
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const auto seed_r = derive_seed(cfg.seed, cell_key + ":repeat:" + std::to_string(r));
    auto pool = generate_messages(schema, nc, derive_seed(seed_r, "candidates"), cfg.violation_rate, recipes);
    const auto candidates = build_candidate_set(pool, ctx.ccdt_s, ctx.source);
    const auto test = validate_batch(
        generate_messages(schema, cfg.test_size, derive_seed(seed_r, "test"), cfg.violation_rate, recipes), ctx.target);

    auto evo_cfg = cfg.evolution;
    evo_cfg.seed = derive_seed(seed_r, "evolution");
    evo_cfg.fine_tune.training.seed = derive_seed(seed_r, "fine-tune");
    evo_cfg.scratch_training.seed = derive_seed(seed_r, "scratch");
    evo_cfg.record_timings = false;
    auto search = cfg.search;
    search.seed = derive_seed(seed_r, "search");
    search.budget = budget;

    auto client = QueryClient::in_process(ctx.target);
    const auto evo = evolve(ctx.ccdt_s, ctx.source, ctx.target, client, candidates, search, evo_cfg);
    const std::size_t subset_size = evo.solution.count();
    // Baselines get the same subset size and extra-sample size, so query
    // budgets match.
    auto base_cfg = evo_cfg;
    base_cfg.extra_sample_size = evo.report["evolution_dataset"]["sampled_size"].get<std::size_t>();
    for (const auto& m : methods) {
      if (m == kEvo) {
        runs[m].push_back(run_json(r, seed_r, evo, evaluate_model(evo.model, test, ctx.diff)));
        continue;
      }
      auto c = QueryClient::in_process(ctx.target);
      const auto run = run_baseline(parse_baseline(m), ctx.ccdt_s, ctx.source, ctx.target, c, candidates, subset_size,
                                    base_cfg);
      runs[m].push_back(run_json(r, seed_r, run, evaluate_model(run.model, test, ctx.diff)));
    }
    if (log) {
      std::ostringstream msg;
      msg << cell_key << " repeat " << r + 1 << "/" << cfg.repeats << ":";
      for (const auto& m : methods) msg << " " << m << " F1=" << std::fixed << std::setprecision(4)
                                        << runs[m].back()["all"]["f1"].get<double>();
      log(msg.str());
    }
  }
  return runs;
}

std::vector<double> column(const Json& runs, const std::string& scope, const std::string& metric) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.at(scope).at(metric).get<double>());
  return v;
}

std::vector<double> new_rule_column(const Json& runs, const std::string& rule, const std::string& metric) {
  std::vector<double> v;
  for (const auto& r : runs)
    if (r.at("new_rules").contains(rule)) v.push_back(r["new_rules"][rule][metric].get<double>());
  return v;
}

const std::vector<std::string> kMetrics = {"precision", "recall", "f1"};

Json summarize_cell(const Json& runs, const std::vector<std::string>& methods, const RuleSetDiff& diff) {
  Json medians = Json::object();
  for (const auto& m : methods) {
    Json mm = Json::object();
    for (const std::string scope : {"all", "base"}) {
      Json s = Json::object();
      for (const auto& metric : kMetrics) s[metric] = median(column(runs[m], scope, metric));
      mm[scope] = std::move(s);
    }
    Json nr = Json::object();
    for (const auto& id : diff.new_ids) {
      Json s = Json::object();
      for (const auto& metric : kMetrics) {
        auto col = new_rule_column(runs[m], id, metric);
        s[metric] = col.empty() ? Json(nullptr) : Json(median(col));
      }
      nr[id] = std::move(s);
    }
    mm["new_rules"] = std::move(nr);
    medians[m] = std::move(mm);
  }

  Json comparisons = Json::array();
  auto compare = [&](const std::string& other, const std::string& scope, const std::string& metric,
                     const std::vector<double>& a, const std::vector<double>& b) {
    Json c;
    c["a"] = kEvo;
    c["b"] = other;
    c["scope"] = scope;
    c["metric"] = metric;
    c["A12"] = (a.empty() || b.empty()) ? Json(nullptr) : Json(a12(a, b));
    if (a.size() >= 3 && b.size() >= 3) {
      auto t = mann_whitney(a, b);
      c["U"] = t.u;
      c["p_value"] = t.p_value;
    } else {
      c["U"] = nullptr;
      c["p_value"] = nullptr;
    }
    comparisons.push_back(std::move(c));
  };
  for (const auto& m : methods) {
    if (m == kEvo) continue;
    for (const std::string scope : {"all", "base"})
      for (const auto& metric : kMetrics) compare(m, scope, metric, column(runs[kEvo], scope, metric), column(runs[m], scope, metric));
    for (const auto& id : diff.new_ids)
      for (const auto& metric : kMetrics)
        compare(m, id, metric, new_rule_column(runs[kEvo], id, metric), new_rule_column(runs[m], id, metric));
  }
  return Json{{"medians", std::move(medians)}, {"comparisons", std::move(comparisons)}};
}

Json preset_info(const PresetContext& ctx) {
  Json j;
  j["name"] = ctx.preset.name;
  j["source_version"] = ctx.source.version();
  j["target_version"] = ctx.target.version();
  j["source_rules"] = ctx.source.nr();
  j["target_rules"] = ctx.target.nr();
  j["new_ids"] = ctx.diff.new_ids;
  j["modified_ids"] = ctx.diff.modified_ids;
  j["source_final_loss"] = [&] {
    std::vector<double> losses;
    for (const auto& c : ctx.ccdt_s.loss_curves)
      if (!c.empty()) losses.push_back(c.back());
    return losses.empty() ? Json(nullptr) : Json(median(losses));
  }();
  return j;
}

}  // namespace

Json run_experiment(const ExperimentConfig& cfg, SchemaPtr schema, const std::function<void(const std::string&)>& log) {
  cfg.validate();
  const auto methods = cfg.effective_methods();
  Json report;
  report["rq"] = cfg.rq;
  report["config"] = experiment_config_to_json(cfg);
  Json presets = Json::array();
  for (const auto& name : cfg.presets) {
    const auto ctx = prepare_preset(cfg, schema, name, log);
    Json entry;
    entry["preset"] = preset_info(ctx);
    if (cfg.rq == "rq3") {
      Json cells = Json::array();
      std::vector<double> sizes, f1s;
      for (auto nc : cfg.sizes) {
        const auto budget = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(nc)));
        auto runs = run_cell(cfg, schema, ctx, nc, budget, methods, name + ":size:" + std::to_string(nc), log);
        auto summary = summarize_cell(runs, methods, ctx.diff);
        const double f1 = summary["medians"][std::string(kEvo)]["all"]["f1"].get<double>();
        sizes.push_back(static_cast<double>(nc));
        f1s.push_back(f1);
        cells.push_back({{"candidates", nc}, {"budget", budget}, {"runs", std::move(runs)},
                         {"medians", std::move(summary["medians"])}});
      }
      entry["sizes"] = std::move(cells);
      Json trend;
      trend["sizes"] = sizes;
      trend["median_f1"] = f1s;
      trend["spearman"] = sizes.size() >= 2 ? Json(spearman(sizes, f1s)) : Json(nullptr);
      trend["largest_minus_smallest"] = f1s.back() - f1s.front();
      entry["trend"] = std::move(trend);
    } else {
      const std::size_t budget =
          cfg.budget ? cfg.budget : static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(cfg.candidates)));
      auto runs = run_cell(cfg, schema, ctx, cfg.candidates, budget, methods, name, log);
      auto summary = summarize_cell(runs, methods, ctx.diff);
      entry["candidates"] = cfg.candidates;
      entry["budget"] = budget;
      entry["runs"] = std::move(runs);
      entry["medians"] = std::move(summary["medians"]);
      entry["comparisons"] = std::move(summary["comparisons"]);
    }
    presets.push_back(std::move(entry));
  }
  report["presets"] = std::move(presets);
  return report;
}

std::string summarize_experiment(const Json& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "research question: " << report.value("rq", std::string("?")) << "\n";
  for (const auto& p : report.at("presets")) {
    const auto& info = p.at("preset");
    out << "\npreset " << info["name"].get<std::string>() << " (" << info["source_rules"] << " -> "
        << info["target_rules"] << " rules)\n";
    if (p.contains("sizes")) {
      out << "  candidates  budget  median F1\n";
      for (const auto& c : p["sizes"]) {
        out << "  " << std::setw(10) << c["candidates"].get<std::size_t>() << "  " << std::setw(6)
            << c["budget"].get<std::size_t>() << "  " << c["medians"][std::string(kEvo)]["all"]["f1"].get<double>()
            << "\n";
      }
      out << "  spearman(size, F1) = " << p["trend"]["spearman"].get<double>() << "\n";
      continue;
    }
    out << "  method        scope  precision  recall     f1\n";
    for (const auto& [method, m] : p["medians"].items()) {
      for (const std::string scope : {"all", "base"}) {
        out << "  " << std::left << std::setw(12) << method << std::right << "  " << std::setw(5) << scope << "  "
            << std::setw(9) << m[scope]["precision"].get<double>() << "  " << std::setw(9)
            << m[scope]["recall"].get<double>() << "  " << std::setw(6) << m[scope]["f1"].get<double>() << "\n";
      }
    }
    out << "  comparison              scope  metric     p-value  A12\n";
    for (const auto& c : p["comparisons"]) {
      const auto scope = c["scope"].get<std::string>();
      if (scope != "all" && scope != "base") continue;
      out << "  " << std::left << std::setw(22) << (c["a"].get<std::string>() + " vs " + c["b"].get<std::string>())
          << std::right << "  " << std::setw(5) << scope << "  " << std::left << std::setw(9)
          << c["metric"].get<std::string>() << std::right << "  ";
      if (c["p_value"].is_null())
        out << "    n/a";
      else
        out << std::setw(7) << c["p_value"].get<double>();
      out << "  " << (c["A12"].is_null() ? std::string("n/a") : std::to_string(c["A12"].get<double>())) << "\n";
    }
  }
  return out.str();
}

}  // namespace ccdt
