// Command-line front end. Every command prints its effective configuration
// (including the seed) as one JSON line on stdout before doing any work, and
// reports failures as one JSON line on stderr with a nonzero exit code.
//
// Precedence for paths, seed and port: flag, then environment variable, then
// the --config document, then the built-in default.

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "ccdt/error.hpp"
#include "ccdt/experiment.hpp"
#include "ccdt/ibea.hpp"
#include "ccdt/model.hpp"
#include "ccdt/objectives.hpp"
#include "ccdt/pipeline.hpp"
#include "ccdt/query_client.hpp"
#include "ccdt/random.hpp"
#include "ccdt/rules.hpp"
#include "ccdt/schema.hpp"
#include "ccdt/service.hpp"

using namespace ccdt;

namespace {

constexpr double kGradTolerance = 1e-4;

struct App {
  std::string config_path;
  Json config = Json::object();

  void load() {
    if (config_path.empty())
      if (const char* env = std::getenv("CCDT_CONFIG")) config_path = env;
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config " + config_path);
    try {
      config = Json::parse(in);
    } catch (const Json::exception& e) {
      throw ConfigError("config " + config_path + ": " + e.what());
    }
    if (!config.is_object()) throw ConfigError("config " + config_path + ": expected a JSON object");
    reject_unknown_keys(config,
                        Json{{"paths", 0}, {"training", 0}, {"search", 0}, {"evolution", 0},
                             {"experiment", 0}, {"service", 0}, {"seed", 0}},
                        "config");
    reject_unknown_keys(section("paths"),
                        Json{{"schema", 0}, {"rules", 0}, {"source_rules", 0}, {"target_rules", 0},
                             {"model", 0}, {"service_url", 0}, {"report_dir", 0}},
                        "config paths");
    reject_unknown_keys(section("service"), Json{{"port", 0}}, "config service");
    if (config.contains("training")) training_from_json(config["training"]);
    if (config.contains("search")) search_from_json(config["search"]);
    if (config.contains("evolution")) evolution_from_json(config["evolution"]);
    if (config.contains("experiment")) experiment_config_from_json(config["experiment"]);
  }

  Json section(const std::string& key) const {
    return config.contains(key) ? config[key] : Json::object();
  }

  // Flag, then environment, then config "paths", then empty.
  std::string path(const std::string& flag, const char* env, const std::string& key) const {
    if (!flag.empty()) return flag;
    if (const char* v = std::getenv(env); v && *v) return v;
    auto paths = section("paths");
    if (paths.contains(key)) return paths[key].get<std::string>();
    return {};
  }

  std::uint64_t seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) const {
    if (flag) return *flag;
    if (const char* v = std::getenv("CCDT_SEED"); v && *v) return std::stoull(v);
    if (config.contains("seed")) return config["seed"].get<std::uint64_t>();
    return fallback;
  }
};

std::string required(const std::string& value, const std::string& what) {
  if (value.empty()) throw ConfigError("missing " + what);
  return value;
}

void print_effective(const std::string& command, std::uint64_t seed, Json cfg) {
  Json line{{"command", command}, {"seed", seed}, {"config", std::move(cfg)}};
  std::cout << line.dump() << std::endl;
}

void write_json(const Json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << doc.dump(2) << "\n";
}

SchemaPtr open_schema(const std::string& path) {
  if (path.empty()) return default_schema();
  return std::make_shared<const MessageSchema>(load_schema(path));
}

ArchConfig arch_named(const std::string& name) {
  if (name == "desk") return desk_arch();
  if (name == "full") return ArchConfig{};
  throw ConfigError("arch must be 'desk' or 'full'");
}

std::vector<int> parse_arities(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

QueryClient target_client(const std::string& url, const RuleSet& rules) {
  return url.empty() ? QueryClient::in_process(rules) : QueryClient::http(url);
}

// ---- commands ----------------------------------------------------------------

struct Common {
  std::string schema;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_schema(CLI::App* cmd, Common& c) {
  cmd->add_option("--schema", c.schema, "Schema JSON (env CCDT_SCHEMA; default: built-in schema)");
}

void add_seed(CLI::App* cmd, Common& c) { cmd->add_option("--seed", c.seed, "Seed (env CCDT_SEED)"); }

int run_gradcheck(std::uint64_t seed, std::size_t count, double eps) {
  ArchConfig arch;
  arch.filters = {2, 3, 4, 4};
  arch.dense = 6;
  arch.head = 5;
  const std::size_t l = 24;
  Rng rng(seed);
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (std::size_t t = 0; t < count; ++t) {
    auto module = init_module(derive_seed(seed, "gradcheck:" + std::to_string(t)), l, l, arch);
    FeatureVector fv;
    for (std::size_t i = 0; i < l; ++i) fv.branch1.push_back(static_cast<float>(uniform01(rng)));
    for (std::size_t i = 0; i < l; ++i) fv.branch2.push_back(static_cast<float>(uniform_real(rng, -1.0, 1.0)));
    auto r = gradient_check(module, fv, t % 4, eps);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    skipped += r.skipped;
  }
  Json result{{"max_rel_error", worst}, {"checked", checked}, {"skipped", skipped}, {"tolerance", kGradTolerance}};
  std::cout << result.dump() << std::endl;
  return worst < kGradTolerance ? 0 : 3;
}

void report_error(const std::string& kind, const std::string& message) {
  Json line{{"error", kind}, {"message", message}};
  std::cerr << line.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  App app;
  CLI::App cli{"Surrogate rule-engine twin: data generation, training, selection and evolution"};
  cli.require_subcommand(1);
  cli.add_option("--config", app.config_path, "JSON config document (env CCDT_CONFIG)");

  Common c;
  int exit_code = 0;

  // gen-schema
  auto* gen_schema = cli.add_subcommand("gen-schema", "Write the built-in message schema");
  gen_schema->add_option("--out", c.out, "Output path")->required();

  // gen-rules
  std::size_t n_rules = 30;
  std::string version = "v1";
  auto* gen_rules = cli.add_subcommand("gen-rules", "Generate a synthetic rule set");
  add_schema(gen_rules, c);
  add_seed(gen_rules, c);
  gen_rules->add_option("--rules", n_rules, "Number of rules")->capture_default_str();
  gen_rules->add_option("--version", version, "Version label")->capture_default_str();
  gen_rules->add_option("--out", c.out, "Output path")->required();

  // evolve-rules
  std::string source_path, target_path, arities_text, preset;
  std::size_t modifications = 2;
  auto* evolve_rules = cli.add_subcommand("evolve-rules", "Derive a target rule set by adding and modifying rules");
  add_schema(evolve_rules, c);
  add_seed(evolve_rules, c);
  evolve_rules->add_option("--source", source_path, "Source rule set (env CCDT_SOURCE_RULES)");
  evolve_rules->add_option("--add", arities_text, "Arities of added rules, e.g. 1,1,2");
  evolve_rules->add_option("--modify", modifications, "Rules to modify")->capture_default_str();
  evolve_rules->add_option("--preset", preset, "s1t1, s2t2 or s3t3 (sets --add and --modify)");
  evolve_rules->add_option("--version", version, "Target version label");
  evolve_rules->add_option("--out", c.out, "Output path")->required();

  // export-preset
  std::string export_dir;
  auto* export_preset = cli.add_subcommand("export-preset", "Write the rule sets an experiment uses for a preset");
  add_schema(export_preset, c);
  add_seed(export_preset, c);
  export_preset->add_option("preset", preset, "s1t1, s2t2 or s3t3")->required();
  export_preset->add_option("--out-dir", export_dir, "Directory for <source>.json and <target>.json")->required();

  // gen-messages
  std::size_t n_messages = 1000;
  double violation_rate = 0.3;
  std::string rules_path;
  auto* gen_messages = cli.add_subcommand("gen-messages", "Generate messages as JSON lines");
  add_schema(gen_messages, c);
  add_seed(gen_messages, c);
  gen_messages->add_option("--count", n_messages, "Number of messages")->capture_default_str();
  gen_messages->add_option("--violation-rate", violation_rate, "Share of messages built from rule counterexamples")
      ->capture_default_str();
  gen_messages->add_option("--rules", rules_path, "Rule set supplying counterexample recipes");
  gen_messages->add_option("--out", c.out, "Output path")->required();

  // label
  std::string in_path, url;
  auto* label = cli.add_subcommand("label", "Label messages with a rule-set version");
  add_schema(label, c);
  label->add_option("--rules", rules_path, "Rule set (env CCDT_RULES)");
  label->add_option("--in", in_path, "Messages (JSON lines)")->required();
  label->add_option("--url", url, "Validation service URL instead of in-process (env CCDT_SERVICE_URL)");
  label->add_option("--out", c.out, "Output path")->required();

  // train
  std::string model_path, arch_name = "desk";
  std::size_t d_text = kDeskTextDim;
  std::optional<std::size_t> epochs;
  auto* train_cmd = cli.add_subcommand("train", "Train a source model from labelled messages");
  add_schema(train_cmd, c);
  add_seed(train_cmd, c);
  train_cmd->add_option("--in", in_path, "Labelled messages (JSON lines)")->required();
  train_cmd->add_option("--rules", rules_path, "Rule set the labels come from (env CCDT_RULES)");
  train_cmd->add_option("--arch", arch_name, "desk or full")->capture_default_str();
  train_cmd->add_option("--d-text", d_text, "Text embedding width")->capture_default_str();
  train_cmd->add_option("--epochs", epochs, "Training epochs");
  train_cmd->add_option("--out", c.out, "Model directory")->required();

  // select
  std::optional<std::size_t> evals, population, budget;
  auto* select = cli.add_subcommand("select", "Run the multi-objective subset search");
  add_schema(select, c);
  add_seed(select, c);
  select->add_option("--model", model_path, "Source model directory (env CCDT_MODEL)");
  select->add_option("--source", source_path, "Source rule set (env CCDT_SOURCE_RULES)");
  select->add_option("--candidates", in_path, "Candidate messages (JSON lines)")->required();
  select->add_option("--evals", evals, "Maximum evaluations");
  select->add_option("--population", population, "Population size");
  select->add_option("--budget", budget, "Subset size budget");
  select->add_option("--out", c.out, "Selection report path")->required();

  // evolve and baseline share their inputs
  std::string report_path, mode;
  std::size_t subset_size = 0;
  auto add_evolution_inputs = [&](CLI::App* cmd) {
    add_schema(cmd, c);
    add_seed(cmd, c);
    cmd->add_option("--model", model_path, "Source model directory (env CCDT_MODEL)");
    cmd->add_option("--source", source_path, "Source rule set (env CCDT_SOURCE_RULES)");
    cmd->add_option("--target", target_path, "Target rule set (env CCDT_TARGET_RULES)");
    cmd->add_option("--candidates", in_path, "Candidate messages (JSON lines)")->required();
    cmd->add_option("--url", url, "Target validation service URL (env CCDT_SERVICE_URL)");
    cmd->add_option("--report", report_path, "Run report path");
    cmd->add_option("--out", c.out, "Target model directory")->required();
  };
  auto* evolve_cmd = cli.add_subcommand("evolve", "Search, query, augment and fine-tune a target model");
  add_evolution_inputs(evolve_cmd);
  evolve_cmd->add_option("--evals", evals, "Maximum evaluations");
  evolve_cmd->add_option("--population", population, "Population size");
  evolve_cmd->add_option("--budget", budget, "Subset size budget");

  auto* baseline = cli.add_subcommand("baseline", "Build a target model with TFS, OTS or RS");
  add_evolution_inputs(baseline);
  baseline->add_option("--mode", mode, "TFS, OTS or RS")->required();
  baseline->add_option("--subset-size", subset_size, "Random subset size (TFS and RS)");

  // evaluate
  std::string test_path;
  auto* evaluate = cli.add_subcommand("evaluate", "Precision, recall and F1 of a model on labelled messages");
  add_schema(evaluate, c);
  evaluate->add_option("--model", model_path, "Model directory (env CCDT_MODEL)");
  evaluate->add_option("--source", source_path, "Source rule set, for the base/new split (env CCDT_SOURCE_RULES)");
  evaluate->add_option("--target", target_path, "Target rule set (env CCDT_TARGET_RULES)");
  evaluate->add_option("--test", test_path, "Target-labelled messages (JSON lines)")->required();
  evaluate->add_option("--out", c.out, "Metrics report path");

  // experiment
  std::string rq;
  std::vector<std::string> presets;
  std::optional<std::size_t> repeats;
  std::string summary_path;
  auto* experiment = cli.add_subcommand("experiment", "Run a research-question experiment");
  add_schema(experiment, c);
  add_seed(experiment, c);
  experiment->add_option("rq", rq, "rq1, rq2 or rq3")->required();
  experiment->add_option("--preset", presets, "Presets (repeatable)");
  experiment->add_option("--repeats", repeats, "Seeded repeats per cell");
  experiment->add_option("--out", c.out, "Report path (env CCDT_REPORT_DIR/<rq>.json)");
  experiment->add_option("--summary", summary_path, "Also write the text summary here");

  // serve
  std::string host = "127.0.0.1";
  std::optional<int> port;
  auto* serve = cli.add_subcommand("serve", "Serve a rule-set version over HTTP");
  add_schema(serve, c);
  serve->add_option("--rules", rules_path, "Rule set (env CCDT_RULES)");
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--port", port, "Port (env CCDT_PORT; default 8080)");

  // gradcheck
  std::size_t gc_count = 20;
  double gc_eps = 1e-5;
  auto* gradcheck = cli.add_subcommand("gradcheck", "Compare backprop with central differences on small modules");
  add_seed(gradcheck, c);
  gradcheck->add_option("--count", gc_count, "Random modules to check")->capture_default_str();
  gradcheck->add_option("--epsilon", gc_eps, "Finite-difference step")->capture_default_str();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("UsageError", e.what());
    return 2;
  }

  try {
    app.load();
    const auto schema_path = app.path(c.schema, "CCDT_SCHEMA", "schema");

    if (*gen_schema) {
      print_effective("gen-schema", 0, {{"out", c.out}});
      save_schema(*default_schema(), c.out);
    } else if (*gen_rules) {
      const auto seed = app.seed(c.seed, 1);
      auto schema = open_schema(schema_path);
      print_effective("gen-rules", seed, {{"schema", schema_path}, {"rules", n_rules}, {"version", version}, {"out", c.out}});
      save_ruleset(generate_ruleset(*schema, n_rules, seed, version), *schema, c.out);
    } else if (*evolve_rules) {
      const auto seed = app.seed(c.seed, 2);
      auto schema = open_schema(schema_path);
      const auto src = required(app.path(source_path, "CCDT_SOURCE_RULES", "source_rules"), "--source");
      auto arities = parse_arities(arities_text);
      if (!preset.empty()) {
        auto p = preset_by_name(preset);
        arities = p.addition_arities;
        modifications = p.modifications;
        if (version == "v1") version = p.target_version;
      }
      if (version == "v1") version = "v2";
      print_effective("evolve-rules", seed,
                      {{"schema", schema_path}, {"source", src}, {"add", arities}, {"modify", modifications},
                       {"version", version}, {"out", c.out}});
      auto source = load_ruleset(src, *schema);
      save_ruleset(evolve_ruleset(*schema, source, EvolutionSpec{arities, modifications, seed, version}), *schema,
                   c.out);
    } else if (*export_preset) {
      const auto seed = app.seed(c.seed, ExperimentConfig{}.seed);
      auto schema = open_schema(schema_path);
      print_effective("export-preset", seed, {{"schema", schema_path}, {"preset", preset}, {"out_dir", export_dir}});
      auto rules = preset_rulesets(*schema, preset, seed);
      std::filesystem::create_directories(export_dir);
      save_ruleset(rules.source, *schema, std::filesystem::path(export_dir) / (rules.source.version() + ".json"));
      save_ruleset(rules.target, *schema, std::filesystem::path(export_dir) / (rules.target.version() + ".json"));
    } else if (*gen_messages) {
      const auto seed = app.seed(c.seed, 3);
      auto schema = open_schema(schema_path);
      const auto rp = app.path(rules_path, "CCDT_RULES", "rules");
      print_effective("gen-messages", seed,
                      {{"schema", schema_path}, {"count", n_messages}, {"violation_rate", violation_rate},
                       {"rules", rp}, {"out", c.out}});
      RecipeBook recipes;
      if (!rp.empty()) recipes = load_ruleset(rp, *schema).recipes();
      write_jsonl(generate_messages(schema, n_messages, seed, violation_rate, recipes), c.out);
    } else if (*label) {
      auto schema = open_schema(schema_path);
      const auto rp = required(app.path(rules_path, "CCDT_RULES", "rules"), "--rules");
      const auto u = app.path(url, "CCDT_SERVICE_URL", "service_url");
      print_effective("label", 0, {{"schema", schema_path}, {"rules", rp}, {"in", in_path}, {"url", u}, {"out", c.out}});
      auto rules = load_ruleset(rp, *schema);
      auto client = target_client(u, rules);
      write_labelled_jsonl(client.query(read_jsonl(in_path, schema)), c.out);
    } else if (*train_cmd) {
      const auto seed = app.seed(c.seed, 4);
      auto schema = open_schema(schema_path);
      auto cfg = training_from_json(app.section("training"));
      if (epochs) cfg.epochs = *epochs;
      cfg.seed = seed;
      const auto arch = arch_named(arch_name);
      print_effective("train", seed,
                      {{"schema", schema_path}, {"in", in_path}, {"arch", arch_to_json(arch)}, {"d_text", d_text},
                       {"training", training_to_json(cfg)}, {"out", c.out}});
      auto data = read_labelled_jsonl(in_path, schema);
      std::string ver = "source";
      if (auto rp = app.path(rules_path, "CCDT_RULES", "rules"); !rp.empty()) ver = load_ruleset(rp, *schema).version();
      auto model = make_ccdt(make_encoder(*schema, d_text), data.rule_ids, ver, seed, arch);
      train(model, data, cfg);
      save_model(model, c.out);
      std::cout << Json{{"modules", model.size()}, {"messages", data.size()}}.dump() << std::endl;
    } else if (*select) {
      const auto seed = app.seed(c.seed, 5);
      auto schema = open_schema(schema_path);
      auto search = search_from_json(app.section("search"));
      search.seed = seed;
      if (evals) search.max_evaluations = *evals;
      if (population) search.population_size = *population;
      if (budget) search.budget = *budget;
      const auto mp = required(app.path(model_path, "CCDT_MODEL", "model"), "--model");
      const auto sp = required(app.path(source_path, "CCDT_SOURCE_RULES", "source_rules"), "--source");
      print_effective("select", seed,
                      {{"schema", schema_path}, {"model", mp}, {"source", sp}, {"candidates", in_path},
                       {"search", search_to_json(search)}, {"out", c.out}});
      auto model = load_model(mp, schema.get());
      auto candidates = build_candidate_set(read_jsonl(in_path, schema), model, load_ruleset(sp, *schema));
      auto result = ibea_search(candidates, search);
      const auto chosen = pick_solution(result.front, result.config.budget, result.config.pick);
      write_json(selection_report(result, chosen), c.out);
      std::cout << Json{{"front_size", result.front.size()}, {"chosen", objectives_to_json(result.front[chosen].objectives)}}.dump()
                << std::endl;
    } else if (*evolve_cmd || *baseline) {
      const bool is_evolve = evolve_cmd->parsed();
      const auto seed = app.seed(c.seed, 6);
      auto schema = open_schema(schema_path);
      auto cfg = evolution_from_json(app.section("evolution"));
      cfg.seed = seed;
      cfg.fine_tune.training.seed = derive_seed(seed, "fine-tune");
      cfg.scratch_training.seed = derive_seed(seed, "scratch");
      auto search = search_from_json(app.section("search"));
      search.seed = derive_seed(seed, "search");
      if (evals) search.max_evaluations = *evals;
      if (population) search.population_size = *population;
      if (budget) search.budget = *budget;
      const auto mp = required(app.path(model_path, "CCDT_MODEL", "model"), "--model");
      const auto sp = required(app.path(source_path, "CCDT_SOURCE_RULES", "source_rules"), "--source");
      const auto tp = required(app.path(target_path, "CCDT_TARGET_RULES", "target_rules"), "--target");
      const auto u = app.path(url, "CCDT_SERVICE_URL", "service_url");
      Json eff{{"schema", schema_path}, {"model", mp}, {"source", sp}, {"target", tp}, {"candidates", in_path},
               {"url", u}, {"evolution", evolution_to_json(cfg)}, {"out", c.out}};
      if (is_evolve)
        eff["search"] = search_to_json(search);
      else
        eff["mode"] = mode, eff["subset_size"] = subset_size;
      print_effective(is_evolve ? "evolve" : "baseline", seed, eff);

      auto source_model = load_model(mp, schema.get());
      auto source_rules = load_ruleset(sp, *schema);
      auto target_rules = load_ruleset(tp, *schema);
      auto candidates = build_candidate_set(read_jsonl(in_path, schema), source_model, source_rules);
      auto client = target_client(u, target_rules);
      RunResult run;
      if (is_evolve) {
        run = evolve(source_model, source_rules, target_rules, client, candidates, search, cfg);
      } else {
        const auto m = parse_baseline(mode);
        if (m != Baseline::ots && subset_size == 0)
          subset_size = search.resolved(candidates.nc()).budget;
        run = run_baseline(m, source_model, source_rules, target_rules, client, candidates, subset_size, cfg);
      }
      save_model(run.model, c.out);
      run.report["seed"] = seed;
      if (!report_path.empty()) write_json(run.report, report_path);
      std::cout << Json{{"modules", run.model.size()}, {"queries", run.queries}}.dump() << std::endl;
    } else if (*evaluate) {
      auto schema = open_schema(schema_path);
      const auto mp = required(app.path(model_path, "CCDT_MODEL", "model"), "--model");
      const auto sp = app.path(source_path, "CCDT_SOURCE_RULES", "source_rules");
      const auto tp = app.path(target_path, "CCDT_TARGET_RULES", "target_rules");
      print_effective("evaluate", 0,
                      {{"schema", schema_path}, {"model", mp}, {"source", sp}, {"target", tp}, {"test", test_path},
                       {"out", c.out}});
      auto model = load_model(mp, schema.get());
      auto test = read_labelled_jsonl(test_path, schema);
      RuleSetDiff diff;
      if (!sp.empty() && !tp.empty()) {
        diff = diff_rulesets(load_ruleset(sp, *schema), load_ruleset(tp, *schema));
      } else {
        diff.retained_ids = test.rule_ids;
      }
      auto report = evaluation_to_json(evaluate_model(model, test, diff));
      if (!c.out.empty()) write_json(report, c.out);
      std::cout << Json{{"macro_f1", report["all"]["macro"]["f1"]}, {"micro_f1", report["all"]["micro"]["f1"]}}.dump()
                << std::endl;
    } else if (*experiment) {
      auto schema = open_schema(schema_path);
      auto cfg = experiment_config_from_json(app.section("experiment"));
      cfg.rq = rq;
      if (!presets.empty()) cfg.presets = presets;
      if (repeats) cfg.repeats = *repeats;
      cfg.seed = app.seed(c.seed, cfg.seed);
      cfg.validate();
      auto out = c.out;
      if (out.empty()) {
        const auto dir = app.path("", "CCDT_REPORT_DIR", "report_dir");
        out = (dir.empty() ? std::string(".") : dir) + "/" + rq + ".json";
      }
      print_effective("experiment", cfg.seed, {{"experiment", experiment_config_to_json(cfg)}, {"out", out}});
      auto report = run_experiment(cfg, schema, [](const std::string& msg) { std::cerr << msg << std::endl; });
      write_json(report, out);
      const auto summary = summarize_experiment(report);
      std::cout << summary;
      if (!summary_path.empty()) std::ofstream(summary_path) << summary;
    } else if (*serve) {
      auto schema = open_schema(schema_path);
      const auto rp = required(app.path(rules_path, "CCDT_RULES", "rules"), "--rules");
      int p = 8080;
      if (port) {
        p = *port;
      } else if (const char* env = std::getenv("CCDT_PORT"); env && *env) {
        p = std::stoi(env);
      } else if (auto s = app.section("service"); s.contains("port")) {
        p = s["port"].get<int>();
      }
      // Block the shutdown signals before any thread starts so only sigwait sees them.
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      auto rules = load_ruleset(rp, *schema);
      ValidationService service(schema, rules);
      const int bound = service.bind(host, p);
      print_effective("serve", 0, {{"schema", schema_path}, {"rules", rp}, {"host", host}, {"port", bound},
                                   {"version", rules.version()}});
      std::thread worker([&] { service.serve(); });
      int sig = 0;
      sigwait(&signals, &sig);
      service.stop();
      worker.join();
      std::cout << Json{{"stopped", true}, {"signal", sig}}.dump() << std::endl;
    } else if (*gradcheck) {
      const auto seed = app.seed(c.seed, 7);
      print_effective("gradcheck", seed, {{"count", gc_count}, {"epsilon", gc_eps}});
      exit_code = run_gradcheck(seed, gc_count, gc_eps);
    }
  } catch (const SchemaError& e) {
    report_error("SchemaError", e.what());
    return 1;
  } catch (const FormatError& e) {
    report_error("FormatError", e.what());
    return 1;
  } catch (const EvaluationError& e) {
    report_error("EvaluationError", e.what());
    return 1;
  } catch (const ShapeError& e) {
    report_error("ShapeError", e.what());
    return 1;
  } catch (const TrainingError& e) {
    report_error("TrainingError", e.what());
    return 1;
  } catch (const TransportError& e) {
    report_error("TransportError", e.what());
    return 1;
  } catch (const ConfigError& e) {
    report_error("ConfigError", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("Error", e.what());
    return 1;
  }
  return exit_code;
}
