#include "ccdt/error.hpp"
#include "ccdt/experiment.hpp"
#include "support.hpp"

using namespace ccdt;

namespace {

ExperimentConfig tiny(const std::string& rq) {
  ExperimentConfig cfg;
  cfg.rq = rq;
  cfg.repeats = 3;
  cfg.candidates = 40;
  cfg.budget = 6;
  cfg.sizes = {20, 40};
  cfg.pretrain_size = 120;
  cfg.test_size = 60;
  cfg.pretrain.epochs = 2;
  cfg.search.population_size = 20;
  cfg.search.max_evaluations = 200;
  cfg.evolution.fine_tune.training.epochs = 1;
  cfg.evolution.scratch_training.epochs = 1;
  return cfg;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("presets") {
  auto names = preset_names();
  CHECK(names == std::vector<std::string>{"s1t1", "s2t2", "s3t3"});
  CHECK(preset_by_name("s1t1").source_rules == 30);
  CHECK(preset_by_name("s2t2").source_rules == 40);
  CHECK(preset_by_name("s3t3").source_rules == 51);
  for (const auto& n : names) CHECK(preset_by_name(n).addition_arities.size() == 5);
  CHECK_THROWS_AS(preset_by_name("s4t4"), ConfigError);
}

TEST_CASE("config") {
  ExperimentConfig cfg;
  CHECK(cfg.effective_methods() == std::vector<std::string>{"EvoCLINICAL", "TFS", "OTS"});
  cfg.rq = "rq2";
  CHECK(cfg.effective_methods() == std::vector<std::string>{"EvoCLINICAL", "RS"});
  auto back = experiment_config_from_json(experiment_config_to_json(cfg));
  CHECK(experiment_config_to_json(back) == experiment_config_to_json(cfg));
  cfg.rq = "rq9";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(Json{{"repeats", "ten"}}), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(Json{{"repeat", 3}}), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_json(Json{{"pretrain", {{"epoch", 3}}}}), ConfigError);
}

TEST_CASE("rq1 report is complete and reproducible") {
  auto cfg = tiny("rq1");
  auto a = run_experiment(cfg, default_schema());
  REQUIRE(a["presets"].size() == 1);
  const auto& p = a["presets"][0];
  CHECK(p["preset"]["target_rules"] == 35);
  for (const std::string m : {"EvoCLINICAL", "TFS", "OTS"}) {
    REQUIRE(p["runs"][m].size() == 3);
    for (const std::string metric : {"precision", "recall", "f1"}) {
      CHECK(p["medians"][m]["all"][metric].is_number());
      CHECK(p["medians"][m]["base"][metric].is_number());
    }
  }
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(p["runs"]["OTS"][r]["queries"] == 0);
    CHECK(p["runs"]["TFS"][r]["queries"] == p["runs"]["EvoCLINICAL"][r]["queries"]);
    CHECK(p["runs"]["TFS"][r]["subset_size"] == p["runs"]["EvoCLINICAL"][r]["subset_size"]);
  }
  bool has_p = false;
  for (const auto& c : p["comparisons"])
    if (c["scope"] == "all" && c["metric"] == "f1" && c["b"] == "TFS") has_p = c["p_value"].is_number();
  CHECK(has_p);
  CHECK(a.dump().find("timings") == std::string::npos);
  auto b = run_experiment(cfg, default_schema());
  CHECK(a.dump() == b.dump());
  CHECK(summarize_experiment(a).find("EvoCLINICAL vs TFS") != std::string::npos);
}

TEST_CASE("rq3 sweep") {
  auto cfg = tiny("rq3");
  cfg.repeats = 1;
  auto r = run_experiment(cfg, default_schema());
  const auto& p = r["presets"][0];
  REQUIRE(p["sizes"].size() == 2);
  CHECK(p["sizes"][0]["budget"] == 2);
  CHECK(p["sizes"][1]["budget"] == 4);
  CHECK(p["trend"]["median_f1"].size() == 2);
  CHECK(p["trend"]["spearman"].is_number());
  CHECK(summarize_experiment(r).find("spearman") != std::string::npos);
}

}  // TEST_SUITE
