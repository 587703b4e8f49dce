#include <fstream>

#include "ccdt/error.hpp"
#include "ccdt/experiment.hpp"
#include "ccdt/model.hpp"
#include "support.hpp"

using namespace ccdt;

namespace {

struct Fixture {
  SchemaPtr schema = default_schema();
  RuleSet rules = generate_ruleset(*schema, 30, 42, "S");
  LabelledDataset data = validate_batch(generate_messages(schema, 200, 5, 0.3, rules.recipes()), rules);
  CCDT fresh() const { return make_ccdt(make_encoder(*schema, 8), rules.ids(), "S", 9, desk_arch()); }
};

TrainingConfig quick(std::size_t epochs) {
  TrainingConfig c;
  c.epochs = epochs;
  c.validation_fraction = 0.0;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("argmax with lowest-index ties") {
  CHECK(predicted_code({0.1, 0.05, 0.65, 0.3}) == ResultCode::not_applied);
  CHECK(predicted_code({1, 0, 0, 0}) == ResultCode::info);
  CHECK(predicted_code({0.25, 0.25, 0.25, 0.25}) == ResultCode::info);
  CHECK(predicted_code({0.1, 0.4, 0.1, 0.4}) == ResultCode::warning);
}

TEST_CASE("training lowers the loss and is reproducible") {
  Fixture f;
  auto a = f.fresh();
  auto summary = train(a, f.data, quick(10));
  CHECK(summary.epochs_run.size() == 30);
  std::size_t decreasing = 0;
  for (const auto& curve : a.loss_curves) {
    REQUIRE(curve.size() == 10);
    if (curve[1] < curve[0] && curve[2] < curve[1]) ++decreasing;
  }
  CHECK(decreasing >= 27);
  auto b = f.fresh();
  train(b, f.data, quick(10));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.modules[i].params == b.modules[i].params);

  auto c = f.fresh();
  const auto before = c.modules;
  train(c, f.data, quick(0));
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c.modules[i].params == before[i].params);
}

TEST_CASE("early stopping keeps the best validation epoch") {
  Fixture f;
  auto m = f.fresh();
  TrainingConfig cfg = quick(30);
  cfg.validation_fraction = 0.1;
  cfg.patience = 2;
  auto s = train(m, f.data, cfg);
  for (auto e : s.epochs_run) CHECK(e <= 30);
}

TEST_CASE("modules train independently") {
  Fixture f;
  auto full = f.fresh();
  train(full, f.data, quick(2));
  // Train only rule 0 and compare with the jointly trained module 0.
  LabelledDataset one{f.data.data, {f.data.rule_ids[0]}, {}};
  for (const auto& row : f.data.labels) one.labels.push_back({row[0]});
  auto single = f.fresh();
  train(single, one, quick(2));
  CHECK(single.modules[0].params == full.modules[0].params);
  auto untouched = f.fresh();
  for (std::size_t i = 1; i < single.size(); ++i) CHECK(single.modules[i].params == untouched.modules[i].params);
}

TEST_CASE("labels for unknown rules are rejected") {
  Fixture f;
  auto m = f.fresh();
  auto d = f.data;
  d.rule_ids[0] = "R999";
  CHECK_THROWS_AS(train(m, d, quick(1)), ConfigError);
}

TEST_CASE("fine-tune warm starts retained modules") {
  Fixture f;
  auto src = f.fresh();
  train(src, f.data, quick(3));
  auto target = evolve_ruleset(*f.schema, f.rules, EvolutionSpec{{1, 1, 1, 1, 1}, 0, 8, "T"});
  auto diff = diff_rulesets(f.rules, target);
  auto tdata = validate_batch(generate_messages(f.schema, 40, 6, 0.3, target.recipes()), target);

  FineTuneOptions zero;
  zero.training.epochs = 0;
  auto t0 = fine_tune(src, target, diff, tdata, zero);
  CHECK(t0.size() == 35);
  std::size_t warm = 0;
  for (const auto& id : f.rules.ids())
    if (t0.module(id).params == src.module(id).params) ++warm;
  CHECK(warm == 30);

  FineTuneOptions some;
  some.training.epochs = 2;
  auto t2 = fine_tune(src, target, diff, tdata, some);
  CHECK(t2.module(f.rules.ids()[0]).params != src.module(f.rules.ids()[0]).params);

  auto same = fine_tune(src, f.rules, diff_rulesets(f.rules, f.rules),
                        validate_batch(generate_messages(f.schema, 10, 1, 0.3), f.rules), zero);
  for (const auto& id : f.rules.ids()) CHECK(same.module(id).params == src.module(id).params);

  auto missing = tdata;
  missing.rule_ids.pop_back();
  for (auto& row : missing.labels) row.pop_back();
  CHECK_THROWS_AS(fine_tune(src, target, diff, missing, zero), ConfigError);
}

TEST_CASE("modified rules follow the configured policy") {
  Fixture f;
  auto src = f.fresh();
  auto target = evolve_ruleset(*f.schema, f.rules, EvolutionSpec{{}, 2, 8, "T"});
  auto diff = diff_rulesets(f.rules, target);
  REQUIRE(diff.modified_ids.size() == 2);
  auto tdata = validate_batch(generate_messages(f.schema, 10, 6, 0.3), target);
  FineTuneOptions opt;
  opt.training.epochs = 0;
  auto warm = fine_tune(src, target, diff, tdata, opt);
  CHECK(warm.module(diff.modified_ids[0]).params == src.module(diff.modified_ids[0]).params);
  opt.modified_from_scratch = true;
  auto cold = fine_tune(src, target, diff, tdata, opt);
  CHECK(cold.module(diff.modified_ids[0]).params != src.module(diff.modified_ids[0]).params);
}

TEST_CASE("save and load") {
  test::TempDir dir("model");
  Fixture f;
  auto m = f.fresh();
  train(m, f.data, quick(1));
  save_model(m, dir.path / "m");
  auto back = load_model(dir.path / "m", f.schema.get());
  CHECK(back.version == "S");
  CHECK(back.rule_ids == m.rule_ids);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(back.modules[i].params == m.modules[i].params);
  CHECK(back.loss_curves == m.loss_curves);
  auto msgs = generate_messages(f.schema, 100, 77, 0.3);
  CHECK(predict_batch(back, msgs) == predict_batch(m, msgs));

  FieldSpec only{.name = "x", .kind = FieldKind::categorical, .domain = {"a", "b"}};
  MessageSchema other({only});
  CHECK_THROWS_AS(load_model(dir.path / "m", &other), SchemaError);

  // truncated tensor
  auto file = dir.path / "m" / "module_0000.bin";
  auto size = std::filesystem::file_size(file);
  std::filesystem::resize_file(file, size - 3);
  CHECK_THROWS_AS(load_model(dir.path / "m"), FormatError);

  // format version mismatch
  save_model(m, dir.path / "m2");
  Json manifest = Json::parse(std::ifstream(dir.path / "m2" / "manifest.json"));
  manifest["format_version"] = 99;
  std::ofstream(dir.path / "m2" / "manifest.json") << manifest.dump();
  CHECK_THROWS_AS(load_model(dir.path / "m2"), FormatError);
}

}  // TEST_SUITE
