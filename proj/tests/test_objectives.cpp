#include <cmath>
#include <random>

#include "ccdt/error.hpp"
#include "ccdt/objectives.hpp"
#include "support.hpp"
#include "toy.hpp"

using namespace ccdt;

namespace {

const double kLn2 = std::log(2.0);
const double kLn4 = std::log(4.0);

// Five binary categorical fields; messages are given as bit strings.
SchemaPtr bit_schema() {
  std::vector<FieldSpec> fields;
  for (int i = 0; i < 5; ++i)
    fields.push_back(FieldSpec{.name = "f" + std::to_string(i), .kind = FieldKind::categorical, .domain = {"0", "1"}});
  return std::make_shared<const MessageSchema>(fields);
}

CancerMessage bits_message(const MessageSchema& schema, const std::string& bits) {
  Json j = Json::object();
  for (std::size_t i = 0; i < bits.size(); ++i) j["f" + std::to_string(i)] = std::string(1, bits[i]);
  return message_from_json(schema, j);
}

std::array<double, 4> onehot(std::size_t k) {
  std::array<double, 4> p{};
  p[k] = 1.0;
  return p;
}

std::array<double, 4> random_simplex(std::mt19937_64& gen) {
  std::exponential_distribution<double> e(1.0);
  std::array<double, 4> p{};
  double s = 0.0;
  for (auto& v : p) s += (v = e(gen));
  for (auto& v : p) v /= s;
  return p;
}

// One-rule pool over `bits` messages with given predictions and truths.
CandidateSet pool(const std::vector<std::string>& msgs, const std::vector<std::array<double, 4>>& pv,
                  const std::vector<ResultCode>& truth) {
  auto schema = bit_schema();
  Dataset d{schema, {}, 0};
  std::vector<Prediction> preds;
  std::vector<std::vector<ResultCode>> t;
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    d.messages.push_back(bits_message(*schema, msgs[i]));
    preds.push_back({pv[i]});
    t.push_back({truth[i]});
  }
  return make_candidate_set(d, {"R1"}, preds, t);
}

}  // namespace

TEST_SUITE("objectives") {

TEST_CASE("solution bitmask") {
  auto s = Solution::from_indices(130, {0, 1, 3, 64, 129});
  CHECK(s.count() == 5);
  CHECK(objective_ss(s) == 5);
  CHECK(s.indices() == std::vector<std::size_t>{0, 1, 3, 64, 129});
  s.flip(3);
  CHECK_FALSE(s.test(3));
  CHECK(objective_ss(Solution::from_indices(4, {0, 1, 3})) == 3);

  Solution full(8000);
  for (std::size_t i = 0; i < 8000; ++i) full.set(i);
  CHECK(objective_ss(full) == 8000);
}

TEST_CASE("mask run-length encoding") {
  auto s = Solution::from_indices(10, {0, 1, 5, 9});
  Json j = encode_mask(s);
  CHECK(j["size"] == 10);
  CHECK(j["runs"] == Json::array({0, 2, 3, 1, 3, 1}));
  CHECK(decode_mask(j) == s);
  CHECK(decode_mask(encode_mask(Solution(7))) == Solution(7));
  CHECK_THROWS_AS(decode_mask(Json{{"size", 4}, {"runs", {1, 5}}}), FormatError);
  CHECK_THROWS_AS(decode_mask(Json{{"size", 4}, {"runs", {1, 1}}}), FormatError);
  CHECK_THROWS_AS(decode_mask(Json{{"runs", {1}}}), FormatError);
}

TEST_CASE("pair divergence") {
  auto schema = default_schema();
  auto a = test::sample_message(*schema);
  CHECK(pair_divergence(a, a, *schema) == 0.0);
  auto b = a;
  b.values[0] = std::string("F");
  b.values[4] = 1.0;
  b.values[7] = std::string("zzzzzzzz");
  CHECK(pair_divergence(a, b, *schema) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(pair_divergence(b, a, *schema) == pair_divergence(a, b, *schema));
  CHECK(pair_divergence(a, b, *schema, true) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  auto bs = bit_schema();
  CHECK(pair_divergence(bits_message(*bs, "00000"), bits_message(*bs, "11111"), *bs) == 1.0);
}

TEST_CASE("CMD") {
  const auto u = onehot(0);
  auto c = pool({"00000", "10000", "01100", "00000"}, {u, u, u, u}, {ResultCode::info, ResultCode::info,
                                                                      ResultCode::info, ResultCode::info});
  // A-B 0.2, A-C 0.4, B-C 0.6
  CHECK(objective_cmd(Solution::from_indices(4, {0, 1, 2}), c) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(objective_cmd(Solution::from_indices(4, {0, 3}), c) == 0.0);
  CHECK(objective_cmd(Solution::from_indices(4, {0}), c) == 0.0);
  ObjectiveOptions literal{true};
  CHECK(objective_cmd(Solution::from_indices(4, {0, 1, 2}), c, literal) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("adding a duplicate to a subset of at most three never increases CMD") {
  std::mt19937_64 gen(11);
  const auto u = onehot(0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> msgs;
    for (int i = 0; i < 3; ++i) {
      std::string m;
      for (int f = 0; f < 5; ++f) m += gen() % 2 ? '1' : '0';
      msgs.push_back(m);
    }
    msgs.push_back(msgs[0]);
    auto c = pool(msgs, {u, u, u, u}, std::vector<ResultCode>(4, ResultCode::info));
    for (std::uint64_t mask = 1; mask < 8; ++mask) {
      if (!(mask & 1u)) continue;
      auto idx = toy::bits(mask);
      auto with = idx;
      with.push_back(3);
      CHECK(objective_cmd(Solution::from_indices(4, with), c) <=
            objective_cmd(Solution::from_indices(4, idx), c) + 1e-12);
    }
  }
}

TEST_CASE("JS divergence") {
  CHECK(js_divergence(onehot(0), onehot(1)) == doctest::Approx(kLn2).epsilon(1e-12));
  std::mt19937_64 gen(3);
  for (int i = 0; i < 100; ++i) {
    auto p = random_simplex(gen), q = random_simplex(gen);
    CHECK(std::fabs(js_divergence(p, q) - js_divergence(q, p)) <= 1e-12);
    CHECK(js_divergence(p, p) <= 1e-12);
    CHECK(js_divergence(p, q) >= 0.0);
    CHECK(js_divergence(p, q) <= kLn2 + 1e-12);
    CHECK(js_divergence(p, q) == doctest::Approx(toy::js(p, q)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(js_divergence({0.5, 0.5, 0.5, 0.0}, onehot(0)), ConfigError);
  CHECK_THROWS_AS(js_divergence({1.5, -0.5, 0.0, 0.0}, onehot(0)), ConfigError);
}

TEST_CASE("entropy and message uncertainty") {
  CHECK(entropy(onehot(2)) == 0.0);
  CHECK(entropy({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(kLn4).epsilon(1e-12));
  std::mt19937_64 gen(5);
  for (int i = 0; i < 100; ++i) {
    auto h = entropy(random_simplex(gen));
    CHECK(h >= 0.0);
    CHECK(h < kLn4);
  }
  CHECK(message_uncertainty({onehot(0), {0.25, 0.25, 0.25, 0.25}}) == doctest::Approx(kLn4 / 2).epsilon(1e-12));
  CHECK_THROWS_AS(entropy({0.5, 0.2, 0.0, 0.0}), ConfigError);
}

TEST_CASE("result code distribution") {
  std::vector<ResultCode> codes{ResultCode::info, ResultCode::info, ResultCode::error, ResultCode::error};
  CHECK(result_code_distribution(codes) == std::array<double, 4>{0.5, 0.0, 0.0, 0.5});
  std::vector<ResultCode> one{ResultCode::warning};
  CHECK(result_code_distribution(one) == onehot(1));
  CHECK_THROWS_AS(result_code_distribution(std::span<const ResultCode>{}), ConfigError);
}

TEST_CASE("RCD") {
  // Two rules; the subset {0, 1} has per-rule distributions differing from
  // the pool's reference, and the objective is the negated mean JS.
  auto schema = bit_schema();
  Dataset d{schema, {bits_message(*schema, "00000"), bits_message(*schema, "00001"),
                     bits_message(*schema, "00010"), bits_message(*schema, "00011")}, 0};
  std::vector<Prediction> preds{{onehot(0), onehot(0)}, {onehot(0), onehot(1)},
                                {onehot(3), onehot(1)}, {onehot(3), onehot(1)}};
  std::vector<std::vector<ResultCode>> truth(4, {ResultCode::info, ResultCode::info});
  auto c = make_candidate_set(d, {"R1", "R2"}, preds, truth);
  const double js1 = js_divergence({1, 0, 0, 0}, {0.5, 0, 0, 0.5});
  const double js2 = js_divergence({0.5, 0.5, 0, 0}, {0.25, 0.75, 0, 0});
  CHECK(objective_rcd(Solution::from_indices(4, {0, 1}), c) == doctest::Approx(-(js1 + js2) / 2).epsilon(1e-12));
  CHECK(objective_rcd(Solution::from_indices(4, {0, 1, 2, 3}), c) == 0.0);
  CHECK_THROWS_AS(objective_rcd(Solution(4), c), ConfigError);
}

TEST_CASE("FPP counts messages") {
  const auto i = onehot(0);
  auto c = pool({"00000", "00001", "00010", "00011", "00100"}, {i, i, i, i, i},
                {ResultCode::info, ResultCode::error, ResultCode::info, ResultCode::warning, ResultCode::info});
  CHECK(objective_fpp(Solution::from_indices(5, {0, 1, 2, 3, 4}), c) == doctest::Approx(0.4));
  CHECK(objective_fpp(Solution::from_indices(5, {0, 2}), c) == 0.0);
  CHECK(objective_fpp(Solution::from_indices(5, {1, 3}), c) == 1.0);

  // A message wrong on two rules still counts once.
  auto schema = bit_schema();
  Dataset d{schema, {bits_message(*schema, "00000"), bits_message(*schema, "11111")}, 0};
  auto c2 = make_candidate_set(d, {"R1", "R2"}, {{i, i}, {i, i}},
                               {{ResultCode::error, ResultCode::error}, {ResultCode::info, ResultCode::info}});
  CHECK(objective_fpp(Solution::from_indices(2, {0, 1}), c2) == 0.5);
}

TEST_CASE("FPP with a duplicated message") {
  const auto i = onehot(0);
  const std::vector<ResultCode> truth{ResultCode::info, ResultCode::error, ResultCode::info, ResultCode::error};
  auto c = pool({"00000", "00001", "00000", "00001"}, {i, i, i, i}, truth);
  // Message 2 repeats 0 (consistent), 3 repeats 1 (mispredicted).
  auto base = Solution::from_indices(4, {0, 1});
  CHECK(objective_fpp(base, c) == 0.5);
  CHECK(objective_fpp(Solution::from_indices(4, {0, 1, 2}), c) == doctest::Approx(1.0 / 3.0));
  CHECK(objective_fpp(Solution::from_indices(4, {0, 1, 3}), c) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("PU") {
  const std::array<double, 4> flat{0.25, 0.25, 0.25, 0.25};
  auto c = pool({"00000", "00001"}, {onehot(0), flat}, {ResultCode::info, ResultCode::info});
  CHECK(objective_pu(Solution::from_indices(2, {0, 1}), c) == doctest::Approx(kLn4 / 2).epsilon(1e-12));
  CHECK(objective_pu(Solution::from_indices(2, {1}), c) == doctest::Approx(kLn4).epsilon(1e-12));
}

TEST_CASE("all subsets of a 10-message pool match the brute-force oracle") {
  auto c = toy::candidates(10, 3, 21);
  for (std::uint64_t m = 1; m < 1024; ++m) {
    auto idx = toy::bits(m);
    auto got = evaluate_solution(Solution::from_indices(10, idx), c);
    auto want = toy::brute_force(c, idx);
    REQUIRE(got.ss == want.ss);
    REQUIRE(std::fabs(got.cmd - want.cmd) <= 1e-9);
    REQUIRE(std::fabs(got.rcd - want.rcd) <= 1e-9);
    REQUIRE(std::fabs(got.fpp - want.fpp) <= 1e-9);
    REQUIRE(std::fabs(got.pu - want.pu) <= 1e-9);
    CHECK(got.cmd >= 0.0);
    CHECK(got.cmd <= 1.0);
    CHECK(got.rcd <= 0.0);
    CHECK(got.rcd >= -kLn2);
    CHECK(got.pu <= kLn4);
  }
}

TEST_CASE("pool shape checks") {
  auto data = generate_messages(default_schema(), 3, 1, 0.0);
  CHECK_THROWS_AS(make_candidate_set(data, {"R1"}, std::vector<Prediction>(2, Prediction{onehot(0)}),
                                     std::vector<std::vector<ResultCode>>(3, {ResultCode::info})),
                  ShapeError);
  CHECK_THROWS_AS(make_candidate_set(data, {"R1"}, std::vector<Prediction>(3, Prediction{onehot(0), onehot(0)}),
                                     std::vector<std::vector<ResultCode>>(3, {ResultCode::info})),
                  ShapeError);
  auto c = toy::candidates(6, 2, 1);
  CHECK_THROWS_AS(evaluate_solution(Solution(5), c), ShapeError);
}

}  // TEST_SUITE
