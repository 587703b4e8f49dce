#include <cmath>

#include "ccdt/error.hpp"
#include "ccdt/model.hpp"
#include "ccdt/network.hpp"
#include "ccdt/random.hpp"
#include "support.hpp"

using namespace ccdt;

namespace {

ArchConfig small_arch() {
  ArchConfig a;
  a.filters = {2, 3, 4, 4};
  a.dense = 6;
  a.head = 5;
  return a;
}

FeatureVector random_input(std::size_t l1, std::size_t l2, Rng& rng) {
  FeatureVector fv;
  for (std::size_t i = 0; i < l1; ++i) fv.branch1.push_back(static_cast<float>(uniform01(rng)));
  for (std::size_t i = 0; i < l2; ++i) fv.branch2.push_back(static_cast<float>(uniform_real(rng, -1, 1)));
  return fv;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("layout sizes") {
  ArchConfig a;
  auto l = ParamLayout::build(a, 20, 32);
  // conv1: 16*1*3+16, conv2: 32*16*3+32, conv3: 64*32*3+64, conv4: 64*64*3+64
  const std::size_t convs = (48 + 16) + (1536 + 32) + (6144 + 64) + (12288 + 64);
  const std::size_t dense1 = 200 * 64 * 10 + 200, dense2 = 200 * 64 * 16 + 200;
  const std::size_t head = 64 * 400 + 64 + 4 * 64 + 4;
  CHECK(l.total == 2 * convs + dense1 + dense2 + head);
  CHECK(l.pooled_length[0] == 10);
  CHECK(l.pooled_length[1] == 16);
}

TEST_CASE("init is deterministic and bounded by fan-in") {
  auto a = init_module(3, 24, 24, small_arch());
  auto b = init_module(3, 24, 24, small_arch());
  auto c = init_module(4, 24, 24, small_arch());
  CHECK(a.params == b.params);
  CHECK(a.params != c.params);
  for (const auto& layer : a.layout.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.fan_in));
    for (std::size_t i = 0; i < layer.weight_size; ++i) CHECK(std::fabs(a.params[layer.weight_offset + i]) <= bound);
    for (std::size_t i = 0; i < layer.bias_size; ++i) CHECK(a.params[layer.bias_offset + i] == 0.0f);
  }
  CHECK_THROWS_AS(init_module(1, 2, 24, ArchConfig{.kernel = 3}), ShapeError);
  CHECK_THROWS_AS(init_module(1, 24, 1, small_arch()), ShapeError);
}

TEST_CASE("forward outputs a distribution") {
  Rng rng(5);
  auto m = init_module(9, 20, 32, small_arch());
  Workspace<float> ws;
  for (int t = 0; t < 200; ++t) {
    auto fv = random_input(20, 32, rng);
    auto p = forward(m, fv.branch1, fv.branch2, ws);
    double sum = 0;
    for (double v : p) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-6);
  }
  std::vector<float> z1(20, 0.0f), z2(32, 0.0f);
  auto p1 = forward(m, z1, z2, ws);
  auto p2 = forward(m, z1, z2, ws);
  CHECK(p1 == p2);
  std::vector<float> wrong(19, 0.0f);
  CHECK_THROWS_AS(forward(m, wrong, z2, ws), ShapeError);
}

TEST_CASE("softmax of equal logits is uniform") {
  auto p = softmax({3.0, 3.0, 3.0, 3.0});
  for (double v : p) CHECK(v == 0.25);
  auto q = softmax({1000.0, 0.0, 0.0, 0.0});
  CHECK(std::isfinite(q[0]));
}

TEST_CASE("zero output layer gives p - onehot at the logits") {
  Rng rng(2);
  auto m = init_module(1, 24, 24, small_arch());
  const auto& out = m.layout.head_out;
  std::fill(m.params.begin() + static_cast<std::ptrdiff_t>(out.weight_offset),
            m.params.begin() + static_cast<std::ptrdiff_t>(out.bias_offset + out.bias_size), 0.0f);
  auto fv = random_input(24, 24, rng);
  Workspace<float> ws;
  auto p = forward(m, fv.branch1, fv.branch2, ws);
  for (double v : p) CHECK(v == 0.25);
  std::vector<float> grad(m.params.size(), 0.0f);
  backward(m, ws, 2, 1.0f, grad);
  const float expect[4] = {0.25f, 0.25f, -0.75f, 0.25f};
  for (std::size_t k = 0; k < 4; ++k) CHECK(grad[out.bias_offset + k] == doctest::Approx(expect[k]));
  // weight gradient is (p - onehot) times the hidden activation
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t h = 0; h < m.arch.head; ++h)
      CHECK(grad[out.weight_offset + k * m.arch.head + h] ==
            doctest::Approx(expect[k] * ws.hidden[h]).epsilon(1e-6));
}

TEST_CASE("gradient check on random small modules") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    auto m = init_module(100 + trial, 24, 24, small_arch());
    auto fv = random_input(24, 24, rng);
    auto r = gradient_check(m, fv, static_cast<std::size_t>(trial % 4), 1e-5);
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.checked > r.skipped);
  }
  CHECK_THROWS_AS(gradient_check(init_module(1, 24, 24, small_arch()), random_input(24, 24, rng), 0, 1e-2),
                  ConfigError);
}

TEST_CASE("central differences converge at second order") {
  Rng rng(17);
  auto m32 = init_module(7, 24, 24, small_arch());
  auto fv = random_input(24, 24, rng);
  auto m = convert_module<long double>(m32);
  Workspace<long double> ws;
  forward(m, fv.branch1, fv.branch2, ws);
  const auto pattern = ws.activation_pattern();
  auto estimate = [&](std::size_t i, long double eps, bool& kink) {
    const auto saved = m.params[i];
    m.params[i] = saved + eps;
    forward(m, fv.branch1, fv.branch2, ws);
    kink = kink || ws.activation_pattern() != pattern;
    const auto plus = cross_entropy(ws.logits, 1);
    m.params[i] = saved - eps;
    forward(m, fv.branch1, fv.branch2, ws);
    kink = kink || ws.activation_pattern() != pattern;
    const auto minus = cross_entropy(ws.logits, 1);
    m.params[i] = saved;
    return (plus - minus) / (2 * eps);
  };
  std::size_t compared = 0;
  for (std::size_t i = 0; i < m.params.size(); i += 7) {
    bool kink = false;
    const long double e = 1e-3L;
    auto g1 = estimate(i, e, kink);
    auto g2 = estimate(i, 2 * e, kink);
    auto g4 = estimate(i, 4 * e, kink);
    if (kink) continue;
    // Error terms scale with eps^2: successive differences shrink by ~4.
    const long double d1 = std::fabs(g2 - g1), d2 = std::fabs(g4 - g2);
    if (d2 < 1e-12L) continue;
    CHECK(static_cast<double>(d2 / d1) == doctest::Approx(4.0).epsilon(0.05));
    ++compared;
  }
  CHECK(compared > 10);
}

}  // TEST_SUITE
