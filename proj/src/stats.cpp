#include "ccdt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccdt/error.hpp"

namespace ccdt {

ConfusionCounts confusion(std::span<const ResultCode> preds, std::span<const ResultCode> truths) {
  if (preds.size() != truths.size()) throw ShapeError("predictions and truths differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto p = index_of(preds[i]), t = index_of(truths[i]);
    c.present[p] = c.present[t] = true;
    if (p == t) {
      ++c.tp[p];
    } else {
      ++c.fp[p];
      ++c.fn[t];
    }
  }
  c.pairs = preds.size();
  return c;
}

ConfusionCounts confusion(const std::vector<std::vector<ResultCode>>& preds,
                          const std::vector<std::vector<ResultCode>>& truths) {
  if (preds.size() != truths.size()) throw ShapeError("predictions and truths differ in message count");
  ConfusionCounts total;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != truths[i].size())
      throw ShapeError("message " + std::to_string(i) + ": predictions and truths differ in rule count");
    auto c = confusion(std::span<const ResultCode>(preds[i]), std::span<const ResultCode>(truths[i]));
    for (std::size_t k = 0; k < 4; ++k) {
      total.tp[k] += c.tp[k];
      total.fp[k] += c.fp[k];
      total.fn[k] += c.fn[k];
      total.present[k] = total.present[k] || c.present[k];
    }
    total.pairs += c.pairs;
  }
  return total;
}

double precision(std::size_t tp, std::size_t fp) {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double recall(std::size_t tp, std::size_t fn) {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

MetricsReport metrics(const ConfusionCounts& c, std::string scope) {
  MetricsReport m;
  m.scope = std::move(scope);
  m.pairs = c.pairs;
  std::size_t present = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    m.precision[k] = precision(c.tp[k], c.fp[k]);
    m.recall[k] = recall(c.tp[k], c.fn[k]);
    m.f1[k] = f1(m.precision[k], m.recall[k]);
    tp += c.tp[k];
    fp += c.fp[k];
    fn += c.fn[k];
    if (!c.present[k]) continue;
    ++present;
    m.macro_precision += m.precision[k];
    m.macro_recall += m.recall[k];
    m.macro_f1 += m.f1[k];
  }
  if (present > 0) {
    m.macro_precision /= static_cast<double>(present);
    m.macro_recall /= static_cast<double>(present);
    m.macro_f1 /= static_cast<double>(present);
  }
  m.micro_precision = precision(tp, fp);
  m.micro_recall = recall(tp, fn);
  m.micro_f1 = f1(m.micro_precision, m.micro_recall);
  return m;
}

Json metrics_to_json(const MetricsReport& m) {
  Json j;
  j["scope"] = m.scope;
  j["pairs"] = m.pairs;
  Json per = Json::object();
  for (std::size_t k = 0; k < 4; ++k) {
    per[std::string(to_string(code_at(k)))] = {
        {"precision", m.precision[k]}, {"recall", m.recall[k]}, {"f1", m.f1[k]}};
  }
  j["per_code"] = std::move(per);
  j["macro"] = {{"precision", m.macro_precision}, {"recall", m.macro_recall}, {"f1", m.macro_f1}};
  j["micro"] = {{"precision", m.micro_precision}, {"recall", m.micro_recall}, {"f1", m.micro_f1}};
  return j;
}

namespace {

// Mid-ranks (1-based) of `v`; `tie_term` receives sum(t^3 - t) over tie groups.
std::vector<double> ranks(std::span<const double> v, double* tie_term = nullptr) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  double ties = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mid;
    const auto t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  if (tie_term) *tie_term = ties;
  return r;
}

}  // namespace

double a12(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("A12 needs non-empty samples");
  double wins = 0.0;
  for (double x : a)
    for (double y : b) wins += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  return wins / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

StatTestResult mann_whitney(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 3 || b.size() < 3) throw ConfigError("Mann-Whitney needs at least 3 values per sample");
  StatTestResult res;
  res.n1 = a.size();
  res.n2 = b.size();
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  double tie_term = 0.0;
  const auto r = ranks(pooled, &tie_term);
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  double r1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r1 += r[i];
  res.u = r1 - n1 * (n1 + 1.0) / 2.0;
  res.a12 = a12(a, b);
  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) {
    res.p_value = 1.0;
    return res;
  }
  const double z = std::max(0.0, std::fabs(res.u - mu) - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("Spearman needs two equal-length samples of size >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Json stat_to_json(const StatTestResult& s) {
  return Json{{"U", s.u}, {"p_value", s.p_value}, {"A12", s.a12}, {"n1", s.n1}, {"n2", s.n2}};
}

}  // namespace ccdt
