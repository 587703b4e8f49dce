#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ccdt/json.hpp"
#include "ccdt/result_code.hpp"

namespace ccdt {

/// One-vs-rest counts per result code over flattened (message, rule) pairs.
struct ConfusionCounts {
  std::array<std::size_t, 4> tp{}, fp{}, fn{};
  std::size_t pairs = 0;
  // Codes seen in either truths or predictions.
  std::array<bool, 4> present{};
};

/// Throws ShapeError when the shapes differ.
ConfusionCounts confusion(const std::vector<std::vector<ResultCode>>& preds,
                          const std::vector<std::vector<ResultCode>>& truths);
ConfusionCounts confusion(std::span<const ResultCode> preds, std::span<const ResultCode> truths);

/// TP/(TP+FP), TP/(TP+FN) and their harmonic mean; 0 on a zero denominator.
double precision(std::size_t tp, std::size_t fp);
double recall(std::size_t tp, std::size_t fn);
double f1(double precision, double recall);

struct MetricsReport {
  std::string scope;  // "all", "base" or a rule id
  std::array<double, 4> precision{}, recall{}, f1{};
  // Mean over the codes present in the scope.
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  // From pooled counts; all three equal accuracy for single-label data.
  double micro_precision = 0.0, micro_recall = 0.0, micro_f1 = 0.0;
  std::size_t pairs = 0;
};

MetricsReport metrics(const ConfusionCounts& counts, std::string scope = "all");
Json metrics_to_json(const MetricsReport& m);

struct StatTestResult {
  double u = 0.0;        // U of the first sample
  double p_value = 1.0;  // two-sided
  double a12 = 0.5;
  std::size_t n1 = 0, n2 = 0;
};

/// Two-sided Mann-Whitney U with mid-ranks, tie-corrected normal
/// approximation and continuity correction. Requires at least 3 values per
/// sample (ConfigError otherwise); p = 1 when all values are equal.
StatTestResult mann_whitney(std::span<const double> a, std::span<const double> b);

/// Vargha-Delaney A12: P(a > b) + 0.5 P(a = b).
double a12(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation with mid-ranks (Pearson on ranks).
double spearman(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> values);

Json stat_to_json(const StatTestResult& s);

}  // namespace ccdt
