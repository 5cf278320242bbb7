#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace elp::eval {

// Square count matrix; rows are actual classes, columns predicted.
struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<std::size_t> counts;  // n*n row-major

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> names);

  std::size_t n() const { return class_names.size(); }
  std::size_t& at(std::size_t actual, std::size_t predicted);
  std::size_t at(std::size_t actual, std::size_t predicted) const;
  void add(std::size_t actual, std::size_t predicted, std::size_t count = 1);

  std::size_t total() const;
  std::size_t row_sum(std::size_t r) const;
  std::size_t col_sum(std::size_t c) const;

  // Elementwise sum; class names must match.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  void validate() const;
};

// One-vs-rest metrics in percent. A division with zero denominator leaves
// the metric absent rather than zero.
struct ClassMetrics {
  std::optional<double> acc;
  std::optional<double> ppv;
  std::optional<double> sen;
  std::optional<double> spec;
  std::optional<double> f1;
};

ClassMetrics per_class_metrics(const ConfusionMatrix& cm, std::size_t c);
std::vector<ClassMetrics> all_class_metrics(const ConfusionMatrix& cm);

// F1 = 2*ppv*sen/(ppv+sen), absent when either input is absent or both are
// zero.
std::optional<double> f1_score(std::optional<double> ppv,
                               std::optional<double> sen);

// Unweighted mean over classes whose F1 is defined.
std::optional<double> macro_f1(std::span<const ClassMetrics> metrics);

double overall_accuracy(const ConfusionMatrix& cm);  // percent

// Percent formatting: two decimals, ties to even; absent values print "-".
std::string format_percent(double value);
std::string format_percent(const std::optional<double>& value);

// Aligned-text confusion matrix + per-class table + overall accuracy + MF1.
std::string render_metrics_text(const ConfusionMatrix& cm);

}  // namespace elp::eval
