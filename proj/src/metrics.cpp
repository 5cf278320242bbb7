#include "elp/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "elp/common.hpp"

namespace elp::eval {

namespace {

std::optional<double> ratio_percent(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> names)
    : class_names(std::move(names)),
      counts(class_names.size() * class_names.size(), 0) {
  if (class_names.empty())
    throw Error("confusion matrix: need at least one class");
}

std::size_t& ConfusionMatrix::at(std::size_t actual, std::size_t predicted) {
  if (actual >= n() || predicted >= n())
    throw Error("confusion matrix: index out of range");
  return counts[actual * n() + predicted];
}

std::size_t ConfusionMatrix::at(std::size_t actual,
                                std::size_t predicted) const {
  if (actual >= n() || predicted >= n())
    throw Error("confusion matrix: index out of range");
  return counts[actual * n() + predicted];
}

void ConfusionMatrix::add(std::size_t actual, std::size_t predicted,
                          std::size_t count) {
  at(actual, predicted) += count;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (std::size_t c : counts) s += c;
  return s;
}

std::size_t ConfusionMatrix::row_sum(std::size_t r) const {
  std::size_t s = 0;
  for (std::size_t c = 0; c < n(); ++c) s += at(r, c);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t c) const {
  std::size_t s = 0;
  for (std::size_t r = 0; r < n(); ++r) s += at(r, c);
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (class_names != other.class_names)
    throw Error("confusion matrix: class name mismatch in sum");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

void ConfusionMatrix::validate() const {
  if (class_names.empty()) throw Error("confusion matrix: empty");
  if (counts.size() != n() * n())
    throw Error("confusion matrix: count size mismatch");
}

ClassMetrics per_class_metrics(const ConfusionMatrix& cm, std::size_t c) {
  cm.validate();
  if (cm.total() == 0) throw Error("per_class_metrics: empty matrix");
  if (c >= cm.n()) throw Error("per_class_metrics: class out of range");

  const std::size_t tp = cm.at(c, c);
  const std::size_t fn = cm.row_sum(c) - tp;
  const std::size_t fp = cm.col_sum(c) - tp;
  const std::size_t tn = cm.total() - tp - fn - fp;

  ClassMetrics m;
  m.acc = ratio_percent(tp + tn, cm.total());
  m.ppv = ratio_percent(tp, tp + fp);
  m.sen = ratio_percent(tp, tp + fn);
  m.spec = ratio_percent(tn, tn + fp);
  m.f1 = f1_score(m.ppv, m.sen);
  return m;
}

std::vector<ClassMetrics> all_class_metrics(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out;
  for (std::size_t c = 0; c < cm.n(); ++c)
    out.push_back(per_class_metrics(cm, c));
  return out;
}

std::optional<double> f1_score(std::optional<double> ppv,
                               std::optional<double> sen) {
  if (!ppv.has_value() || !sen.has_value()) return std::nullopt;
  if (*ppv + *sen == 0.0) return std::nullopt;
  return 2.0 * *ppv * *sen / (*ppv + *sen);
}

std::optional<double> macro_f1(std::span<const ClassMetrics> metrics) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& m : metrics)
    if (m.f1.has_value()) {
      s += *m.f1;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

double overall_accuracy(const ConfusionMatrix& cm) {
  cm.validate();
  const std::size_t total = cm.total();
  if (total == 0) throw Error("overall_accuracy: empty matrix");
  std::size_t trace = 0;
  for (std::size_t c = 0; c < cm.n(); ++c) trace += cm.at(c, c);
  return 100.0 * static_cast<double>(trace) / static_cast<double>(total);
}

std::string format_percent(double value) {
  // Two decimals with ties to even, formatted from the scaled integer so the
  // printf rounding mode never interferes.
  const long long scaled = round_half_even_ll(value * 100.0);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%lld.%02lld", scaled < 0 ? "-" : "",
                std::llabs(scaled) / 100, std::llabs(scaled) % 100);
  return buf;
}

std::string format_percent(const std::optional<double>& value) {
  return value.has_value() ? format_percent(*value) : "-";
}

std::string render_metrics_text(const ConfusionMatrix& cm) {
  cm.validate();
  std::ostringstream out;

  std::size_t name_w = 5;
  for (const auto& n : cm.class_names) name_w = std::max(name_w, n.size());
  std::size_t cell_w = 6;
  for (std::size_t c : cm.counts)
    cell_w = std::max(cell_w, std::to_string(c).size() + 1);

  auto pad = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
  };

  out << "confusion matrix (rows = actual, cols = predicted)\n";
  out << pad("", name_w);
  for (const auto& n : cm.class_names) out << pad(n, cell_w);
  out << "\n";
  for (std::size_t r = 0; r < cm.n(); ++r) {
    out << pad(cm.class_names[r], name_w);
    for (std::size_t c = 0; c < cm.n(); ++c)
      out << pad(std::to_string(cm.at(r, c)), cell_w);
    out << "\n";
  }

  out << "\n"
      << pad("class", name_w) << pad("acc", 8) << pad("ppv", 8)
      << pad("sen", 8) << pad("spec", 8) << pad("f1", 8) << "\n";
  auto metrics = all_class_metrics(cm);
  for (std::size_t c = 0; c < cm.n(); ++c) {
    const auto& m = metrics[c];
    out << pad(cm.class_names[c], name_w) << pad(format_percent(m.acc), 8)
        << pad(format_percent(m.ppv), 8) << pad(format_percent(m.sen), 8)
        << pad(format_percent(m.spec), 8) << pad(format_percent(m.f1), 8)
        << "\n";
  }
  out << "\noverall accuracy " << format_percent(overall_accuracy(cm))
      << "  MF1 " << format_percent(macro_f1(metrics)) << "\n";
  return out.str();
}

}  // namespace elp::eval
