#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace demnet {

inline constexpr std::size_t kNumClasses = 4;

/// counts[true][predicted].
struct ConfusionMatrix4 {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t c) const;
  std::uint64_t column_sum(std::size_t c) const;

  friend bool operator==(const ConfusionMatrix4&, const ConfusionMatrix4&) = default;
};

/// One-vs-rest tallies for one class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// (TP + TN) / total for this class's one-vs-rest counts.
  double binary_accuracy = 0.0;
  std::uint64_t support = 0;
  /// Set when a zero denominator forced precision, recall or F1 to 0.
  bool undefined = false;
};

struct MetricsReport {
  std::array<ClassMetrics, kNumClasses> per_class{};
  /// trace / total.
  double accuracy = 0.0;
  std::uint64_t total = 0;
  bool any_undefined = false;
};

/// Throws ValueError on a length mismatch or a label outside [0, 4).
ConfusionMatrix4 confusion_matrix(const std::vector<std::size_t>& y_true,
                                  const std::vector<std::size_t>& y_pred);

/// TP = cm[c][c], FN = row c - TP, FP = column c - TP, TN = the rest.
ConfusionCounts one_vs_rest_counts(const ConfusionMatrix4& cm, std::size_t cls);

/// precision = TP / (TP + FP), recall = TP / (TP + FN),
/// F1 = 2PR / (P + R), accuracy = (TP + TN) / total. A zero denominator
/// yields 0 and sets `undefined`.
ClassMetrics class_metrics(const ConfusionCounts& counts);

/// Throws ValueError for an empty matrix.
MetricsReport compute_metrics(const ConfusionMatrix4& cm);

/// Fixed-width table with columns Diseases, Precision, Recall, F1-score and
/// two decimals per value.
std::string render_report_table(const MetricsReport& report,
                                const std::vector<std::string>& class_labels);

/// Full-precision JSON document.
std::string metrics_json(const MetricsReport& report, const ConfusionMatrix4& cm,
                         const std::vector<std::string>& class_names);

/// 4x4 CSV, header row and column of class names.
std::string confusion_csv(const ConfusionMatrix4& cm, const std::vector<std::string>& class_names);

}  // namespace demnet
