#include "demnet/metrics.hpp"

#include <cstdio>
#include "json.hpp"

#include "demnet/errors.hpp"

namespace demnet {

std::uint64_t ConfusionMatrix4::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts)
    for (auto v : row) t += v;
  return t;
}

std::uint64_t ConfusionMatrix4::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) t += counts[i][i];
  return t;
}

std::uint64_t ConfusionMatrix4::row_sum(std::size_t c) const {
  std::uint64_t t = 0;
  for (auto v : counts.at(c)) t += v;
  return t;
}

std::uint64_t ConfusionMatrix4::column_sum(std::size_t c) const {
  std::uint64_t t = 0;
  for (const auto& row : counts) t += row.at(c);
  return t;
}

ConfusionMatrix4 confusion_matrix(const std::vector<std::size_t>& y_true,
                                  const std::vector<std::size_t>& y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw ValueError("confusion matrix: " + std::to_string(y_true.size()) + " true labels but " +
                     std::to_string(y_pred.size()) + " predictions");
  }
  ConfusionMatrix4 cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= kNumClasses || y_pred[i] >= kNumClasses) {
      throw ValueError("confusion matrix: label outside [0, 4) at position " + std::to_string(i));
    }
    ++cm.counts[y_true[i]][y_pred[i]];
  }
  return cm;
}

ConfusionCounts one_vs_rest_counts(const ConfusionMatrix4& cm, std::size_t cls) {
  if (cls >= kNumClasses) throw ValueError("class index outside [0, 4)");
  ConfusionCounts c;
  c.tp = cm.counts[cls][cls];
  c.fn = cm.row_sum(cls) - c.tp;
  c.fp = cm.column_sum(cls) - c.tp;
  c.tn = cm.total() - c.tp - c.fn - c.fp;
  return c;
}

ClassMetrics class_metrics(const ConfusionCounts& counts) {
  ClassMetrics m;
  const auto tp = static_cast<double>(counts.tp);
  if (counts.tp + counts.fp > 0) {
    m.precision = tp / static_cast<double>(counts.tp + counts.fp);
  } else {
    m.undefined = true;
  }
  if (counts.tp + counts.fn > 0) {
    m.recall = tp / static_cast<double>(counts.tp + counts.fn);
  } else {
    m.undefined = true;
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.undefined = true;
  }
  if (counts.total() > 0) {
    m.binary_accuracy =
        static_cast<double>(counts.tp + counts.tn) / static_cast<double>(counts.total());
  }
  m.support = counts.tp + counts.fn;
  return m;
}

MetricsReport compute_metrics(const ConfusionMatrix4& cm) {
  const auto total = cm.total();
  if (total == 0) throw ValueError("cannot compute metrics for an empty confusion matrix");
  MetricsReport r;
  r.total = total;
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    r.per_class[c] = class_metrics(one_vs_rest_counts(cm, c));
    r.any_undefined = r.any_undefined || r.per_class[c].undefined;
  }
  return r;
}

std::string render_report_table(const MetricsReport& report,
                                const std::vector<std::string>& class_labels) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %9s %9s %9s\n", "Diseases", "Precision", "Recall",
                "F1-score");
  out += line;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& m = report.per_class[c];
    const std::string name = c < class_labels.size() ? class_labels[c] : std::to_string(c);
    std::snprintf(line, sizeof(line), "%-10s %9.2f %9.2f %9.2f\n", name.c_str(), m.precision,
                  m.recall, m.f1);
    out += line;
  }
  std::snprintf(line, sizeof(line), "\nAccuracy   %9.2f  (%llu samples)\n", report.accuracy,
                static_cast<unsigned long long>(report.total));
  out += line;
  return out;
}

std::string metrics_json(const MetricsReport& report, const ConfusionMatrix4& cm,
                         const std::vector<std::string>& class_names) {
  nlohmann::ordered_json doc;
  doc["accuracy"] = report.accuracy;
  doc["total"] = report.total;
  doc["any_undefined"] = report.any_undefined;
  auto& classes = doc["classes"];
  classes = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& m = report.per_class[c];
    nlohmann::ordered_json entry;
    entry["name"] = c < class_names.size() ? class_names[c] : std::to_string(c);
    entry["precision"] = m.precision;
    entry["recall"] = m.recall;
    entry["f1"] = m.f1;
    entry["binary_accuracy"] = m.binary_accuracy;
    entry["support"] = m.support;
    entry["undefined"] = m.undefined;
    classes.push_back(entry);
  }
  auto& matrix = doc["confusion_matrix"];
  matrix = nlohmann::ordered_json::array();
  for (const auto& row : cm.counts) matrix.push_back(row);
  return doc.dump(2) + "\n";
}

std::string confusion_csv(const ConfusionMatrix4& cm, const std::vector<std::string>& class_names) {
  auto name = [&](std::size_t c) {
    return c < class_names.size() ? class_names[c] : std::to_string(c);
  };
  std::string out = "true\\predicted";
  for (std::size_t c = 0; c < kNumClasses; ++c) out += "," + name(c);
  out += "\n";
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    out += name(r);
    for (std::size_t c = 0; c < kNumClasses; ++c) out += "," + std::to_string(cm.counts[r][c]);
    out += "\n";
  }
  return out;
}

}  // namespace demnet
