#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hydemic/model.hpp"
#include "hydemic/nn.hpp"

namespace hydemic {

struct ConfusionMatrix {
  int n_classes = 0;
  std::vector<int64_t> counts;  // row = true class, column = predicted

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes)
      : n_classes(classes),
        counts(static_cast<size_t>(classes) * classes, 0) {}

  int64_t& at(int true_class, int pred_class) {
    return counts[static_cast<size_t>(true_class) * n_classes + pred_class];
  }
  int64_t at(int true_class, int pred_class) const {
    return counts[static_cast<size_t>(true_class) * n_classes + pred_class];
  }
  int64_t total() const;
  int64_t trace() const;
};

ConfusionMatrix confusion_matrix(std::span<const int> true_labels,
                                 std::span<const int> pred_labels, int n_classes);

// Multiclass MCC in covariance form: with c = trace, s = total, t_k = row
// sums and p_k = column sums,
//   (c*s - sum_k p_k t_k) / sqrt((s^2 - sum p_k^2) (s^2 - sum t_k^2)).
// Degenerate denominators (single predicted or single true class) yield 0;
// a perfect diagonal yields exactly 1.
double mcc_multiclass(const ConfusionMatrix& m);

// Micro-averaged recall: correct / total.
double tpr(std::span<const int> true_labels, std::span<const int> pred_labels);

// Per row, 100 * max entry. Rows must sum to 1 within 1e-6.
std::vector<double> prediction_confidence(const nn::FeatureMap& probabilities);

// Freedman-Diaconis width 2*IQR*n^(-1/3) with the linear-interpolation
// quantile estimator; falls back to 1.0 when IQR is 0 and is capped at 5.0
// percentage points.
double fd_bin_width(std::span<const double> values);

inline constexpr double kFallbackBinWidth = 1.0;
inline constexpr double kMaxBinWidth = 5.0;

struct ConfidenceRecord {
  int pixel_index = 0;
  double confidence_percent = 0.0;
  bool correct = false;
  int true_class = 0;
  int pred_class = 0;
};

enum class PredGroup { correct, incorrect };

struct DensityHistogram {
  std::vector<double> bin_edges;  // n_bins + 1, uniform width
  std::vector<double> densities;  // N_i / (N * width)
  PredGroup group = PredGroup::correct;
  int64_t n = 0;
};

// Uniform bins covering [min, max] of the group's confidences; density per
// bin is N_i / (N * width) so the histogram integrates to one. An empty
// group yields an empty histogram with n = 0.
DensityHistogram confidence_histogram(std::span<const ConfidenceRecord> records,
                                      PredGroup group);

struct EvaluationReport {
  int n_classes = 0;
  ConfusionMatrix confusion;
  double mcc = 0.0;
  double tpr = 0.0;
  int64_t n_correct = 0;
  int64_t n_incorrect = 0;
  double mean_confidence = 0.0;
  double median_confidence = 0.0;
  DensityHistogram hist_correct;
  DensityHistogram hist_incorrect;
  std::vector<ConfidenceRecord> records;
};

EvaluationReport evaluation_report(const MineralMap& map,
                                   std::span<const int> truth, int n_classes);

std::string report_to_json_text(const EvaluationReport& report);

}  // namespace hydemic
