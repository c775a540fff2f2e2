#include "hydemic/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "hydemic/io_util.hpp"

namespace hydemic {

int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), int64_t{0});
}

int64_t ConfusionMatrix::trace() const {
  int64_t t = 0;
  for (int k = 0; k < n_classes; ++k) t += at(k, k);
  return t;
}

ConfusionMatrix confusion_matrix(std::span<const int> true_labels,
                                 std::span<const int> pred_labels, int n_classes) {
  if (true_labels.size() != pred_labels.size()) {
    throw ArgumentError("confusion_matrix: label lists differ in length");
  }
  if (n_classes < 1) throw ArgumentError("confusion_matrix: need >= 1 class");
  ConfusionMatrix m(n_classes);
  for (size_t i = 0; i < true_labels.size(); ++i) {
    const int t = true_labels[i];
    const int p = pred_labels[i];
    if (t < 0 || t >= n_classes || p < 0 || p >= n_classes) {
      throw ArgumentError("confusion_matrix: label out of range at index " +
                          std::to_string(i));
    }
    ++m.at(t, p);
  }
  return m;
}

double mcc_multiclass(const ConfusionMatrix& m) {
  const int64_t s = m.total();
  if (s == 0) throw ArgumentError("mcc_multiclass: empty confusion matrix");
  const int64_t c = m.trace();
  if (c == s) return 1.0;  // perfect agreement, exact by definition

  double sum_pt = 0.0, sum_pp = 0.0, sum_tt = 0.0;
  for (int k = 0; k < m.n_classes; ++k) {
    int64_t t_k = 0, p_k = 0;
    for (int l = 0; l < m.n_classes; ++l) {
      t_k += m.at(k, l);
      p_k += m.at(l, k);
    }
    sum_pt += static_cast<double>(p_k) * static_cast<double>(t_k);
    sum_pp += static_cast<double>(p_k) * static_cast<double>(p_k);
    sum_tt += static_cast<double>(t_k) * static_cast<double>(t_k);
  }

  const double sd = static_cast<double>(s);
  const double den1 = sd * sd - sum_pp;
  const double den2 = sd * sd - sum_tt;
  if (den1 <= 0.0 || den2 <= 0.0) return 0.0;  // all-one-class prediction/truth

  const double num = static_cast<double>(c) * sd - sum_pt;
  const double mcc = num / (std::sqrt(den1) * std::sqrt(den2));
  return std::clamp(mcc, -1.0, 1.0);
}

double tpr(std::span<const int> true_labels, std::span<const int> pred_labels) {
  if (true_labels.empty()) throw ArgumentError("tpr: empty input");
  if (true_labels.size() != pred_labels.size()) {
    throw ArgumentError("tpr: label lists differ in length");
  }
  int64_t correct = 0;
  for (size_t i = 0; i < true_labels.size(); ++i) {
    if (true_labels[i] == pred_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(true_labels.size());
}

std::vector<double> prediction_confidence(const nn::FeatureMap& probabilities) {
  if (probabilities.length != 1) {
    throw ArgumentError("prediction_confidence: expected flat probability rows");
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(probabilities.batch));
  for (int b = 0; b < probabilities.batch; ++b) {
    const double* row = probabilities.row(b, 0);
    double sum = 0.0, best = 0.0;
    for (int c = 0; c < probabilities.channels; ++c) {
      sum += row[c];
      best = std::max(best, row[c]);
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ArgumentError("prediction_confidence: row " + std::to_string(b) +
                          " is not a probability vector (sum " + format_double(sum) +
                          ")");
    }
    out.push_back(100.0 * best);
  }
  return out;
}

namespace {

// Linear-interpolation quantile at position p*(n-1) over sorted values.
double quantile_sorted(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

double fd_bin_width(std::span<const double> values) {
  if (values.size() < 2) {
    throw ArgumentError("fd_bin_width: need at least 2 values");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double width = 2.0 * iqr *
                 std::pow(static_cast<double>(values.size()), -1.0 / 3.0);
  if (width <= 0.0) width = kFallbackBinWidth;
  return std::min(width, kMaxBinWidth);
}

DensityHistogram confidence_histogram(std::span<const ConfidenceRecord> records,
                                      PredGroup group) {
  std::vector<double> values;
  for (const auto& r : records) {
    if ((group == PredGroup::correct) == r.correct) {
      values.push_back(r.confidence_percent);
    }
  }

  DensityHistogram hist;
  hist.group = group;
  hist.n = static_cast<int64_t>(values.size());
  if (values.empty()) return hist;

  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *min_it;
  const double hi = *max_it;
  const double width =
      (values.size() < 2 || hi == lo) ? kFallbackBinWidth
                                      : fd_bin_width(values);

  const int n_bins =
      hi == lo ? 1
               : static_cast<int>(std::max(1.0, std::ceil((hi - lo) / width)));
  hist.bin_edges.resize(static_cast<size_t>(n_bins) + 1);
  for (int i = 0; i <= n_bins; ++i) {
    hist.bin_edges[static_cast<size_t>(i)] = lo + width * i;
  }

  std::vector<int64_t> counts(static_cast<size_t>(n_bins), 0);
  for (double v : values) {
    // right-open bins, last bin right-closed
    int idx = static_cast<int>(std::floor((v - lo) / width));
    idx = std::clamp(idx, 0, n_bins - 1);
    ++counts[static_cast<size_t>(idx)];
  }

  hist.densities.resize(static_cast<size_t>(n_bins));
  const double norm = static_cast<double>(hist.n) * width;
  for (int i = 0; i < n_bins; ++i) {
    hist.densities[static_cast<size_t>(i)] =
        static_cast<double>(counts[static_cast<size_t>(i)]) / norm;
  }
  return hist;
}

EvaluationReport evaluation_report(const MineralMap& map,
                                   std::span<const int> truth, int n_classes) {
  const size_t n = map.classes.size();
  if (truth.size() != n ||
      n != static_cast<size_t>(map.height) * static_cast<size_t>(map.width)) {
    throw ArgumentError("evaluation_report: map and truth dimensions differ");
  }

  EvaluationReport report;
  report.n_classes = n_classes;
  report.confusion = confusion_matrix(truth, map.classes, n_classes);
  report.mcc = mcc_multiclass(report.confusion);
  report.tpr = tpr(truth, map.classes);

  report.records.reserve(n);
  std::vector<double> confidences;
  confidences.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    ConfidenceRecord r;
    r.pixel_index = static_cast<int>(i);
    r.confidence_percent = map.confidence[i];
    r.true_class = truth[i];
    r.pred_class = map.classes[i];
    r.correct = r.true_class == r.pred_class;
    report.records.push_back(r);
    confidences.push_back(r.confidence_percent);
    if (r.correct) {
      ++report.n_correct;
    } else {
      ++report.n_incorrect;
    }
  }

  report.mean_confidence =
      std::accumulate(confidences.begin(), confidences.end(), 0.0) /
      static_cast<double>(n);
  std::sort(confidences.begin(), confidences.end());
  report.median_confidence =
      n % 2 == 1 ? confidences[n / 2]
                 : 0.5 * (confidences[n / 2 - 1] + confidences[n / 2]);

  report.hist_correct = confidence_histogram(report.records, PredGroup::correct);
  report.hist_incorrect = confidence_histogram(report.records, PredGroup::incorrect);
  return report;
}

std::string report_to_json_text(const EvaluationReport& report) {
  nlohmann::json j;
  j["n_classes"] = report.n_classes;
  j["n_pixels"] = report.n_correct + report.n_incorrect;
  j["n_correct"] = report.n_correct;
  j["n_incorrect"] = report.n_incorrect;
  j["mcc"] = report.mcc;
  j["tpr"] = report.tpr;
  j["mean_confidence_percent"] = report.mean_confidence;
  j["median_confidence_percent"] = report.median_confidence;

  nlohmann::json confusion = nlohmann::json::array();
  for (int t = 0; t < report.confusion.n_classes; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < report.confusion.n_classes; ++p) {
      row.push_back(report.confusion.at(t, p));
    }
    confusion.push_back(std::move(row));
  }
  j["confusion_matrix"] = std::move(confusion);

  const auto hist_json = [](const DensityHistogram& h) {
    return nlohmann::json{{"n", h.n},
                          {"bin_edges", h.bin_edges},
                          {"densities", h.densities}};
  };
  j["confidence_histogram"] = {{"correct", hist_json(report.hist_correct)},
                               {"incorrect", hist_json(report.hist_incorrect)}};
  return j.dump(2) + "\n";
}

}  // namespace hydemic
