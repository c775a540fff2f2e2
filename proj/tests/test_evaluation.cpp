#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hydemic/evaluation.hpp"
#include "hydemic/rng.hpp"
#include "oracles.hpp"

using namespace hydemic;

TEST_CASE("confusion matrix counting") {
  SUBCASE("perfect diagonal") {
    std::vector<int> t = {0, 1, 2};
    ConfusionMatrix m = confusion_matrix(t, t, 3);
    CHECK(m.trace() == 3);
    CHECK(m.total() == 3);
  }
  SUBCASE("all wrong") {
    std::vector<int> t = {0, 0};
    std::vector<int> p = {1, 1};
    ConfusionMatrix m = confusion_matrix(t, p, 2);
    CHECK(m.at(0, 1) == 2);
    CHECK(m.trace() == 0);
  }
  SUBCASE("row sums equal true-class frequencies (property)") {
    Rng rng(2);
    std::vector<int> t, p;
    std::vector<int64_t> freq(6, 0);
    for (int i = 0; i < 500; ++i) {
      t.push_back(static_cast<int>(rng() % 6));
      p.push_back(static_cast<int>(rng() % 6));
      ++freq[static_cast<size_t>(t.back())];
    }
    ConfusionMatrix m = confusion_matrix(t, p, 6);
    for (int k = 0; k < 6; ++k) {
      int64_t row = 0;
      for (int l = 0; l < 6; ++l) row += m.at(k, l);
      CHECK(row == freq[static_cast<size_t>(k)]);
    }
  }
  SUBCASE("errors") {
    std::vector<int> t = {0};
    std::vector<int> p = {0, 1};
    CHECK_THROWS_AS(confusion_matrix(t, p, 2), ArgumentError);
    std::vector<int> bad = {5};
    std::vector<int> ok = {0};
    CHECK_THROWS_AS(confusion_matrix(bad, ok, 2), ArgumentError);
  }
}

TEST_CASE("multiclass mcc") {
  SUBCASE("any positive diagonal is exactly 1") {
    ConfusionMatrix m(4);
    m.at(0, 0) = 3;
    m.at(1, 1) = 17;
    m.at(2, 2) = 1;
    m.at(3, 3) = 400;
    CHECK(mcc_multiclass(m) == 1.0);
  }
  SUBCASE("degenerate single-class prediction returns 0") {
    ConfusionMatrix m(3);
    m.at(0, 1) = 5;
    m.at(1, 1) = 5;
    m.at(2, 1) = 5;
    CHECK(mcc_multiclass(m) == 0.0);
  }
  SUBCASE("empty matrix throws") {
    ConfusionMatrix m(2);
    CHECK_THROWS_AS(mcc_multiclass(m), ArgumentError);
  }
  SUBCASE("matches the binary formula on random 2x2 matrices") {
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
      ConfusionMatrix m(2);
      m.at(0, 0) = static_cast<int64_t>(rng() % 10000);
      m.at(0, 1) = static_cast<int64_t>(rng() % 10000);
      m.at(1, 0) = static_cast<int64_t>(rng() % 10000);
      m.at(1, 1) = static_cast<int64_t>(rng() % 10000);
      if (m.total() == 0) continue;
      const double want = oracles::binary_mcc(
          static_cast<double>(m.at(0, 0)), static_cast<double>(m.at(0, 1)),
          static_cast<double>(m.at(1, 0)), static_cast<double>(m.at(1, 1)));
      const double got = mcc_multiclass(m);
      if (m.trace() == m.total()) {
        CHECK(got == 1.0);
      } else {
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
  SUBCASE("invariant under simultaneous row/column permutation") {
    Rng rng(31);
    ConfusionMatrix m(5);
    for (int t = 0; t < 5; ++t) {
      for (int p = 0; p < 5; ++p) m.at(t, p) = static_cast<int64_t>(rng() % 50);
    }
    std::vector<int> perm = {3, 0, 4, 1, 2};
    ConfusionMatrix shuffled(5);
    for (int t = 0; t < 5; ++t) {
      for (int p = 0; p < 5; ++p) {
        shuffled.at(perm[static_cast<size_t>(t)], perm[static_cast<size_t>(p)]) =
            m.at(t, p);
      }
    }
    CHECK(mcc_multiclass(m) == doctest::Approx(mcc_multiclass(shuffled)).epsilon(1e-14));
  }
}

TEST_CASE("tpr is micro-averaged recall") {
  std::vector<int> t = {0, 1, 2, 3};
  SUBCASE("all correct") { CHECK(tpr(t, t) == 1.0); }
  SUBCASE("half correct") {
    std::vector<int> p = {0, 1, 0, 0};
    CHECK(tpr(t, p) == 0.5);
  }
  SUBCASE("equals trace over total of the matching confusion matrix") {
    Rng rng(9);
    std::vector<int> truth, pred;
    for (int i = 0; i < 200; ++i) {
      truth.push_back(static_cast<int>(rng() % 4));
      pred.push_back(static_cast<int>(rng() % 4));
    }
    ConfusionMatrix m = confusion_matrix(truth, pred, 4);
    CHECK(tpr(truth, pred) ==
          doctest::Approx(static_cast<double>(m.trace()) /
                          static_cast<double>(m.total())));
  }
  SUBCASE("empty input throws") {
    CHECK_THROWS_AS(tpr({}, {}), ArgumentError);
  }
}

TEST_CASE("prediction confidence") {
  SUBCASE("max entry in percent") {
    nn::FeatureMap p(1, 3, 1);
    p.values = {0.7, 0.2, 0.1};
    CHECK(prediction_confidence(p)[0] == doctest::Approx(70.0));
  }
  SUBCASE("uniform row over 116 classes") {
    nn::FeatureMap p(1, 116, 1);
    for (double& v : p.values) v = 1.0 / 116.0;
    CHECK(prediction_confidence(p)[0] == doctest::Approx(100.0 / 116.0).epsilon(1e-12));
  }
  SUBCASE("non-probability row throws") {
    nn::FeatureMap p(1, 3, 1);
    p.values = {0.5, 0.2, 0.1};
    CHECK_THROWS_AS(prediction_confidence(p), ArgumentError);
  }
}

TEST_CASE("freedman-diaconis bin width") {
  SUBCASE("hand-evaluated example: 1..8") {
    std::vector<double> v = {1, 2, 3, 4, 5, 6, 7, 8};
    // IQR with the linear-interpolation estimator is 3.5, n^(-1/3) = 1/2
    CHECK(fd_bin_width(v) == doctest::Approx(3.5).epsilon(1e-12));
  }
  SUBCASE("all-equal values fall back to 1.0") {
    std::vector<double> v(10, 42.0);
    CHECK(fd_bin_width(v) == kFallbackBinWidth);
  }
  SUBCASE("cap at 5 percentage points") {
    std::vector<double> v = {0, 100};
    CHECK(fd_bin_width(v) == kMaxBinWidth);
  }
  SUBCASE("fewer than 2 values throws") {
    std::vector<double> v = {1.0};
    CHECK_THROWS_AS(fd_bin_width(v), ArgumentError);
  }
  SUBCASE("matches a direct formula evaluation on random samples") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const size_t n = 2 + rng() % 500;
      std::vector<double> v(n);
      for (double& x : v) x = 100.0 * uniform01(rng);
      std::vector<double> sorted = v;
      std::sort(sorted.begin(), sorted.end());
      auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(n - 1);
        const size_t lo = static_cast<size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        return lo + 1 < n ? sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
                          : sorted[lo];
      };
      const double iqr = quantile(0.75) - quantile(0.25);
      double want = 2.0 * iqr * std::pow(static_cast<double>(n), -1.0 / 3.0);
      if (want <= 0.0) want = kFallbackBinWidth;
      want = std::min(want, kMaxBinWidth);
      CHECK(fd_bin_width(v) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

namespace {

std::vector<ConfidenceRecord> make_records(const std::vector<double>& correct_conf,
                                           const std::vector<double>& incorrect_conf) {
  std::vector<ConfidenceRecord> records;
  int idx = 0;
  for (double c : correct_conf) {
    records.push_back({idx++, c, true, 0, 0});
  }
  for (double c : incorrect_conf) {
    records.push_back({idx++, c, false, 0, 1});
  }
  return records;
}

double integral(const DensityHistogram& h) {
  double total = 0.0;
  for (size_t i = 0; i + 1 < h.bin_edges.size(); ++i) {
    total += h.densities[i] * (h.bin_edges[i + 1] - h.bin_edges[i]);
  }
  return total;
}

}  // namespace

TEST_CASE("confidence histograms") {
  SUBCASE("density follows N_i / (N * width)") {
    auto records = make_records({90, 90.5, 91, 96, 97, 98, 99, 99.5, 99.9, 95}, {});
    DensityHistogram h = confidence_histogram(records, PredGroup::correct);
    REQUIRE(h.n == 10);
    const double width = h.bin_edges[1] - h.bin_edges[0];
    // recount each bin by hand
    for (size_t i = 0; i + 1 < h.bin_edges.size(); ++i) {
      int count = 0;
      for (const auto& r : records) {
        const bool last = i + 2 == h.bin_edges.size();
        if (r.confidence_percent >= h.bin_edges[i] &&
            (r.confidence_percent < h.bin_edges[i + 1] ||
             (last && r.confidence_percent <= h.bin_edges[i + 1]))) {
          ++count;
        }
      }
      CHECK(h.densities[i] == doctest::Approx(count / (10.0 * width)).epsilon(1e-12));
    }
  }
  SUBCASE("every histogram integrates to one (property)") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> conf;
      const int n = 1 + static_cast<int>(rng() % 400);
      for (int i = 0; i < n; ++i) conf.push_back(50.0 + 50.0 * uniform01(rng));
      auto records = make_records(conf, {});
      DensityHistogram h = confidence_histogram(records, PredGroup::correct);
      CHECK(integral(h) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("identical confidences give a single fallback-width bin") {
    auto records = make_records({97.0, 97.0, 97.0}, {});
    DensityHistogram h = confidence_histogram(records, PredGroup::correct);
    REQUIRE(h.densities.size() == 1);
    CHECK(h.bin_edges[1] - h.bin_edges[0] == kFallbackBinWidth);
    CHECK(h.densities[0] == doctest::Approx(1.0 / kFallbackBinWidth));
  }
  SUBCASE("empty group yields an empty histogram") {
    auto records = make_records({99.0}, {});
    DensityHistogram h = confidence_histogram(records, PredGroup::incorrect);
    CHECK(h.n == 0);
    CHECK(h.densities.empty());
  }
}

TEST_CASE("evaluation report") {
  MineralMap map;
  map.height = 2;
  map.width = 3;
  map.classes = {0, 1, 2, 0, 1, 2};
  map.confidence = {99, 98, 97, 96, 95, 94};

  SUBCASE("perfect prediction") {
    std::vector<int> truth = {0, 1, 2, 0, 1, 2};
    EvaluationReport report = evaluation_report(map, truth, 3);
    CHECK(report.mcc == 1.0);
    CHECK(report.tpr == 1.0);
    CHECK(report.n_incorrect == 0);
    CHECK(report.mean_confidence == doctest::Approx(96.5));
    CHECK(report.median_confidence == doctest::Approx(96.5));
    CHECK(integral(report.hist_correct) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("mixed prediction populates both groups") {
    std::vector<int> truth = {0, 1, 2, 1, 2, 0};
    EvaluationReport report = evaluation_report(map, truth, 3);
    CHECK(report.n_correct == 3);
    CHECK(report.n_incorrect == 3);
    CHECK(report.records.size() == 6);
    CHECK(report.hist_correct.n == 3);
    CHECK(report.hist_incorrect.n == 3);
    CHECK(report.tpr == doctest::Approx(0.5));
    const std::string json = report_to_json_text(report);
    CHECK(json.find("\"mcc\"") != std::string::npos);
    CHECK(json.find("\"confusion_matrix\"") != std::string::npos);
  }
  SUBCASE("dimension mismatch throws") {
    std::vector<int> truth = {0, 1};
    CHECK_THROWS_AS(evaluation_report(map, truth, 3), ArgumentError);
  }
  SUBCASE("median of an even count averages the central pair") {
    std::vector<int> truth = {0, 1, 2, 0, 1, 2};
    map.confidence = {90, 92, 94, 96, 98, 100};
    EvaluationReport report = evaluation_report(map, truth, 3);
    CHECK(report.median_confidence == doctest::Approx(95.0));
  }
}
