#include <algorithm>
#include <cmath>

#include "test_support.hpp"

namespace gsabfd::test {
namespace {

// Pair enumeration with half credit for ties.
double brute_auc(const std::vector<double>& s, const std::vector<bool>& y) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      ++pairs;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  return wins / static_cast<double>(pairs);
}

TEST(FaultDegree, HandCasesAndBruteForce) {
  Matrix a(3, 2, 0.25);
  EXPECT_EQ(fault_degree(a, a), (std::vector<double>{0, 0, 0}));
  Matrix x(1, 2), xhat(1, 2);
  xhat(0, 0) = 2;
  EXPECT_EQ(fault_degree(x, xhat), (std::vector<double>{2}));

  const auto p = random_matrix(5, 23, 1), q = random_matrix(5, 23, 2);
  const auto got = fault_degree(p, q);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 23; ++c) s += (p(r, c) - q(r, c)) * (p(r, c) - q(r, c)) / 2.0;
    EXPECT_NEAR(got[r], s, 1e-12);
  }
  EXPECT_EQ(error_category([] { fault_degree(Matrix(2, 2), Matrix(2, 3)); }), ErrorCategory::range);
}

TEST(FaultDegree, ScalesQuadratically) {
  const auto p = random_matrix(4, 23, 3);
  const Matrix zero(4, 23);
  auto p3 = p;
  for (double& v : p3.data) v *= 3.0;
  const auto a = fault_degree(p, zero), b = fault_degree(p3, zero);
  for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(b[r], 9.0 * a[r], 1e-12 * b[r]);
}

TEST(ThresholdFlags, TopFraction) {
  const std::vector<double> s{5, 1, 3, 2};
  const auto t = threshold_flags(s, 0.25);
  EXPECT_EQ(t.flags, (std::vector<bool>{true, false, false, false}));
  EXPECT_EQ(t.threshold, 5.0);
  EXPECT_EQ(threshold_flags(s, 0.5).flags, (std::vector<bool>{true, false, true, false}));

  const auto many = random_signal(860, 4);
  const auto f = threshold_flags(many, 60.0 / 860.0);
  EXPECT_EQ(std::count(f.flags.begin(), f.flags.end(), true), 60);
  EXPECT_EQ(flag_count(860, 60.0 / 860.0), 60u);
  EXPECT_EQ(flag_count(100, 0.015), 2u);
  for (std::size_t i = 0; i < 860; ++i)
    if (f.flags[i]) EXPECT_GE(many[i], f.threshold);
    else EXPECT_LT(many[i], f.threshold);
}

TEST(ThresholdFlags, TiesGoToLowerIds) {
  const std::vector<double> s(10, 1.0);
  const auto t = threshold_flags(s, 0.3);
  EXPECT_EQ(t.flags, (std::vector<bool>{true, true, true, false, false, false, false, false, false, false}));
  const std::vector<double> u{0, 2, 1, 1, 1};
  EXPECT_EQ(threshold_flags(u, 0.4).flags, (std::vector<bool>{false, true, true, false, false}));
  EXPECT_EQ(error_category([&] { threshold_flags(s, 0.0); }), ErrorCategory::range);
  EXPECT_EQ(error_category([&] { threshold_flags(s, 1.0); }), ErrorCategory::range);
}

TEST(Auc, HandCases) {
  EXPECT_EQ(auc(std::vector<double>{0.9, 0.1}, {true, false}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.9}, {true, false}), 0.0);
  EXPECT_EQ(auc(std::vector<double>{0.8, 0.7, 0.6, 0.5}, {true, false, true, false}), 0.75);
  EXPECT_EQ(auc(std::vector<double>(6, 3.0), {true, false, true, false, false, false}), 0.5);
  EXPECT_EQ(error_category([] { auc(std::vector<double>{1, 2}, {true, true}); }), ErrorCategory::range);
  EXPECT_EQ(error_category([] { auc(std::vector<double>{1, 2}, {true}); }), ErrorCategory::range);
}

TEST(Auc, EqualsPairEnumerationOnRandomSets) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = std::uniform_int_distribution<std::size_t>(2, 200)(rng);
    // coarse integer scores force plenty of ties
    const int levels = trial % 2 ? 5 : 1000;
    std::vector<double> s(m);
    std::vector<bool> y(m);
    for (std::size_t i = 0; i < m; ++i) {
      s[i] = std::uniform_int_distribution<int>(0, levels)(rng);
      y[i] = std::bernoulli_distribution(0.3)(rng);
    }
    y[0] = true;
    y[1] = false;
    EXPECT_EQ(auc(s, y), brute_auc(s, y)) << "trial " << trial;
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  const auto s = random_signal(150, 5);
  std::vector<bool> y(150);
  for (std::size_t i = 0; i < 150; ++i) y[i] = i % 7 == 0;
  std::vector<double> t;
  for (double v : s) t.push_back(std::exp(3.0 * v) + 2.0);
  EXPECT_EQ(auc(s, y), auc(t, y));
}

TEST(Metrics, ConfusionFormulas) {
  std::vector<bool> flags, labels;
  auto push = [&](bool f, bool l, int n) {
    for (int i = 0; i < n; ++i) {
      flags.push_back(f);
      labels.push_back(l);
    }
  };
  push(true, true, 5);
  push(false, false, 90);
  push(true, false, 3);
  push(false, true, 2);
  const auto c = confusion(flags, labels);
  EXPECT_EQ(c.tp, 5u);
  EXPECT_EQ(c.tn, 90u);
  EXPECT_EQ(c.fp, 3u);
  EXPECT_EQ(c.fn, 2u);
  EXPECT_DOUBLE_EQ(accuracy(c), 0.95);
  EXPECT_DOUBLE_EQ(detection_rate(c), 5.0 / 7.0);

  EXPECT_EQ(accuracy(labels, labels), 1.0);
  EXPECT_EQ(detection_rate(labels, labels), 1.0);
  EXPECT_EQ(detection_rate(std::vector<bool>(labels.size(), false), labels), 0.0);
  EXPECT_EQ(error_category([] { detection_rate(std::vector<bool>{true}, std::vector<bool>{false}); }),
            ErrorCategory::range);
}

TEST(Evaluate, PerfectDetector) {
  std::vector<double> scores(860);
  std::vector<bool> labels(860);
  for (std::size_t i = 0; i < 860; ++i) {
    labels[i] = i >= 800;
    scores[i] = labels[i] ? 10.0 + static_cast<double>(i) : static_cast<double>(i) / 1000.0;
  }
  const auto r = evaluate(scores, labels, 60.0 / 860.0, 1.5);
  ASSERT_TRUE(r.metrics.has_value());
  EXPECT_EQ(r.metrics->auc, 1.0);
  EXPECT_EQ(r.metrics->acc, 1.0);
  EXPECT_EQ(r.metrics->dr, 1.0);
  EXPECT_EQ(r.metrics->runtime_seconds, 1.5);
}

TEST(Evaluate, RandomScoresAverageHalf) {
  Rng rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  double total = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> s(100);
    std::vector<bool> y(100);
    for (std::size_t i = 0; i < 100; ++i) {
      s[i] = n(rng);
      y[i] = i % 2 == 0;
    }
    total += evaluate(s, y, 0.5).metrics->auc;
  }
  EXPECT_NEAR(total / 1000.0, 0.5, 0.05);
}

TEST(Evaluate, UnlabelledOrSingleClassGivesNoMetrics) {
  const auto s = random_signal(20, 6);
  EXPECT_FALSE(evaluate(s, std::nullopt, 0.1).metrics.has_value());
  EXPECT_FALSE(evaluate(s, std::vector<bool>(20, false), 0.1).metrics.has_value());
  EXPECT_EQ(error_category([&] { evaluate(s, std::vector<bool>(19, false), 0.1); }), ErrorCategory::range);
}

TEST(Report, JsonRoundTripIsLossless) {
  std::vector<bool> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = i % 5 == 0;
  const auto r = evaluate(random_signal(30, 8), y, 0.2, 0.123456789);
  const auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back, r);

  const auto u = evaluate(random_signal(30, 9), std::nullopt, 0.2);
  const auto j = to_json(u);
  EXPECT_FALSE(j.contains("metrics"));
  EXPECT_EQ(report_from_json(j), u);

  auto bad = to_json(r);
  bad["flags"].erase(0);
  EXPECT_EQ(error_category([&] { report_from_json(bad); }), ErrorCategory::format);
  bad = to_json(r);
  bad.erase("scores");
  EXPECT_EQ(error_category([&] { report_from_json(bad); }), ErrorCategory::format);
}

TEST(Report, CsvLayout) {
  TempDir dir;
  const auto r = evaluate(std::vector<double>{0.5, 2.0}, std::vector<bool>{false, true}, 0.5);
  write_report_csv(dir.file("r.csv"), r);
  EXPECT_EQ(read_text(dir.file("r.csv")), "node,score,flag,label\n0,0.5,0,0\n1,2,1,1\n");
  write_report_csv(dir.file("u.csv"), evaluate(std::vector<double>{0.5, 2.0}, std::nullopt, 0.5));
  EXPECT_EQ(read_text(dir.file("u.csv")), "node,score,flag,label\n0,0.5,0,\n1,2,1,\n");
}

}  // namespace
}  // namespace gsabfd::test
