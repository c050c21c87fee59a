#pragma once

// Reconstruction-error fault degrees, contamination thresholding and detection metrics.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gsabfd/common.hpp"
#include "json.hpp"

namespace gsabfd {

/// score(v) = 1/2 * sum_j (X[v][j] - Xhat[v][j])^2
inline std::vector<double> fault_degree(const Matrix& x, const Matrix& xhat) {
  if (!x.same_shape(xhat)) throw Error(ErrorCategory::range, "fault_degree: shape mismatch");
  std::vector<double> s(x.rows, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double d = x(r, c) - xhat(r, c);
      acc += d * d;
    }
    s[r] = 0.5 * acc;
  }
  return s;
}

inline std::size_t flag_count(std::size_t m, double contamination) {
  return static_cast<std::size_t>(std::ceil(contamination * static_cast<double>(m) - 1e-9));
}

struct Thresholded {
  std::vector<bool> flags;
  double threshold = 0.0;
};

/// Flags the ceil(c*m) highest scores; ties at the cut go to the lower node id.
inline Thresholded threshold_flags(std::span<const double> scores, double contamination) {
  if (!(contamination > 0.0 && contamination < 1.0))
    throw Error(ErrorCategory::range, "contamination must lie in (0, 1)");
  const std::size_t m = scores.size();
  const std::size_t n = std::min(m, flag_count(m, contamination));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Thresholded t;
  t.flags.assign(m, false);
  for (std::size_t i = 0; i < n; ++i) t.flags[order[i]] = true;
  t.threshold = n ? scores[order[n - 1]] : std::numeric_limits<double>::infinity();
  return t;
}

/// Probability that a random positive outscores a random negative, ties counted 1/2.
/// Computed from mid-ranks (Mann-Whitney U).
inline double auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCategory::range, "auc: length mismatch");
  const std::size_t m = scores.size();
  std::size_t pos = 0;
  for (bool l : labels) pos += l;
  const std::size_t neg = m - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorCategory::range, "auc needs at least one positive and one negative");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // twice the rank sum keeps mid-ranks integral
  std::uint64_t rank_sum_x2 = 0;
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j + 1 < m && scores[order[j + 1]] == scores[order[i]]) ++j;
    const std::uint64_t mid_x2 = (i + 1) + (j + 1);  // ranks are 1-based
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]]) rank_sum_x2 += mid_x2;
    i = j + 1;
  }
  const std::uint64_t u_x2 = rank_sum_x2 - static_cast<std::uint64_t>(pos) * (pos + 1);
  return static_cast<double>(u_x2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

struct Confusion {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
};

inline Confusion confusion(const std::vector<bool>& flags, const std::vector<bool>& labels) {
  if (flags.size() != labels.size()) throw Error(ErrorCategory::range, "flags/labels length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (labels[i]) (flags[i] ? c.tp : c.fn)++;
    else (flags[i] ? c.fp : c.tn)++;
  }
  return c;
}

inline double accuracy(const Confusion& c) {
  const auto total = c.tp + c.tn + c.fp + c.fn;
  return total ? static_cast<double>(c.tp + c.tn) / static_cast<double>(total) : 0.0;
}

inline double detection_rate(const Confusion& c) {
  if (c.tp + c.fn == 0) throw Error(ErrorCategory::range, "detection rate needs at least one positive");
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

inline double accuracy(const std::vector<bool>& flags, const std::vector<bool>& labels) {
  return accuracy(confusion(flags, labels));
}
inline double detection_rate(const std::vector<bool>& flags, const std::vector<bool>& labels) {
  return detection_rate(confusion(flags, labels));
}

struct Metrics {
  double auc = 0.0;
  double acc = 0.0;
  double dr = 0.0;
  double runtime_seconds = 0.0;
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct FaultReport {
  std::vector<double> scores;
  std::vector<bool> flags;
  double threshold = 0.0;
  double contamination = 0.0;
  std::optional<std::vector<bool>> labels;  // true = fault
  std::optional<Metrics> metrics;
  friend bool operator==(const FaultReport&, const FaultReport&) = default;
};

/// Metrics are filled only when labels are given and contain both classes.
inline FaultReport evaluate(std::vector<double> scores, std::optional<std::vector<bool>> labels, double contamination,
                            double runtime_seconds = 0.0) {
  FaultReport r;
  auto t = threshold_flags(scores, contamination);
  r.scores = std::move(scores);
  r.flags = std::move(t.flags);
  r.threshold = t.threshold;
  r.contamination = contamination;
  if (labels) {
    if (labels->size() != r.scores.size()) throw Error(ErrorCategory::range, "labels do not align with scores");
    const auto positives = static_cast<std::size_t>(std::count(labels->begin(), labels->end(), true));
    if (positives > 0 && positives < labels->size()) {
      const auto c = confusion(r.flags, *labels);
      r.metrics = Metrics{auc(r.scores, *labels), accuracy(c), detection_rate(c), runtime_seconds};
    }
  }
  r.labels = std::move(labels);
  return r;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const FaultReport& r) {
  nlohmann::json j;
  j["scores"] = r.scores;
  j["flags"] = r.flags;
  j["threshold"] = r.threshold;
  j["contamination"] = r.contamination;
  if (r.labels) j["labels"] = *r.labels;
  if (r.metrics)
    j["metrics"] = {{"auc", r.metrics->auc},
                    {"acc", r.metrics->acc},
                    {"dr", r.metrics->dr},
                    {"runtime_seconds", r.metrics->runtime_seconds}};
  return j;
}

inline FaultReport report_from_json(const nlohmann::json& j) {
  try {
    FaultReport r;
    r.scores = j.at("scores").get<std::vector<double>>();
    r.flags = j.at("flags").get<std::vector<bool>>();
    r.threshold = j.at("threshold").get<double>();
    r.contamination = j.at("contamination").get<double>();
    if (j.contains("labels")) r.labels = j.at("labels").get<std::vector<bool>>();
    if (j.contains("metrics")) {
      const auto& mj = j.at("metrics");
      r.metrics = Metrics{mj.at("auc").get<double>(), mj.at("acc").get<double>(), mj.at("dr").get<double>(),
                          mj.at("runtime_seconds").get<double>()};
    }
    if (r.flags.size() != r.scores.size()) throw Error(ErrorCategory::format, "report flags/scores length mismatch");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::format, std::string("bad report: ") + e.what());
  }
}

/// node,score,flag,label (label column empty when unknown).
inline void write_report_csv(const std::string& path, const FaultReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  out << "node,score,flag,label\n";
  for (std::size_t i = 0; i < r.scores.size(); ++i) {
    out << i << ',' << format_double(r.scores[i]) << ',' << (r.flags[i] ? 1 : 0) << ',';
    if (r.labels) out << ((*r.labels)[i] ? 1 : 0);
    out << '\n';
  }
}

}  // namespace gsabfd
