#pragma once

// 23-dimensional window features: nine time-domain statistics, eight Daubechies sub-band
// energies and six EEMD mode energies, plus column standardization and CSV/JSON storage.

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gsabfd/common.hpp"
#include "gsabfd/emd.hpp"
#include "gsabfd/ingest.hpp"
#include "gsabfd/wavelet.hpp"
#include "json.hpp"

namespace gsabfd {

inline constexpr std::size_t kTimeFeatures = 9;
inline constexpr std::size_t kWaveletFeatures = 8;
inline constexpr std::size_t kEemdFeatures = 6;
inline constexpr std::size_t kFeatureCount = kTimeFeatures + kWaveletFeatures + kEemdFeatures;

using FeatureVector = std::array<double, kFeatureCount>;

namespace detail {
inline constexpr double kGuard = 1e-12;
inline double guarded_ratio(double num, double den) { return std::abs(den) < kGuard ? 0.0 : num / den; }
inline constexpr double kEnergyGuard = 1e-24;
}  // namespace detail

/// [peak, std, mean square, rms, crest, impulse, shape, kurtosis, skewness].
/// Peak is max |x|; std uses n-1; kurtosis and skewness use population moments.
inline std::array<double, kTimeFeatures> time_features(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double peak = 0.0, mean = 0.0, mean_abs = 0.0, mean_sq = 0.0;
  for (double v : x) {
    peak = std::max(peak, std::abs(v));
    mean += v;
    mean_abs += std::abs(v);
    mean_sq += v * v;
  }
  mean /= n;
  mean_abs /= n;
  mean_sq /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double sample_std = x.size() > 1 ? std::sqrt(m2 / (n - 1.0)) : 0.0;
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double rms = std::sqrt(mean_sq);
  const double pop_std = std::sqrt(m2);
  using detail::guarded_ratio;
  return {peak,
          sample_std,
          mean_sq,
          rms,
          guarded_ratio(peak, rms),
          guarded_ratio(peak, mean_abs),
          guarded_ratio(rms, mean_abs),
          guarded_ratio(m4, m2 * m2),
          guarded_ratio(m3, pop_std * pop_std * pop_std)};
}

/// Relative detail-band energies ||d_j||^2 / ||x||^2 for j = 1..8.
inline std::array<double, kWaveletFeatures> dwt_features(std::span<const double> x) {
  std::array<double, kWaveletFeatures> out{};
  const double energy = sum_squares(x);
  if (energy < detail::kEnergyGuard) return out;
  const auto dec = dwt_subbands(x, kWaveletFeatures);
  for (std::size_t j = 0; j < kWaveletFeatures; ++j) out[j] = sum_squares(dec.details[j]) / energy;
  return out;
}

/// Relative energies of the first six ensemble-averaged IMFs.
inline std::array<double, kEemdFeatures> eemd_features(std::span<const double> x, const EemdParams& params,
                                                       std::uint64_t seed) {
  std::array<double, kEemdFeatures> out{};
  const double energy = sum_squares(x);
  if (energy < detail::kEnergyGuard) return out;
  const auto imfs = eemd(x, params, seed);
  for (std::size_t j = 0; j < std::min(kEemdFeatures, imfs.size()); ++j) out[j] = sum_squares(imfs[j]) / energy;
  return out;
}

inline FeatureVector extract(std::span<const double> x, const EemdParams& params, std::uint64_t seed) {
  FeatureVector f{};
  const auto t = time_features(x);
  const auto w = dwt_features(x);
  const auto e = eemd_features(x, params, seed);
  std::copy(t.begin(), t.end(), f.begin());
  std::copy(w.begin(), w.end(), f.begin() + kTimeFeatures);
  std::copy(e.begin(), e.end(), f.begin() + kTimeFeatures + kWaveletFeatures);
  return f;
}

inline FeatureVector extract(const Window& w, const EemdParams& params, std::uint64_t seed) {
  return extract(std::span<const double>(w.values), params, seed);
}

// ---------------------------------------------------------------------------

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<std::size_t> zero_columns;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct FeatureMatrix {
  Matrix values;              // m x 23
  std::vector<Label> labels;  // empty when ground truth is unknown
  std::optional<NormStats> norm_stats;

  std::size_t size() const { return values.rows; }
  bool has_labels() const { return !labels.empty(); }
  std::vector<bool> fault_mask() const {
    std::vector<bool> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = is_fault(labels[i]);
    return out;
  }
};

/// Row i uses EEMD seed derive_seed(seed, i).
inline FeatureMatrix extract_all(const WindowSet& set, const EemdParams& params, std::uint64_t seed) {
  FeatureMatrix fm;
  fm.values = Matrix(set.size(), kFeatureCount);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto f = extract(set.windows[i], params, derive_seed(seed, i));
    std::copy(f.begin(), f.end(), fm.values.row(i).begin());
  }
  fm.labels = set.labels();
  return fm;
}

/// Column z-scores with n-1 std; columns with std < 1e-12 become zero.
inline FeatureMatrix standardize(const FeatureMatrix& in) {
  const auto m = in.values.rows;
  const auto d = in.values.cols;
  if (m < 2) throw Error(ErrorCategory::range, "standardization needs at least 2 rows");
  FeatureMatrix out = in;
  NormStats stats;
  stats.mean.assign(d, 0.0);
  stats.std.assign(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m; ++r) mean += in.values(r, c);
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (std::size_t r = 0; r < m; ++r) ss += (in.values(r, c) - mean) * (in.values(r, c) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(m - 1));
    stats.mean[c] = mean;
    stats.std[c] = sd;
    const bool zero = sd < detail::kGuard;
    if (zero) stats.zero_columns.push_back(c);
    for (std::size_t r = 0; r < m; ++r) out.values(r, c) = zero ? 0.0 : (in.values(r, c) - mean) / sd;
  }
  out.norm_stats = std::move(stats);
  return out;
}

/// Maps standardized values from one set of statistics to another by way of raw space.
inline Matrix restandardize(const Matrix& z, const NormStats& from, const NormStats& to) {
  Matrix out(z.rows, z.cols);
  auto is_zero = [](const NormStats& s, std::size_t c) {
    return std::find(s.zero_columns.begin(), s.zero_columns.end(), c) != s.zero_columns.end();
  };
  for (std::size_t c = 0; c < z.cols; ++c) {
    const bool to_zero = is_zero(to, c);
    for (std::size_t r = 0; r < z.rows; ++r) {
      const double raw = (is_zero(from, c) ? 0.0 : z(r, c) * from.std[c]) + from.mean[c];
      out(r, c) = to_zero ? 0.0 : (raw - to.mean[c]) / to.std[c];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Storage: CSV "f1..f23,label" and a JSON stats sidecar.

inline void write_feature_csv(const std::string& path, const FeatureMatrix& fm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  for (std::size_t c = 0; c < fm.values.cols; ++c) out << 'f' << (c + 1) << ',';
  out << "label\n";
  for (std::size_t r = 0; r < fm.values.rows; ++r) {
    for (std::size_t c = 0; c < fm.values.cols; ++c) out << format_double(fm.values(r, c)) << ',';
    if (fm.has_labels()) out << to_string(fm.labels[r]);
    out << '\n';
  }
}

inline FeatureMatrix read_feature_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCategory::format, "'" + path + "' is empty");
  const auto header = split(trim(line), ',');
  const bool label_column = !header.empty() && trim(header.back()) == "label";
  const std::size_t d = header.size() - (label_column ? 1 : 0);
  if (d == 0) throw Error(ErrorCategory::format, "'" + path + "' has no feature columns");

  FeatureMatrix fm;
  std::vector<double> values;
  std::vector<Label> labels;
  bool all_labelled = label_column;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    auto t = trim(line);
    if (t.empty()) continue;
    auto fields = split(t, ',');
    if (fields.size() != header.size())
      throw Error(ErrorCategory::parse, "'" + path + "' row " + std::to_string(row) + ": expected " +
                                            std::to_string(header.size()) + " fields");
    for (std::size_t c = 0; c < d; ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v) || !std::isfinite(v))
        throw Error(ErrorCategory::parse, "'" + path + "' row " + std::to_string(row) + " column " +
                                              std::to_string(c + 1) + ": bad number");
      values.push_back(v);
    }
    if (label_column) {
      auto lab = trim(fields.back());
      if (lab.empty()) all_labelled = false;
      else labels.push_back(parse_label(lab));
    }
  }
  const std::size_t m = values.size() / d;
  fm.values = Matrix(m, d);
  fm.values.data = std::move(values);
  if (all_labelled && labels.size() == m) fm.labels = std::move(labels);
  return fm;
}

inline nlohmann::json to_json(const NormStats& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"zero_columns", s.zero_columns}};
}

inline NormStats norm_stats_from_json(const nlohmann::json& j) {
  try {
    NormStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.std = j.at("std").get<std::vector<double>>();
    s.zero_columns = j.at("zero_columns").get<std::vector<std::size_t>>();
    if (s.mean.size() != s.std.size()) throw Error(ErrorCategory::format, "stats mean/std length mismatch");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::format, std::string("bad normalization stats: ") + e.what());
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::parse, "'" + path + "': " + e.what());
  }
}

/// Sidecar path convention: "x.csv" -> "x.stats.json".
inline std::string stats_sidecar_path(const std::string& csv_path) {
  auto base = csv_path;
  if (base.size() >= 4 && base.compare(base.size() - 4, 4, ".csv") == 0) base.resize(base.size() - 4);
  return base + ".stats.json";
}

}  // namespace gsabfd
