#pragma once

// Empirical mode decomposition by cubic-spline envelope sifting, and its noise-assisted
// ensemble variant.

#include <cmath>
#include <optional>
#include <vector>

#include "gsabfd/common.hpp"

namespace gsabfd {

struct EemdParams {
  std::size_t ensemble_size = 50;
  double noise_ratio = 0.2;  // noise std as a fraction of the signal std
  std::size_t max_sift_iters = 10;
  double sift_sd_threshold = 0.3;
  std::size_t max_imfs = 6;

  void validate() const {
    if (ensemble_size < 1) throw Error(ErrorCategory::range, "EEMD ensemble size must be >= 1");
    if (!(noise_ratio >= 0.0)) throw Error(ErrorCategory::range, "EEMD noise ratio must be >= 0");
    if (max_imfs < 1) throw Error(ErrorCategory::range, "EEMD max_imfs must be >= 1");
    if (max_sift_iters < 1) throw Error(ErrorCategory::range, "EEMD max_sift_iters must be >= 1");
  }
};

struct EmdResult {
  std::vector<std::vector<double>> imfs;
  std::vector<double> residue;
  std::vector<std::size_t> sift_iterations;  // per IMF
  std::vector<bool> sift_cap_hit;            // per IMF
};

struct Extrema {
  std::vector<std::size_t> maxima;
  std::vector<std::size_t> minima;
  std::size_t count() const { return maxima.size() + minima.size(); }
};

/// Strict local extrema at interior samples; plateaus are not counted.
inline Extrema find_extrema(std::span<const double> x) {
  Extrema e;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] > x[i + 1]) e.maxima.push_back(i);
    else if (x[i] < x[i - 1] && x[i] < x[i + 1]) e.minima.push_back(i);
  }
  return e;
}

inline std::size_t count_zero_crossings(std::span<const double> x) {
  std::size_t n = 0;
  int prev = 0;
  for (double v : x) {
    const int s = (v > 0.0) - (v < 0.0);
    if (s == 0) continue;
    if (prev != 0 && s != prev) ++n;
    prev = s;
  }
  return n;
}

/// Natural cubic spline through strictly increasing knots, evaluated at 0..n-1.
inline std::vector<double> natural_spline(const std::vector<double>& t, const std::vector<double>& y,
                                          std::size_t n) {
  const std::size_t k = t.size();
  std::vector<double> out(n);
  if (k == 1) {
    std::fill(out.begin(), out.end(), y[0]);
    return out;
  }
  // Second derivatives via the tridiagonal system (Thomas algorithm), M[0] = M[k-1] = 0.
  std::vector<double> second(k, 0.0);
  if (k > 2) {
    std::vector<double> diag(k - 2), upper(k - 2), rhs(k - 2);
    for (std::size_t i = 1; i + 1 < k; ++i) {
      const double h0 = t[i] - t[i - 1];
      const double h1 = t[i + 1] - t[i];
      diag[i - 1] = 2.0 * (h0 + h1);
      upper[i - 1] = h1;
      rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < diag.size(); ++i) {
      const double lower = t[i + 1] - t[i];  // h_{i} on the sub-diagonal
      const double w = lower / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    for (std::size_t i = diag.size(); i-- > 0;) {
      const double next = (i + 1 < diag.size()) ? second[i + 2] : 0.0;
      second[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
    }
  }
  std::size_t seg = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const double x = static_cast<double>(s);
    while (seg + 2 < k && x > t[seg + 1]) ++seg;
    const double h = t[seg + 1] - t[seg];
    const double a = (t[seg + 1] - x) / h;
    const double b = (x - t[seg]) / h;
    out[s] = a * y[seg] + b * y[seg + 1] +
             ((a * a * a - a) * second[seg] + (b * b * b - b) * second[seg + 1]) * h * h / 6.0;
  }
  return out;
}

namespace detail {

// Envelope through the given extrema, with up to two extrema mirrored about each end sample.
inline std::vector<double> envelope(std::span<const double> x, const std::vector<std::size_t>& idx) {
  const std::size_t n = x.size();
  const double last = static_cast<double>(n - 1);
  const std::size_t mirror = std::min<std::size_t>(2, idx.size());
  std::vector<double> t, y;
  t.reserve(idx.size() + 2 * mirror);
  y.reserve(idx.size() + 2 * mirror);
  for (std::size_t j = mirror; j-- > 0;) {
    t.push_back(-static_cast<double>(idx[j]));
    y.push_back(x[idx[j]]);
  }
  for (auto i : idx) {
    t.push_back(static_cast<double>(i));
    y.push_back(x[i]);
  }
  for (std::size_t j = 0; j < mirror; ++j) {
    const auto i = idx[idx.size() - 1 - j];
    t.push_back(2.0 * last - static_cast<double>(i));
    y.push_back(x[i]);
  }
  return natural_spline(t, y, n);
}

inline bool satisfies_imf_condition(std::span<const double> h) {
  const auto ext = find_extrema(h).count();
  const auto zc = count_zero_crossings(h);
  return (ext > zc ? ext - zc : zc - ext) <= 1;
}

}  // namespace detail

/// Classic sifting EMD. A sift stops once SD < threshold and the candidate satisfies the
/// IMF extrema/zero-crossing condition, or when the iteration cap is reached.
inline EmdResult emd(std::span<const double> signal, const EemdParams& params = {}) {
  if (signal.size() < 8) throw Error(ErrorCategory::range, "EMD needs at least 8 samples");
  EmdResult res;
  res.residue.assign(signal.begin(), signal.end());
  const std::size_t n = signal.size();
  while (res.imfs.size() < params.max_imfs && find_extrema(res.residue).count() >= 3) {
    std::vector<double> h = res.residue;
    std::size_t iters = 0;
    bool cap = false;
    while (true) {
      auto ext = find_extrema(h);
      if (ext.maxima.empty() || ext.minima.empty()) break;
      const auto upper = detail::envelope(h, ext.maxima);
      const auto lower = detail::envelope(h, ext.minima);
      double num = 0.0;
      double den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double mean = 0.5 * (upper[i] + lower[i]);
        num += mean * mean;
        den += h[i] * h[i];
        h[i] -= mean;
      }
      ++iters;
      const double sd = den > 0.0 ? num / den : 0.0;
      if (sd < params.sift_sd_threshold && detail::satisfies_imf_condition(h)) break;
      if (iters >= params.max_sift_iters) {
        cap = true;
        break;
      }
    }
    for (std::size_t i = 0; i < n; ++i) res.residue[i] -= h[i];
    res.imfs.push_back(std::move(h));
    res.sift_iterations.push_back(iters);
    res.sift_cap_hit.push_back(cap);
  }
  return res;
}

namespace detail {

inline double sample_std(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace detail

/// Ensemble-averaged IMFs; trials that produce fewer modes contribute zeros.
/// Trial t draws its noise from a generator seeded by derive_seed(seed, t).
inline std::vector<std::vector<double>> eemd(std::span<const double> signal, const EemdParams& params,
                                             std::uint64_t seed) {
  params.validate();
  const std::size_t n = signal.size();
  const double scale = params.noise_ratio * detail::sample_std(signal);
  std::vector<std::vector<double>> sum(params.max_imfs, std::vector<double>(n, 0.0));
  std::vector<double> noisy(n);
  for (std::size_t trial = 0; trial < params.ensemble_size; ++trial) {
    Rng rng(derive_seed(seed, trial));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) noisy[i] = signal[i] + scale * gauss(rng);
    auto res = emd(noisy, params);
    for (std::size_t j = 0; j < res.imfs.size(); ++j)
      for (std::size_t i = 0; i < n; ++i) sum[j][i] += res.imfs[j][i];
  }
  const double inv = 1.0 / static_cast<double>(params.ensemble_size);
  for (auto& imf : sum)
    for (double& v : imf) v *= inv;
  return sum;
}

}  // namespace gsabfd
