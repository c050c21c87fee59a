#pragma once

// Periodized orthogonal Daubechies filter bank with a length-20 filter (10 vanishing moments).

#include <array>
#include <vector>

#include "gsabfd/common.hpp"

namespace gsabfd {

/// Low-pass reconstruction filter, sum = sqrt(2), obtained by spectral factorization
/// (minimum-phase root selection) of the Daubechies polynomial with 10 vanishing moments.
inline constexpr std::array<double, 20> kDaubechies20 = {
    0.0266700579005555535866,   0.188176800077691489021,    0.527201188931725586482,
    0.688459039453603565742,    0.281172343660577460749,    -0.249846424327315379416,
    -0.195946274377377043504,   0.127369340335793260083,    0.0930573646035723511604,
    -0.0713941471663970871453,  -0.0294575368218758128583,  0.0332126740593410017398,
    0.00360655356695616965542,  -0.0107331754833305750443,  0.00139535174705290116579,
    0.00199240529518505611716,  -0.000685856694959711626561, -0.000116466855129285450951,
    0.0000935886703200695913341, -0.0000132642028945212448124};

/// Quadrature-mirror high-pass partner: g[k] = (-1)^k h[L-1-k].
inline constexpr std::array<double, 20> kDaubechies20High = [] {
  std::array<double, 20> g{};
  for (std::size_t k = 0; k < g.size(); ++k)
    g[k] = (k % 2 == 0 ? 1.0 : -1.0) * kDaubechies20[g.size() - 1 - k];
  return g;
}();

struct WaveletDecomposition {
  std::vector<std::vector<double>> details;  // d1 (finest) .. dL
  std::vector<double> approximation;         // aL
  std::vector<std::size_t> input_lengths;    // length entering each level, for reconstruction
};

namespace detail {

// One analysis step on an even-length periodic sequence.
inline void analysis_step(const std::vector<double>& x, std::vector<double>& approx, std::vector<double>& detail) {
  const std::size_t n = x.size();
  const std::size_t half = n / 2;
  approx.assign(half, 0.0);
  detail.assign(half, 0.0);
  for (std::size_t i = 0; i < half; ++i) {
    double a = 0.0;
    double d = 0.0;
    for (std::size_t k = 0; k < kDaubechies20.size(); ++k) {
      const double v = x[(2 * i + k) % n];
      a += kDaubechies20[k] * v;
      d += kDaubechies20High[k] * v;
    }
    approx[i] = a;
    detail[i] = d;
  }
}

inline std::vector<double> synthesis_step(const std::vector<double>& approx, const std::vector<double>& detail) {
  const std::size_t n = 2 * approx.size();
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < approx.size(); ++i)
    for (std::size_t k = 0; k < kDaubechies20.size(); ++k)
      x[(2 * i + k) % n] += kDaubechies20[k] * approx[i] + kDaubechies20High[k] * detail[i];
  return x;
}

}  // namespace detail

/// Multi-level decomposition. Odd-length inputs to a level are extended by one zero sample,
/// which keeps every level an isometry, so each level yields ceil(len/2) coefficients.
inline WaveletDecomposition dwt_subbands(std::span<const double> signal, std::size_t levels = 8) {
  if (signal.size() < 2) throw Error(ErrorCategory::range, "DWT needs at least 2 samples");
  if (levels < 1) throw Error(ErrorCategory::range, "DWT needs at least one level");
  WaveletDecomposition out;
  std::vector<double> current(signal.begin(), signal.end());
  for (std::size_t level = 0; level < levels; ++level) {
    out.input_lengths.push_back(current.size());
    if (current.size() % 2 == 1) current.push_back(0.0);
    std::vector<double> approx, detail;
    detail::analysis_step(current, approx, detail);
    out.details.push_back(std::move(detail));
    current = std::move(approx);
  }
  out.approximation = std::move(current);
  return out;
}

inline std::vector<double> idwt(const WaveletDecomposition& dec) {
  std::vector<double> current = dec.approximation;
  for (std::size_t level = dec.details.size(); level-- > 0;) {
    current = detail::synthesis_step(current, dec.details[level]);
    current.resize(dec.input_lengths[level]);
  }
  return current;
}

}  // namespace gsabfd
