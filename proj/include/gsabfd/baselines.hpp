#pragma once

// Reference outlier detectors: plain autoencoder, LOF, k-th neighbor distance, isolation forest.
// All consume the same standardized feature matrix; higher scores mean more anomalous.

#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gsabfd/common.hpp"
#include "gsabfd/diagnose.hpp"
#include "gsabfd/nn.hpp"

namespace gsabfd {

enum class Method { gsabfd, ae, lof, knn, iforest };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::gsabfd: return "gsabfd";
    case Method::ae: return "ae";
    case Method::lof: return "lof";
    case Method::knn: return "knn";
    case Method::iforest: return "iforest";
  }
  return "gsabfd";
}

inline Method parse_method(std::string_view s) {
  for (auto m : {Method::gsabfd, Method::ae, Method::lof, Method::knn, Method::iforest})
    if (to_string(m) == s) return m;
  throw Error(ErrorCategory::parse, "unknown method '" + std::string(s) + "'");
}

struct AeHyper {
  std::size_t hidden_dim = 32;
  std::size_t embed_dim = 16;
  std::size_t epochs = 100;
  double lr = 0.003;
};

struct BaselineConfig {
  Method method = Method::ae;
  std::size_t k = 20;
  std::size_t trees = 256;
  std::size_t subsample = 256;
  AeHyper ae;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Autoencoder: in -> hidden -> embed -> hidden -> in, ReLU everywhere but the output.

class MlpAutoencoder {
 public:
  std::vector<nn::DenseLayer> layers;

  MlpAutoencoder(std::size_t in_dim, const AeHyper& h, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xae));
    const std::size_t dims[] = {in_dim, h.hidden_dim, h.embed_dim, h.hidden_dim, in_dim};
    for (std::size_t l = 0; l < 4; ++l)
      layers.push_back(nn::DenseLayer::xavier("ae" + std::to_string(l), dims[l], dims[l + 1], rng));
  }

  Matrix reconstruct(const Matrix& x) const {
    Matrix h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      h = layers[l].forward(h);
      if (l + 1 < layers.size()) nn::activate(h, nn::Activation::relu);
    }
    return h;
  }

  double forward(const Matrix& x) {
    inputs_.clear();
    pres_.clear();
    Matrix h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      inputs_.push_back(h);
      h = layers[l].forward(h);
      pres_.push_back(h);
      if (l + 1 < layers.size()) nn::activate(h, nn::Activation::relu);
    }
    loss_ = nn::mse_loss(h, x);
    return loss_->value;
  }

  void backward() {
    if (!loss_) throw Error(ErrorCategory::usage, "backward() called before forward()");
    Matrix g = std::move(loss_->grad);
    loss_.reset();
    for (std::size_t l = layers.size(); l-- > 0;) {
      if (l + 1 < layers.size()) nn::activate_backward(pres_[l], g, nn::Activation::relu);
      g = layers[l].backward(inputs_[l], g);
    }
  }

  std::vector<nn::ParamBlock> parameter_blocks() {
    std::vector<nn::ParamBlock> b;
    for (auto& l : layers) nn::append_blocks(l, b);
    return b;
  }

  void zero_grad() {
    for (auto& l : layers) l.zero_grad();
  }

 private:
  std::vector<Matrix> inputs_;
  std::vector<Matrix> pres_;
  std::optional<nn::Loss> loss_;
};

inline std::vector<double> ae_scores(const Matrix& x, const AeHyper& h, std::uint64_t seed) {
  MlpAutoencoder ae(x.cols, h, seed);
  nn::AdamState adam;
  for (std::size_t epoch = 0; epoch < h.epochs; ++epoch) {
    ae.zero_grad();
    const double loss = ae.forward(x);
    if (!std::isfinite(loss)) throw Error(ErrorCategory::numeric, "autoencoder loss non-finite at epoch " + std::to_string(epoch));
    ae.backward();
    auto blocks = ae.parameter_blocks();
    nn::adam_step(blocks, adam, h.lr);
  }
  return fault_degree(x, ae.reconstruct(x));
}

// ---------------------------------------------------------------------------
// Distance-based detectors (Euclidean).

namespace detail {

inline Matrix pairwise_euclidean(const Matrix& x) {
  Matrix d(x.rows, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = i + 1; j < x.rows; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols; ++c) {
        const double t = x(i, c) - x(j, c);
        s += t * t;
      }
      d(i, j) = d(j, i) = std::sqrt(s);
    }
  return d;
}

inline void check_k(std::size_t k, std::size_t m) {
  if (k < 1 || k >= m)
    throw Error(ErrorCategory::range, "k = " + std::to_string(k) + " out of range [1, " + std::to_string(m - 1) + "]");
}

// Distance from each point to its k-th nearest other point.
inline std::vector<double> k_distances(const Matrix& d, std::size_t k) {
  std::vector<double> out(d.rows);
  std::vector<double> others;
  for (std::size_t i = 0; i < d.rows; ++i) {
    others.clear();
    for (std::size_t j = 0; j < d.rows; ++j)
      if (j != i) others.push_back(d(i, j));
    std::nth_element(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - 1), others.end());
    out[i] = others[k - 1];
  }
  return out;
}

}  // namespace detail

inline std::vector<double> knn_scores(const Matrix& x, std::size_t k) {
  detail::check_k(k, x.rows);
  return detail::k_distances(detail::pairwise_euclidean(x), k);
}

/// Local outlier factor. The k-distance neighborhood includes every point tied at the
/// k-distance; lrd = 1 / (mean reachability distance + 1e-10) keeps duplicates finite.
inline std::vector<double> lof_scores(const Matrix& x, std::size_t k) {
  detail::check_k(k, x.rows);
  const std::size_t m = x.rows;
  const Matrix d = detail::pairwise_euclidean(x);
  const auto kdist = detail::k_distances(d, k);
  std::vector<std::vector<std::size_t>> hood(m);
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t o = 0; o < m; ++o)
      if (o != p && d(p, o) <= kdist[p]) hood[p].push_back(o);
  std::vector<double> lrd(m);
  for (std::size_t p = 0; p < m; ++p) {
    double reach = 0.0;
    for (auto o : hood[p]) reach += std::max(kdist[o], d(p, o));
    lrd[p] = 1.0 / (reach / static_cast<double>(hood[p].size()) + 1e-10);
  }
  std::vector<double> lof(m);
  for (std::size_t p = 0; p < m; ++p) {
    double s = 0.0;
    for (auto o : hood[p]) s += lrd[o];
    lof[p] = s / static_cast<double>(hood[p].size()) / lrd[p];
  }
  return lof;
}

// ---------------------------------------------------------------------------
// Isolation forest

/// Average unsuccessful-search path length of a binary search tree on n points.
inline double average_path_length(double n) {
  if (n <= 1.0) return 0.0;
  if (n <= 2.0) return 1.0;
  return 2.0 * (std::log(n - 1.0) + std::numbers::egamma) - 2.0 * (n - 1.0) / n;
}

namespace detail {

struct IsoNode {
  int feature = -1;  // -1 marks a leaf
  double split = 0.0;
  std::size_t left = 0, right = 0;
  std::size_t size = 0;
};

class IsoTree {
 public:
  IsoTree(const Matrix& x, std::vector<std::size_t> sample, std::size_t height_limit, Rng& rng) {
    build(x, sample, 0, height_limit, rng);
  }

  double path_length(std::span<const double> p) const {
    std::size_t at = 0;
    double depth = 0.0;
    while (nodes_[at].feature >= 0) {
      at = p[static_cast<std::size_t>(nodes_[at].feature)] < nodes_[at].split ? nodes_[at].left : nodes_[at].right;
      depth += 1.0;
    }
    return depth + average_path_length(static_cast<double>(nodes_[at].size));
  }

 private:
  std::vector<IsoNode> nodes_;

  std::size_t build(const Matrix& x, std::vector<std::size_t>& idx, std::size_t depth, std::size_t limit, Rng& rng) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({});
    nodes_[id].size = idx.size();
    if (depth >= limit || idx.size() <= 1) return id;
    std::vector<std::size_t> candidates;
    std::vector<std::pair<double, double>> ranges;
    for (std::size_t c = 0; c < x.cols; ++c) {
      double lo = x(idx[0], c), hi = lo;
      for (auto i : idx) {
        lo = std::min(lo, x(i, c));
        hi = std::max(hi, x(i, c));
      }
      if (hi > lo) {
        candidates.push_back(c);
        ranges.emplace_back(lo, hi);
      }
    }
    if (candidates.empty()) return id;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const std::size_t which = pick(rng);
    std::uniform_real_distribution<double> cut(ranges[which].first, ranges[which].second);
    const double split = cut(rng);
    const std::size_t feature = candidates[which];
    std::vector<std::size_t> left, right;
    for (auto i : idx) (x(i, feature) < split ? left : right).push_back(i);
    nodes_[id].feature = static_cast<int>(feature);
    nodes_[id].split = split;
    const auto l = build(x, left, depth + 1, limit, rng);
    const auto r = build(x, right, depth + 1, limit, rng);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }
};

}  // namespace detail

/// score = 2^(-E[h(x)] / c(subsample)); tree t is grown from derive_seed(seed, t).
inline std::vector<double> iforest_scores(const Matrix& x, std::size_t trees, std::size_t subsample,
                                          std::uint64_t seed) {
  const std::size_t m = x.rows;
  if (subsample < 2 || subsample > m)
    throw Error(ErrorCategory::range, "iforest subsample " + std::to_string(subsample) + " out of range [2, " +
                                          std::to_string(m) + "]");
  if (trees < 1) throw Error(ErrorCategory::range, "iforest needs at least one tree");
  const auto limit = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(subsample))));
  std::vector<double> total(m, 0.0);
  std::vector<std::size_t> pool(m);
  for (std::size_t t = 0; t < trees; ++t) {
    Rng rng(derive_seed(seed, t));
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < subsample; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, m - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    detail::IsoTree tree(x, std::vector<std::size_t>(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(subsample)),
                         limit, rng);
    for (std::size_t i = 0; i < m; ++i) total[i] += tree.path_length(x.row(i));
  }
  const double norm = average_path_length(static_cast<double>(subsample));
  std::vector<double> score(m);
  for (std::size_t i = 0; i < m; ++i) score[i] = std::pow(2.0, -(total[i] / static_cast<double>(trees)) / norm);
  return score;
}

inline std::vector<double> baseline_scores(const Matrix& x, const BaselineConfig& cfg) {
  switch (cfg.method) {
    case Method::ae: return ae_scores(x, cfg.ae, cfg.seed);
    case Method::lof: return lof_scores(x, cfg.k);
    case Method::knn: return knn_scores(x, cfg.k);
    case Method::iforest: return iforest_scores(x, cfg.trees, std::min(cfg.subsample, x.rows), cfg.seed);
    case Method::gsabfd: break;
  }
  throw Error(ErrorCategory::usage, "gsabfd is not a baseline method");
}

}  // namespace gsabfd
