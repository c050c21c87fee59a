#pragma once

// Directed cosine k-NN attributed graph with normalized edge weights.

#include <algorithm>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "gsabfd/common.hpp"

namespace gsabfd {

struct Edge {
  std::size_t target = 0;
  double weight = 0.0;
  double similarity = 0.0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Adjacency-list form of M = A + I. The identity part is implicit: aggregation always
/// includes the node's own vector, so no node appears in its own neighbor list.
struct AttributedGraph {
  std::size_t m = 0;
  std::size_t k = 0;
  std::vector<std::vector<Edge>> neighbors;
  bool self_loop = true;

  /// Dense M (weights plus identity when self_loop). Refuses m > 1000.
  Matrix dense() const {
    if (m > 1000) throw Error(ErrorCategory::range, "dense export limited to m <= 1000");
    Matrix out(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      for (const auto& e : neighbors[i]) out(i, e.target) += e.weight;
      if (self_loop) out(i, i) += 1.0;
    }
    return out;
  }
  friend bool operator==(const AttributedGraph&, const AttributedGraph&) = default;
};

inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorCategory::range, "cosine similarity: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  if (nu < 1e-12 || nv < 1e-12) return 0.0;
  return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

/// Top-k ids by similarity, descending; ties go to the smaller id. `sims[i]` is ignored.
inline std::vector<std::size_t> top_k(std::span<const double> sims, std::size_t self, std::size_t k) {
  const std::size_t m = sims.size();
  if (k < 1 || k + 1 > m)
    throw Error(ErrorCategory::range, "k = " + std::to_string(k) + " out of range [1, " +
                                          std::to_string(m == 0 ? 0 : m - 1) + "]");
  std::vector<std::size_t> ids;
  ids.reserve(m - 1);
  for (std::size_t j = 0; j < m; ++j)
    if (j != self) ids.push_back(j);
  auto better = [&](std::size_t a, std::size_t b) { return sims[a] > sims[b] || (sims[a] == sims[b] && a < b); };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), better);
  ids.resize(k);
  return ids;
}

inline std::vector<std::size_t> knn_neighbors(const Matrix& x, std::size_t i, std::size_t k) {
  if (i >= x.rows) throw Error(ErrorCategory::range, "node id out of range");
  std::vector<double> sims(x.rows, 0.0);
  for (std::size_t j = 0; j < x.rows; ++j)
    if (j != i) sims[j] = cosine_similarity(x.row(i), x.row(j));
  return top_k(sims, i, k);
}

/// Negative similarities are clamped to 0 before normalizing; an all-zero row falls back to 1/k.
inline std::vector<double> edge_weights(std::span<const double> sims) {
  std::vector<double> w(sims.size());
  double total = 0.0;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    w[i] = std::max(0.0, sims[i]);
    total += w[i];
  }
  if (total < 1e-12) {
    std::fill(w.begin(), w.end(), sims.empty() ? 0.0 : 1.0 / static_cast<double>(sims.size()));
    return w;
  }
  for (double& v : w) v /= total;
  return w;
}

inline AttributedGraph build_graph(const Matrix& x, std::size_t k) {
  const std::size_t m = x.rows;
  if (k < 1 || k + 1 > m)
    throw Error(ErrorCategory::range, "k = " + std::to_string(k) + " out of range for " + std::to_string(m) + " nodes");
  Matrix sims(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) sims(i, j) = sims(j, i) = cosine_similarity(x.row(i), x.row(j));

  AttributedGraph g;
  g.m = m;
  g.k = k;
  g.neighbors.resize(m);
  std::vector<double> chosen(k);
  for (std::size_t i = 0; i < m; ++i) {
    const auto ids = top_k(sims.row(i), i, k);
    for (std::size_t j = 0; j < k; ++j) chosen[j] = sims(i, ids[j]);
    const auto w = edge_weights(chosen);
    auto& row = g.neighbors[i];
    row.reserve(k);
    for (std::size_t j = 0; j < k; ++j) row.push_back({ids[j], w[j], chosen[j]});
  }
  return g;
}

// ---------------------------------------------------------------------------

inline void write_edges_csv(const std::string& path, const AttributedGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  out << "src,dst,weight\n";
  for (std::size_t i = 0; i < g.m; ++i)
    for (const auto& e : g.neighbors[i]) out << i << ',' << e.target << ',' << format_double(e.weight) << '\n';
}

/// Rebuilds the list form from an edge CSV; similarity fields are not stored and read back as 0.
inline AttributedGraph read_edges_csv(const std::string& path, std::size_t m) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open '" + path + "'");
  AttributedGraph g;
  g.m = m;
  g.neighbors.resize(m);
  std::string line;
  std::getline(in, line);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    auto t = trim(line);
    if (t.empty()) continue;
    auto f = split(t, ',');
    double src = 0, dst = 0, w = 0;
    if (f.size() != 3 || !parse_double(f[0], src) || !parse_double(f[1], dst) || !parse_double(f[2], w))
      throw Error(ErrorCategory::parse, "'" + path + "' row " + std::to_string(row) + ": expected src,dst,weight");
    auto s = static_cast<std::size_t>(src);
    auto d = static_cast<std::size_t>(dst);
    if (s >= m || d >= m || s == d)
      throw Error(ErrorCategory::range, "'" + path + "' row " + std::to_string(row) + ": bad node id");
    g.neighbors[s].push_back({d, w, 0.0});
  }
  g.k = m ? g.neighbors[0].size() : 0;
  for (const auto& row_edges : g.neighbors)
    if (row_edges.size() != g.k) throw Error(ErrorCategory::format, "'" + path + "': non-uniform out-degree");
  return g;
}

/// Header row holds the column indices.
inline void write_matrix_csv(const std::string& path, const Matrix& mat) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write '" + path + "'");
  for (std::size_t c = 0; c < mat.cols; ++c) out << (c ? "," : "") << c;
  out << '\n';
  for (std::size_t r = 0; r < mat.rows; ++r) {
    for (std::size_t c = 0; c < mat.cols; ++c) out << (c ? "," : "") << format_double(mat(r, c));
    out << '\n';
  }
}

}  // namespace gsabfd
