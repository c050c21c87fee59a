#pragma once

// GraphSAGE mean-aggregation encoder with a fully connected decoder, trained end to end to
// reconstruct node features.
//
// Each hop computes, for node v with sampled neighbors S(v):
//   a_v  = mean({h_v} U {h_u : u in S(v)})
//   h'_v = act(W [h_v ; a_v] + b)
// The final hop output is L2-normalized per row to give the embedding Z, and the decoder maps
// Z -> hidden (act) -> input_dim (identity).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gsabfd/common.hpp"
#include "gsabfd/features.hpp"
#include "gsabfd/graph.hpp"
#include "gsabfd/nn.hpp"
#include "json.hpp"

namespace gsabfd {

struct SageHyper {
  std::size_t depth = 2;
  std::size_t hidden_dim = 32;
  std::size_t embed_dim = 16;
  std::size_t k = 20;
  double sampling_ratio = 0.5;
  std::size_t epochs = 100;
  double lr = 0.003;
  std::uint64_t seed = 0;
  bool weighted_mean = false;
  nn::Activation activation = nn::Activation::relu;

  void validate() const {
    if (!(sampling_ratio > 0.0 && sampling_ratio <= 1.0))
      throw Error(ErrorCategory::range, "sampling_ratio must lie in (0, 1]");
    if (depth < 1) throw Error(ErrorCategory::range, "depth must be >= 1");
    if (hidden_dim < 1 || embed_dim < 1) throw Error(ErrorCategory::range, "layer dimensions must be >= 1");
    if (!(lr > 0.0)) throw Error(ErrorCategory::range, "learning rate must be positive");
  }
};

enum class Mode { train, inference };

inline std::size_t sample_count(std::size_t k, double ratio) {
  const auto s = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(k) - 1e-9));
  return std::clamp<std::size_t>(s, k ? 1 : 0, k);
}

namespace detail {

// Positions into the neighbor list; the full list in stored order when ratio >= 1.
inline std::vector<std::size_t> sample_positions(std::size_t k, double ratio, Rng& rng) {
  std::vector<std::size_t> pos(k);
  for (std::size_t i = 0; i < k; ++i) pos[i] = i;
  if (ratio >= 1.0) return pos;
  const std::size_t s = sample_count(k, ratio);
  for (std::size_t i = 0; i < s; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, k - 1);
    std::swap(pos[i], pos[pick(rng)]);
  }
  pos.resize(s);
  return pos;
}

}  // namespace detail

inline std::vector<std::size_t> sample_neighbors(const AttributedGraph& g, std::size_t v, double ratio, Rng& rng) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorCategory::range, "sampling ratio must lie in (0, 1]");
  const auto& nb = g.neighbors.at(v);
  std::vector<std::size_t> ids;
  for (auto p : detail::sample_positions(nb.size(), ratio, rng)) ids.push_back(nb[p].target);
  return ids;
}

/// Unweighted mean of the self vector and the neighbor vectors.
inline std::vector<double> aggregate_mean(std::span<const double> self,
                                          const std::vector<std::span<const double>>& neighbors) {
  std::vector<double> out(self.begin(), self.end());
  for (const auto& n : neighbors) {
    if (n.size() != self.size()) throw Error(ErrorCategory::range, "aggregate_mean: dimension mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += n[i];
  }
  const double inv = 1.0 / static_cast<double>(1 + neighbors.size());
  for (double& v : out) v *= inv;
  return out;
}

/// Which neighbors each node aggregates over in one hop, with their mixing coefficients.
struct SamplingPlan {
  std::vector<std::vector<std::size_t>> ids;
  std::vector<std::vector<double>> coef;
  std::vector<double> self_coef;
};

/// rng == nullptr selects full neighborhoods (deterministic inference).
/// With `weighted`, sampled edge weights are renormalized to 1 and mixed 1:1 with the self vector.
inline SamplingPlan make_plan(const AttributedGraph& g, double ratio, bool weighted, Rng* rng) {
  SamplingPlan plan;
  plan.ids.resize(g.m);
  plan.coef.resize(g.m);
  plan.self_coef.resize(g.m);
  for (std::size_t v = 0; v < g.m; ++v) {
    const auto& nb = g.neighbors[v];
    std::vector<std::size_t> pos;
    if (rng == nullptr || ratio >= 1.0) {
      pos.resize(nb.size());
      for (std::size_t i = 0; i < nb.size(); ++i) pos[i] = i;
    } else {
      pos = detail::sample_positions(nb.size(), ratio, *rng);
    }
    auto& ids = plan.ids[v];
    auto& coef = plan.coef[v];
    for (auto p : pos) ids.push_back(nb[p].target);
    if (weighted && !pos.empty()) {
      double total = 0.0;
      for (auto p : pos) total += nb[p].weight;
      for (auto p : pos)
        coef.push_back(0.5 * (total < 1e-12 ? 1.0 / static_cast<double>(pos.size()) : nb[p].weight / total));
      plan.self_coef[v] = 0.5;
    } else {
      const double c = 1.0 / static_cast<double>(1 + pos.size());
      coef.assign(pos.size(), c);
      plan.self_coef[v] = c;
    }
  }
  return plan;
}

struct SageLayerTape {
  SamplingPlan plan;
  Matrix input;
  Matrix concat;
  Matrix pre;
};

/// One hop: out[v] = act(W [H[v] ; aggregate(v)] + b).
inline Matrix sage_layer(const AttributedGraph& g, const Matrix& h, const nn::DenseLayer& layer,
                         const SamplingPlan& plan, nn::Activation act = nn::Activation::relu,
                         SageLayerTape* tape = nullptr) {
  if (h.rows != g.m) throw Error(ErrorCategory::range, "sage_layer: feature rows != node count");
  const std::size_t d = h.cols;
  Matrix concat(g.m, 2 * d);
  for (std::size_t v = 0; v < g.m; ++v) {
    auto self = h.row(v);
    auto row = concat.row(v);
    for (std::size_t i = 0; i < d; ++i) {
      row[i] = self[i];
      row[d + i] = plan.self_coef[v] * self[i];
    }
    for (std::size_t j = 0; j < plan.ids[v].size(); ++j) {
      auto nb = h.row(plan.ids[v][j]);
      const double c = plan.coef[v][j];
      for (std::size_t i = 0; i < d; ++i) row[d + i] += c * nb[i];
    }
  }
  Matrix pre = layer.forward(concat);
  Matrix out = pre;
  nn::activate(out, act);
  if (tape) {
    tape->plan = plan;
    tape->input = h;
    tape->concat = std::move(concat);
    tape->pre = std::move(pre);
  }
  return out;
}

/// Per-row L2 normalization; rows with norm < 1e-12 are left at zero.
inline Matrix normalize_rows(const Matrix& h, std::vector<double>* norms = nullptr) {
  Matrix z(h.rows, h.cols);
  if (norms) norms->assign(h.rows, 0.0);
  for (std::size_t r = 0; r < h.rows; ++r) {
    const double n = std::sqrt(sum_squares(h.row(r)));
    if (norms) (*norms)[r] = n;
    if (n < 1e-12) continue;
    for (std::size_t c = 0; c < h.cols; ++c) z(r, c) = h(r, c) / n;
  }
  return z;
}

class SageAutoencoder {
 public:
  SageHyper hyper;
  std::size_t input_dim = kFeatureCount;
  std::vector<nn::DenseLayer> encoder;
  std::vector<nn::DenseLayer> decoder;
  std::optional<NormStats> norm_stats;
  nn::AdamState adam;

  SageAutoencoder() = default;

  explicit SageAutoencoder(const SageHyper& h, std::size_t in_dim = kFeatureCount) : hyper(h), input_dim(in_dim) {
    hyper.validate();
    Rng rng(derive_seed(hyper.seed, 0x5a6e));
    std::size_t width = input_dim;
    for (std::size_t l = 0; l < hyper.depth; ++l) {
      const std::size_t out = (l + 1 == hyper.depth) ? hyper.embed_dim : hyper.hidden_dim;
      encoder.push_back(nn::DenseLayer::xavier("sage" + std::to_string(l), 2 * width, out, rng));
      width = out;
    }
    decoder.push_back(nn::DenseLayer::xavier("decoder0", hyper.embed_dim, hyper.hidden_dim, rng));
    decoder.push_back(nn::DenseLayer::xavier("decoder1", hyper.hidden_dim, input_dim, rng));
  }

  /// Embedding Z; rng is used only in train mode.
  Matrix encode(const AttributedGraph& g, const Matrix& x, Mode mode, Rng* rng = nullptr) const {
    check_input(g, x);
    Matrix h = x;
    for (const auto& layer : encoder) {
      const auto plan = make_plan(g, hyper.sampling_ratio, hyper.weighted_mean, mode == Mode::train ? rng : nullptr);
      h = sage_layer(g, h, layer, plan, hyper.activation);
    }
    return normalize_rows(h);
  }

  Matrix decode(const Matrix& z) const {
    Matrix h = decoder[0].forward(z);
    nn::activate(h, hyper.activation);
    return decoder[1].forward(h);
  }

  /// Full-neighborhood reconstruction.
  Matrix reconstruct(const AttributedGraph& g, const Matrix& x) const { return decode(encode(g, x, Mode::inference)); }

  /// Deterministic full-neighborhood loss, no tape.
  double loss(const AttributedGraph& g, const Matrix& x) const { return nn::mse_loss(reconstruct(g, x), x).value; }

  /// Forward pass that records everything backward() needs; returns the loss.
  double forward(const AttributedGraph& g, const Matrix& x, Mode mode, Rng* rng = nullptr) {
    check_input(g, x);
    Tape t;
    Matrix h = x;
    t.layers.resize(encoder.size());
    for (std::size_t l = 0; l < encoder.size(); ++l) {
      const auto plan = make_plan(g, hyper.sampling_ratio, hyper.weighted_mean, mode == Mode::train ? rng : nullptr);
      h = sage_layer(g, h, encoder[l], plan, hyper.activation, &t.layers[l]);
    }
    t.z = normalize_rows(h, &t.norms);
    t.dec_pre = decoder[0].forward(t.z);
    t.dec_hidden = t.dec_pre;
    nn::activate(t.dec_hidden, hyper.activation);
    const Matrix xhat = decoder[1].forward(t.dec_hidden);
    t.loss = nn::mse_loss(xhat, x);
    const double value = t.loss.value;
    tape_ = std::move(t);
    return value;
  }

  /// Accumulates parameter gradients of the last recorded loss, then drops the tape.
  void backward() {
    if (!tape_) throw Error(ErrorCategory::usage, "backward() called before forward()");
    Tape t = std::move(*tape_);
    tape_.reset();

    Matrix g = decoder[1].backward(t.dec_hidden, t.loss.grad);
    nn::activate_backward(t.dec_pre, g, hyper.activation);
    Matrix dz = decoder[0].backward(t.z, g);

    // through the row normalization: dh = (dz - z (z . dz)) / |h|
    Matrix dh(dz.rows, dz.cols);
    for (std::size_t r = 0; r < dz.rows; ++r) {
      if (t.norms[r] < 1e-12) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < dz.cols; ++c) dot += t.z(r, c) * dz(r, c);
      for (std::size_t c = 0; c < dz.cols; ++c) dh(r, c) = (dz(r, c) - t.z(r, c) * dot) / t.norms[r];
    }

    for (std::size_t l = encoder.size(); l-- > 0;) {
      auto& lt = t.layers[l];
      nn::activate_backward(lt.pre, dh, hyper.activation);
      const Matrix dc = encoder[l].backward(lt.concat, dh);
      const std::size_t d = lt.input.cols;
      Matrix din(lt.input.rows, d);
      for (std::size_t v = 0; v < din.rows; ++v) {
        auto grow = dc.row(v);
        auto self = din.row(v);
        for (std::size_t i = 0; i < d; ++i) self[i] += grow[i] + lt.plan.self_coef[v] * grow[d + i];
        for (std::size_t j = 0; j < lt.plan.ids[v].size(); ++j) {
          auto nb = din.row(lt.plan.ids[v][j]);
          const double c = lt.plan.coef[v][j];
          for (std::size_t i = 0; i < d; ++i) nb[i] += c * grow[d + i];
        }
      }
      dh = std::move(din);
    }
  }

  void zero_grad() {
    for (auto& l : encoder) l.zero_grad();
    for (auto& l : decoder) l.zero_grad();
  }

  std::vector<nn::ParamBlock> parameter_blocks() {
    std::vector<nn::ParamBlock> blocks;
    for (auto& l : encoder) nn::append_blocks(l, blocks);
    for (auto& l : decoder) nn::append_blocks(l, blocks);
    return blocks;
  }

 private:
  struct Tape {
    std::vector<SageLayerTape> layers;
    std::vector<double> norms;
    Matrix z;
    Matrix dec_pre;
    Matrix dec_hidden;
    nn::Loss loss;
  };
  std::optional<Tape> tape_;

  void check_input(const AttributedGraph& g, const Matrix& x) const {
    if (x.rows != g.m) throw Error(ErrorCategory::range, "feature rows do not match graph node count");
    if (x.cols != input_dim)
      throw Error(ErrorCategory::range, "expected " + std::to_string(input_dim) + " feature columns, got " +
                                            std::to_string(x.cols));
  }
};

struct TrainResult {
  SageAutoencoder model;
  std::vector<double> loss_curve;
};

/// Full-batch training: fresh neighbor samples every epoch (seeded by (seed, epoch)),
/// MSE reconstruction loss, Adam.
inline TrainResult train(const AttributedGraph& g, const Matrix& x, const SageHyper& hyper,
                         std::optional<NormStats> norm_stats = std::nullopt) {
  TrainResult res{SageAutoencoder(hyper, x.cols), {}};
  auto& model = res.model;
  model.norm_stats = std::move(norm_stats);
  res.loss_curve.reserve(hyper.epochs);
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng rng(derive_seed(hyper.seed, 1, epoch));
    model.zero_grad();
    const double loss = model.forward(g, x, Mode::train, &rng);
    if (!std::isfinite(loss))
      throw Error(ErrorCategory::numeric, "non-finite loss at epoch " + std::to_string(epoch) + " (learning rate too high?)");
    res.loss_curve.push_back(loss);
    model.backward();
    auto blocks = model.parameter_blocks();
    nn::adam_step(blocks, model.adam, hyper.lr);
  }
  return res;
}

/// Analytic vs central-difference gradients of the full-neighborhood loss. The loss difference is
/// accumulated from the two reconstructions directly, which keeps tiny gradients above roundoff.
inline double grad_check(SageAutoencoder& model, const AttributedGraph& g, const Matrix& x, double eps = 1e-5) {
  model.zero_grad();
  model.forward(g, x, Mode::inference);
  model.backward();
  auto blocks = model.parameter_blocks();
  return nn::max_relative_gradient_error(
      blocks,
      nn::LossDifference([&](double& p, double e) {
        const double saved = p;
        p = saved + e;
        const Matrix plus = model.reconstruct(g, x);
        p = saved - e;
        const Matrix minus = model.reconstruct(g, x);
        p = saved;
        return nn::mse_loss_difference(plus, minus, x);
      }),
      eps);
}

// ---------------------------------------------------------------------------
// Checkpoint

inline constexpr std::string_view kCheckpointFormat = "gsabfd-checkpoint/1";

inline nlohmann::json to_json(const SageHyper& h) {
  return {{"depth", h.depth},   {"hidden_dim", h.hidden_dim},       {"embed_dim", h.embed_dim},
          {"k", h.k},           {"sampling_ratio", h.sampling_ratio}, {"epochs", h.epochs},
          {"lr", h.lr},         {"seed", h.seed},                   {"weighted_mean", h.weighted_mean},
          {"activation", std::string(nn::to_string(h.activation))}};
}

inline SageHyper sage_hyper_from_json(const nlohmann::json& j) {
  SageHyper h;
  h.depth = j.at("depth").get<std::size_t>();
  h.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  h.embed_dim = j.at("embed_dim").get<std::size_t>();
  h.k = j.at("k").get<std::size_t>();
  h.sampling_ratio = j.at("sampling_ratio").get<double>();
  h.epochs = j.at("epochs").get<std::size_t>();
  h.lr = j.at("lr").get<double>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.weighted_mean = j.at("weighted_mean").get<bool>();
  h.activation = nn::parse_activation(j.at("activation").get<std::string>());
  return h;
}

inline nlohmann::json checkpoint_json(const SageAutoencoder& m) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["hyper"] = to_json(m.hyper);
  j["input_dim"] = m.input_dim;
  j["encoder"] = nlohmann::json::array();
  for (const auto& l : m.encoder) j["encoder"].push_back(nn::to_json(l));
  j["decoder"] = nlohmann::json::array();
  for (const auto& l : m.decoder) j["decoder"].push_back(nn::to_json(l));
  j["adam"] = nn::to_json(m.adam);
  j["norm_stats"] = m.norm_stats ? to_json(*m.norm_stats) : nlohmann::json(nullptr);
  return j;
}

inline SageAutoencoder model_from_checkpoint(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      throw Error(ErrorCategory::format, "unsupported checkpoint format '" + j.at("format").get<std::string>() + "'");
    SageAutoencoder m;
    m.hyper = sage_hyper_from_json(j.at("hyper"));
    m.input_dim = j.at("input_dim").get<std::size_t>();
    for (const auto& l : j.at("encoder")) m.encoder.push_back(nn::dense_from_json(l));
    for (const auto& l : j.at("decoder")) m.decoder.push_back(nn::dense_from_json(l));
    m.adam = nn::adam_from_json(j.at("adam"));
    if (!j.at("norm_stats").is_null()) m.norm_stats = norm_stats_from_json(j.at("norm_stats"));
    if (m.encoder.size() != m.hyper.depth || m.decoder.size() != 2)
      throw Error(ErrorCategory::format, "checkpoint layer count does not match its depth");
    std::size_t width = m.input_dim;
    for (const auto& l : m.encoder) {
      if (l.in != 2 * width) throw Error(ErrorCategory::format, "checkpoint layer '" + l.name + "' does not chain");
      width = l.out;
    }
    if (m.decoder[0].in != width || m.decoder[1].in != m.decoder[0].out || m.decoder[1].out != m.input_dim)
      throw Error(ErrorCategory::format, "checkpoint decoder does not chain");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::format, std::string("bad checkpoint: ") + e.what());
  }
}

}  // namespace gsabfd
