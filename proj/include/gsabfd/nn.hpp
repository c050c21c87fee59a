#pragma once

// Dense layers with hand-chained reverse-mode gradients, ReLU, MSE loss, Adam and a
// central-difference gradient checker.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gsabfd/common.hpp"
#include "json.hpp"

namespace gsabfd::nn {

enum class Activation { relu, identity };

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }
inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity" || s == "linear") return Activation::identity;
  throw Error(ErrorCategory::parse, "unknown activation '" + std::string(s) + "'");
}

struct DenseLayer {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // out x in, row-major
  std::vector<double> bias;
  std::vector<double> weight_grad;
  std::vector<double> bias_grad;

  DenseLayer() = default;
  DenseLayer(std::string n, std::size_t in_dim, std::size_t out_dim)
      : name(std::move(n)), in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0),
        weight_grad(in_dim * out_dim, 0.0), bias_grad(out_dim, 0.0) {}

  /// Xavier-uniform weights in [-sqrt(6/(in+out)), +sqrt(6/(in+out))], zero bias.
  static DenseLayer xavier(std::string n, std::size_t in_dim, std::size_t out_dim, Rng& rng) {
    DenseLayer l(std::move(n), in_dim, out_dim);
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& w : l.weight) w = u(rng);
    return l;
  }

  double& w(std::size_t o, std::size_t i) { return weight[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weight[o * in + i]; }

  void zero_grad() {
    std::fill(weight_grad.begin(), weight_grad.end(), 0.0);
    std::fill(bias_grad.begin(), bias_grad.end(), 0.0);
  }

  /// Y = X W^T + b, one sample per row.
  Matrix forward(const Matrix& x) const {
    if (x.cols != in)
      throw Error(ErrorCategory::range, name + ": input width " + std::to_string(x.cols) + " != " + std::to_string(in));
    Matrix y(x.rows, out);
    for (std::size_t r = 0; r < x.rows; ++r) {
      auto xr = x.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        double s = bias[o];
        const double* wr = &weight[o * in];
        for (std::size_t i = 0; i < in; ++i) s += wr[i] * xr[i];
        y(r, o) = s;
      }
    }
    return y;
  }

  /// Accumulates dL/dW and dL/db and returns dL/dX.
  Matrix backward(const Matrix& x, const Matrix& grad_out) {
    if (x.cols != in || grad_out.cols != out || x.rows != grad_out.rows)
      throw Error(ErrorCategory::range, name + ": backward shape mismatch");
    Matrix grad_in(x.rows, in);
    for (std::size_t r = 0; r < x.rows; ++r) {
      auto xr = x.row(r);
      auto gi = grad_in.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        const double g = grad_out(r, o);
        if (g == 0.0) continue;
        bias_grad[o] += g;
        double* wg = &weight_grad[o * in];
        const double* wr = &weight[o * in];
        for (std::size_t i = 0; i < in; ++i) {
          wg[i] += g * xr[i];
          gi[i] += g * wr[i];
        }
      }
    }
    return grad_in;
  }
};

inline std::vector<double> dense_forward(std::span<const double> x, const DenseLayer& layer) {
  if (x.size() != layer.in)
    throw Error(ErrorCategory::range, "dense_forward: input length " + std::to_string(x.size()) + " != " +
                                          std::to_string(layer.in));
  Matrix xm(1, x.size());
  std::copy(x.begin(), x.end(), xm.data.begin());
  return layer.forward(xm).data;
}

inline std::vector<double> relu(std::span<const double> x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

inline void activate(Matrix& z, Activation a) {
  if (a == Activation::relu)
    for (double& v : z.data) v = v > 0.0 ? v : 0.0;
}

/// Multiplies `grad` by the activation derivative evaluated at pre-activation `z`
/// (ReLU subgradient at 0 is 0).
inline void activate_backward(const Matrix& z, Matrix& grad, Activation a) {
  if (a != Activation::relu) return;
  for (std::size_t i = 0; i < z.data.size(); ++i)
    if (!(z.data[i] > 0.0)) grad.data[i] = 0.0;
}

struct Loss {
  double value = 0.0;
  Matrix grad;  // dL/dXhat
};

/// Mean over all m*d elements of (x - xhat)^2 / 2.
inline Loss mse_loss(const Matrix& xhat, const Matrix& x) {
  if (!xhat.same_shape(x)) throw Error(ErrorCategory::range, "mse_loss: shape mismatch");
  Loss l;
  l.grad = Matrix(x.rows, x.cols);
  const double scale = 1.0 / static_cast<double>(x.data.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double r = xhat.data[i] - x.data[i];
    s += 0.5 * r * r;
    l.grad.data[i] = r * scale;
  }
  l.value = s * scale;
  return l;
}

// ---------------------------------------------------------------------------

struct ParamBlock {
  std::string name;
  std::span<double> values;
  std::span<double> grads;
};

inline void append_blocks(DenseLayer& l, std::vector<ParamBlock>& out) {
  out.push_back({l.name + ".weight", l.weight, l.weight_grad});
  out.push_back({l.name + ".bias", l.bias, l.bias_grad});
}

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update over every block. Throws before touching any parameter
/// if a gradient is non-finite.
inline void adam_step(std::span<const ParamBlock> blocks, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw Error(ErrorCategory::range, "learning rate must be positive");
  for (const auto& b : blocks)
    for (double g : b.grads)
      if (!std::isfinite(g)) throw Error(ErrorCategory::numeric, "non-finite gradient in " + b.name);
  if (state.first.size() != blocks.size()) {
    state.first.clear();
    state.second.clear();
    for (const auto& b : blocks) {
      state.first.emplace_back(b.values.size(), 0.0);
      state.second.emplace_back(b.values.size(), 0.0);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    auto& m = state.first[bi];
    auto& v = state.second[bi];
    const auto& b = blocks[bi];
    if (m.size() != b.values.size()) throw Error(ErrorCategory::range, "Adam state shape mismatch for " + b.name);
    for (std::size_t i = 0; i < b.values.size(); ++i) {
      const double g = b.grads[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      b.values[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

/// mse(xhat_plus, x) - mse(xhat_minus, x), summed entry by entry as (r+ - r-)(r+ + r-) / 2 so the
/// result carries rounding relative to the difference, not to the losses themselves.
inline double mse_loss_difference(const Matrix& xhat_plus, const Matrix& xhat_minus, const Matrix& x) {
  if (!xhat_plus.same_shape(x) || !xhat_minus.same_shape(x))
    throw Error(ErrorCategory::range, "mse_loss_difference: shape mismatch");
  long double s = 0.0L;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const long double rp = static_cast<long double>(xhat_plus.data[i]) - x.data[i];
    const long double rm = static_cast<long double>(xhat_minus.data[i]) - x.data[i];
    s += 0.5L * (rp - rm) * (rp + rm);
  }
  return static_cast<double>(s / static_cast<long double>(x.data.size()));
}

/// Returns L(param + eps) - L(param - eps) and leaves param unchanged.
using LossDifference = std::function<double(double& param, double eps)>;

/// Max over all parameters of |a - n| / max(1e-8, |a| + |n|), where n is the central difference
/// (L(theta + eps) - L(theta - eps)) / 2 eps and a the analytic gradient already stored in the blocks.
inline double max_relative_gradient_error(std::span<const ParamBlock> blocks, const LossDifference& difference,
                                          double eps = 1e-5) {
  double worst = 0.0;
  for (const auto& b : blocks) {
    for (std::size_t i = 0; i < b.values.size(); ++i) {
      const double numeric = difference(b.values[i], eps) / (2.0 * eps);
      const double analytic = b.grads[i];
      const double err = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

/// Same check against a scalar loss evaluated twice per parameter.
inline double max_relative_gradient_error(std::span<const ParamBlock> blocks, const std::function<double()>& loss,
                                          double eps = 1e-5) {
  return max_relative_gradient_error(
      blocks,
      LossDifference([&](double& p, double e) {
        const double saved = p;
        p = saved + e;
        const double plus = loss();
        p = saved - e;
        const double minus = loss();
        p = saved;
        return plus - minus;
      }),
      eps);
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const DenseLayer& l) {
  return {{"name", l.name}, {"in", l.in}, {"out", l.out}, {"weight", l.weight}, {"bias", l.bias}};
}

inline DenseLayer dense_from_json(const nlohmann::json& j) {
  DenseLayer l(j.at("name").get<std::string>(), j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>());
  l.weight = j.at("weight").get<std::vector<double>>();
  l.bias = j.at("bias").get<std::vector<double>>();
  if (l.weight.size() != l.in * l.out || l.bias.size() != l.out)
    throw Error(ErrorCategory::format, "layer '" + l.name + "' parameter shape mismatch");
  return l;
}

inline nlohmann::json to_json(const AdamState& s) {
  return {{"beta1", s.beta1}, {"beta2", s.beta2}, {"eps", s.eps},
          {"step", s.step},   {"first", s.first}, {"second", s.second}};
}

inline AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.eps = j.at("eps").get<double>();
  s.step = j.at("step").get<std::uint64_t>();
  s.first = j.at("first").get<std::vector<std::vector<double>>>();
  s.second = j.at("second").get<std::vector<std::vector<double>>>();
  return s;
}

}  // namespace gsabfd::nn
