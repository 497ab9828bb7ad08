#pragma once

// Dense layers, activations, Adam and a finite-difference gradient checker.
// Every batched routine stores one sample per column.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pricesuggest/error.hpp"

namespace pricesuggest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Fully connected layer `y = W x + b`.
struct DenseLayer {
  Matrix weights;  // [out x in]
  Vector bias;     // [out]

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out)
      : weights(Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in))),
        bias(Vector::Zero(static_cast<Eigen::Index>(out))) {}

  [[nodiscard]] std::size_t in_size() const { return static_cast<std::size_t>(weights.cols()); }
  [[nodiscard]] std::size_t out_size() const { return static_cast<std::size_t>(weights.rows()); }

  [[nodiscard]] bool all_finite() const { return weights.allFinite() && bias.allFinite(); }

  /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero bias.
  template <class Rng>
  void init_glorot(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_size() + out_size()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < weights.cols(); ++c)
      for (Eigen::Index r = 0; r < weights.rows(); ++r) weights(r, c) = dist(rng);
    bias.setZero();
  }
};

struct DenseGrad {
  Matrix weights;
  Vector bias;
};

inline Vector dense_forward(const Vector& x, const DenseLayer& layer) {
  detail::require_dims(static_cast<std::size_t>(x.size()) == layer.in_size(),
                       "dense_forward: input has " + std::to_string(x.size()) + " entries, layer expects " +
                           std::to_string(layer.in_size()));
  detail::require_dims(layer.bias.size() == layer.weights.rows(), "dense_forward: bias/weights row mismatch");
  return layer.weights * x + layer.bias;
}

/// Batched forward; `x` is [in x batch].
inline Matrix dense_forward(const Matrix& x, const DenseLayer& layer) {
  detail::require_dims(static_cast<std::size_t>(x.rows()) == layer.in_size(),
                       "dense_forward: input has " + std::to_string(x.rows()) + " rows, layer expects " +
                           std::to_string(layer.in_size()));
  Matrix y = layer.weights * x;
  y.colwise() += layer.bias;
  return y;
}

struct DenseBackward {
  DenseGrad grad;
  Vector grad_input;
};

inline DenseBackward dense_backward(const Vector& x, const DenseLayer& layer, const Vector& upstream) {
  detail::require_dims(static_cast<std::size_t>(x.size()) == layer.in_size() &&
                           static_cast<std::size_t>(upstream.size()) == layer.out_size(),
                       "dense_backward: shape mismatch");
  return {{upstream * x.transpose(), upstream}, layer.weights.transpose() * upstream};
}

struct DenseBackwardBatch {
  DenseGrad grad;
  Matrix grad_input;
};

/// Batched backward; parameter gradients are summed over the batch columns.
inline DenseBackwardBatch dense_backward(const Matrix& x, const DenseLayer& layer, const Matrix& upstream,
                                         bool need_input_grad = true) {
  detail::require_dims(static_cast<std::size_t>(x.rows()) == layer.in_size() &&
                           static_cast<std::size_t>(upstream.rows()) == layer.out_size() &&
                           x.cols() == upstream.cols(),
                       "dense_backward: shape mismatch");
  DenseBackwardBatch out;
  out.grad.weights.noalias() = upstream * x.transpose();
  out.grad.bias = upstream.rowwise().sum();
  if (need_input_grad) out.grad_input.noalias() = layer.weights.transpose() * upstream;
  return out;
}

// ---------------------------------------------------------------------------
// Activations

enum class Activation { relu, sigmoid, softmax };

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Vector softmax(const Vector& x) {
  if (x.size() == 0) return x;
  Vector e = (x.array() - x.maxCoeff()).exp();
  return e / e.sum();
}

/// Column-wise softmax.
inline Matrix softmax_columns(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double m = x.col(c).maxCoeff();
    out.col(c) = (x.col(c).array() - m).exp();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

inline Vector activation_forward(const Vector& x, Activation kind) {
  switch (kind) {
    case Activation::relu:
      return x.cwiseMax(0.0);
    case Activation::sigmoid:
      return x.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::softmax:
      return softmax(x);
  }
  return x;
}

/// Gradient of softmax given its output `s`: J^T g = s * (g - <s, g>).
inline Vector softmax_backward(const Vector& s, const Vector& upstream) {
  return s.cwiseProduct((upstream.array() - s.dot(upstream)).matrix());
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  long timestep = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n)
      : first_moment(Vector::Zero(static_cast<Eigen::Index>(n))),
        second_moment(Vector::Zero(static_cast<Eigen::Index>(n))) {}
};

/// One bias-corrected Adam update of a parameter block in place.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr,
                      const std::string& block_name = "parameters") {
  const auto n = static_cast<Eigen::Index>(params.size());
  detail::require_dims(params.size() == grads.size(), "adam_step: " + block_name + " has " +
                                                          std::to_string(params.size()) + " params but " +
                                                          std::to_string(grads.size()) + " grads");
  if (state.timestep == 0 && state.first_moment.size() == 0) {
    state.first_moment = Vector::Zero(n);
    state.second_moment = Vector::Zero(n);
  }
  detail::require_dims(state.first_moment.size() == n && state.second_moment.size() == n,
                       "adam_step: optimizer state for " + block_name + " has the wrong size");
  if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");

  Eigen::Map<const Vector> g(grads.data(), n);
  if (!g.allFinite()) throw NonFiniteError("adam_step: non-finite gradient in block '" + block_name + "'");
  Eigen::Map<Vector> p(params.data(), n);

  ++state.timestep;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * g;
  state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.timestep));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.timestep));
  p.array() -= lr * (state.first_moment.array() / c1) / ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  /// Set when the caller-supplied kink distance is below the margin; the
  /// comparison is then not meaningful.
  bool near_kink = false;
  bool passed = true;
};

struct GradientCheckOptions {
  double step = 1e-5;
  /// Denominator floor so tiny gradients are compared in absolute terms.
  double scale_floor = 1e-6;
  double kink_margin = 1e-4;
};

inline double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Compares `analytic` against central differences of `value` around `point`.
/// `value` must read the current contents of `point`; each coordinate is
/// perturbed in place and restored.
inline GradientCheckReport gradient_check(const std::function<double()>& value, std::span<double> point,
                                          std::span<const double> analytic, double tolerance,
                                          const GradientCheckOptions& opt = {},
                                          const std::function<double()>& kink_distance = {}) {
  detail::require_dims(point.size() == analytic.size(), "gradient_check: point/gradient size mismatch");
  GradientCheckReport report;
  if (kink_distance) report.near_kink = kink_distance() < opt.kink_margin;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + opt.step;
    const double up = value();
    point[i] = saved - opt.step;
    const double down = value();
    point[i] = saved;
    const double numeric = (up - down) / (2.0 * opt.step);
    const double err = relative_error(analytic[i], numeric, opt.scale_floor);
    if (err > report.max_relative_error || i == 0) {
      report.max_relative_error = err;
      report.worst_index = i;
      report.analytic_at_worst = analytic[i];
      report.numeric_at_worst = numeric;
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace pricesuggest
