#pragma once

// Target-price-range loss and the two joint classification/regression
// objectives. Prices are log prices throughout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pricesuggest/error.hpp"
#include "pricesuggest/types.hpp"

namespace pricesuggest {

/// How the make-up / discount rates act on log prices.
///  - multiplicative_log: bounds are mu * p and nu * p on the log prices.
///  - additive_log: bounds are p + ln(mu) and p + ln(nu), i.e. the rates
///    applied to the original-currency prices.
enum class RangeMode { multiplicative_log, additive_log };

inline std::string_view to_string(RangeMode m) {
  return m == RangeMode::multiplicative_log ? "multiplicative-log" : "additive-log";
}

inline RangeMode parse_range_mode(std::string_view s) {
  if (s == "multiplicative-log") return RangeMode::multiplicative_log;
  if (s == "additive-log") return RangeMode::additive_log;
  throw ConfigError("unknown range_mode '" + std::string(s) + "'");
}

struct RangeLossParams {
  double mu = 1.2;        // make-up rate of the sold price
  double nu = 1.0 / 1.2;  // discount rate of the listing price
  RangeMode mode = RangeMode::multiplicative_log;

  void validate() const {
    if (!(mu > 1.0)) throw ConfigError("range.mu must be > 1");
    if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("range.nu must lie in (0, 1)");
  }
};

/// Closed interval a suggested log price should fall into.
struct TargetRange {
  double lower = 0.0;
  double upper = 0.0;

  [[nodiscard]] bool contains(double p) const { return lower <= p && p <= upper; }
  /// Hinge distance to the interval, zero inside.
  [[nodiscard]] double distance(double p) const { return std::max({lower - p, p - upper, 0.0}); }
};

// In multiplicative mode a negative log price would invert the interval; the
// bounds are kept ordered so the range stays well formed.
inline TargetRange sold_range(double p_sold, const RangeLossParams& rp) {
  const double hi = rp.mode == RangeMode::multiplicative_log ? rp.mu * p_sold : p_sold + std::log(rp.mu);
  return {std::min(p_sold, hi), std::max(p_sold, hi)};
}

inline TargetRange unsold_range(double p_list, const RangeLossParams& rp) {
  const double lo = rp.mode == RangeMode::multiplicative_log ? rp.nu * p_list : p_list + std::log(rp.nu);
  return {std::min(lo, p_list), std::max(lo, p_list)};
}

inline TargetRange target_range(SaleStatus status, double price, const RangeLossParams& rp) {
  return status == SaleStatus::sold ? sold_range(price, rp) : unsold_range(price, rp);
}

/// U: loss of a suggestion against an observed sold price.
inline double range_loss_sold(double p_sug, double p_sold, const RangeLossParams& rp) {
  return sold_range(p_sold, rp).distance(p_sug);
}

/// V: loss of a suggestion against the listing price of an unsold item.
inline double range_loss_unsold(double p_sug, double p_list, const RangeLossParams& rp) {
  return unsold_range(p_list, rp).distance(p_sug);
}

struct RangeLoss {
  double value = 0.0;
  /// d value / d p_sug: -1 below the range, +1 above, 0 inside and on the
  /// boundaries.
  double subgradient = 0.0;
};

inline RangeLoss range_loss(SaleStatus status, double p_sug, double price, const RangeLossParams& rp) {
  const TargetRange r = target_range(status, price, rp);
  if (p_sug < r.lower) return {r.lower - p_sug, -1.0};
  if (p_sug > r.upper) return {p_sug - r.upper, 1.0};
  return {0.0, 0.0};
}

/// Distance from `p_sug` to the nearest branch boundary of the range loss.
inline double range_loss_kink_distance(SaleStatus status, double p_sug, double price, const RangeLossParams& rp) {
  const TargetRange r = target_range(status, price, rp);
  return std::min(std::abs(p_sug - r.lower), std::abs(p_sug - r.upper));
}

/// Hard qualification decision: 1 at or above 0.5.
inline int hard_indicator(double confidence) { return confidence < 0.5 ? 0 : 1; }

// ---------------------------------------------------------------------------
// Joint objectives

enum class ConstraintMode { percentile, threshold };

inline std::string_view to_string(ConstraintMode m) {
  return m == ConstraintMode::percentile ? "percentile" : "threshold";
}

inline ConstraintMode parse_constraint_mode(std::string_view s) {
  if (s == "percentile") return ConstraintMode::percentile;
  if (s == "threshold") return ConstraintMode::threshold;
  throw ConfigError("unknown constraint mode '" + std::string(s) + "'");
}

struct ConstraintConfig {
  ConstraintMode mode = ConstraintMode::percentile;
  double delta = 0.6;     // required positive fraction (percentile)
  double beta = 1.0;      // penalty weight (percentile)
  double epsilon = 0.15;  // loss threshold for a positive label (threshold)
  double gamma = 1.0;     // cross-entropy weight (threshold)

  void validate() const {
    if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("constraint.delta must lie in (0, 1]");
    if (!(beta >= 0.0)) throw ConfigError("constraint.beta must be >= 0");
    if (!(epsilon > 0.0)) throw ConfigError("constraint.epsilon must be > 0");
    if (!(gamma >= 0.0)) throw ConfigError("constraint.gamma must be >= 0");
  }
};

/// Value of a batch objective with per-item gradient coefficients.
struct ObjectiveResult {
  double value = 0.0;
  /// Mean of confidence * loss.
  double regression_term = 0.0;
  /// Percentile penalty or weighted cross-entropy contribution.
  double constraint_term = 0.0;
  /// d value / d loss_i.
  std::vector<double> grad_loss;
  /// d value / d confidence_i (percentile: includes the straight-through part).
  std::vector<double> grad_confidence;
  double positive_fraction = 0.0;

  // percentile
  bool penalty_active = false;
  /// Straight-through contribution added to every grad_confidence entry.
  double straight_through_grad = 0.0;

  // threshold
  std::size_t label_positives = 0;
  std::size_t label_negatives = 0;
  double weight_positive = 0.0;
  double weight_negative = 0.0;
  /// A class absent from the batch; its cross-entropy side was dropped.
  bool dropped_class = false;
};

/// Mean over the batch of confidence * loss, plus beta * max(0, delta - positive fraction).
/// The hard indicator is differentiated with a straight-through estimator:
/// while the penalty is active each confidence receives -beta / N.
inline ObjectiveResult percentile_objective(std::span<const double> confidence, std::span<const double> loss,
                                            const ConstraintConfig& cfg) {
  detail::require_dims(confidence.size() == loss.size(), "percentile_objective: confidence/loss size mismatch");
  if (confidence.empty()) throw Error("percentile_objective: empty batch");
  const std::size_t n = confidence.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  ObjectiveResult r;
  r.grad_loss.resize(n);
  r.grad_confidence.resize(n);
  std::size_t positives = 0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    weighted += confidence[i] * loss[i];
    positives += static_cast<std::size_t>(hard_indicator(confidence[i]));
  }
  r.regression_term = weighted * inv_n;
  r.positive_fraction = static_cast<double>(positives) * inv_n;
  const double shortfall = cfg.delta - r.positive_fraction;
  r.penalty_active = shortfall > 0.0;
  r.constraint_term = cfg.beta * std::max(0.0, shortfall);
  r.value = r.regression_term + r.constraint_term;
  r.straight_through_grad = r.penalty_active ? -cfg.beta * inv_n : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.grad_loss[i] = confidence[i] * inv_n;
    r.grad_confidence[i] = loss[i] * inv_n + r.straight_through_grad;
  }
  return r;
}

struct ClassWeights {
  double positive = 1.0;
  double negative = 1.0;
};

/// w_p = sqrt((P+N)/2P), w_n = sqrt((P+N)/2N); an absent class gets weight 0.
inline ClassWeights balanced_class_weights(std::size_t positives, std::size_t negatives) {
  const double total = static_cast<double>(positives + negatives);
  ClassWeights w;
  w.positive = positives == 0 ? 0.0 : std::sqrt(total / (2.0 * static_cast<double>(positives)));
  w.negative = negatives == 0 ? 0.0 : std::sqrt(total / (2.0 * static_cast<double>(negatives)));
  return w;
}

/// Threshold label: positive when the regression loss does not exceed epsilon.
inline int threshold_label(double loss, double epsilon) { return loss > epsilon ? 0 : 1; }

inline constexpr double kConfidenceClamp = 1e-7;

/// Mean over the batch of confidence * loss minus gamma times the class-weighted
/// log-likelihood of the threshold labels. Labels are constants for the
/// gradient. `weights_override` replaces the batch-balanced weights.
inline ObjectiveResult threshold_objective(std::span<const double> confidence, std::span<const double> loss,
                                           const ConstraintConfig& cfg,
                                           std::optional<ClassWeights> weights_override = std::nullopt) {
  detail::require_dims(confidence.size() == loss.size(), "threshold_objective: confidence/loss size mismatch");
  if (confidence.empty()) throw Error("threshold_objective: empty batch");
  const std::size_t n = confidence.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  ObjectiveResult r;
  r.grad_loss.resize(n);
  r.grad_confidence.resize(n);
  std::vector<int> labels(n);
  std::size_t hard_positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = threshold_label(loss[i], cfg.epsilon);
    r.label_positives += static_cast<std::size_t>(labels[i]);
    hard_positives += static_cast<std::size_t>(hard_indicator(confidence[i]));
  }
  r.label_negatives = n - r.label_positives;
  r.dropped_class = r.label_positives == 0 || r.label_negatives == 0;
  const ClassWeights w = weights_override.value_or(balanced_class_weights(r.label_positives, r.label_negatives));
  r.weight_positive = w.positive;
  r.weight_negative = w.negative;
  r.positive_fraction = static_cast<double>(hard_positives) * inv_n;

  constexpr double lo = kConfidenceClamp;
  constexpr double hi = 1.0 - kConfidenceClamp;
  double weighted = 0.0;
  double ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = confidence[i];
    const double cc = std::clamp(c, lo, hi);
    const bool inside = c > lo && c < hi;
    weighted += c * loss[i];
    double d_ce = 0.0;  // derivative of the bracketed log-likelihood w.r.t. c
    if (labels[i] == 1) {
      ce += w.positive * std::log(cc);
      if (inside) d_ce = w.positive / cc;
    } else {
      ce += w.negative * std::log(1.0 - cc);
      if (inside) d_ce = -w.negative / (1.0 - cc);
    }
    r.grad_loss[i] = c * inv_n;
    r.grad_confidence[i] = (loss[i] - cfg.gamma * d_ce) * inv_n;
  }
  r.regression_term = weighted * inv_n;
  r.constraint_term = -cfg.gamma * ce * inv_n;
  r.value = r.regression_term + r.constraint_term;
  return r;
}

/// Dispatches on the configured constraint mode.
inline ObjectiveResult joint_objective(std::span<const double> confidence, std::span<const double> loss,
                                       const ConstraintConfig& cfg) {
  return cfg.mode == ConstraintMode::percentile ? percentile_objective(confidence, loss, cfg)
                                                : threshold_objective(confidence, loss, cfg);
}

/// Unweighted mean range loss, used to train the stand-alone baseline regressor.
inline ObjectiveResult mean_loss_objective(std::span<const double> loss) {
  if (loss.empty()) throw Error("mean_loss_objective: empty batch");
  const double inv_n = 1.0 / static_cast<double>(loss.size());
  ObjectiveResult r;
  r.grad_loss.assign(loss.size(), inv_n);
  r.grad_confidence.assign(loss.size(), 0.0);
  for (double l : loss) r.regression_term += l;
  r.regression_term *= inv_n;
  r.value = r.regression_term;
  return r;
}

}  // namespace pricesuggest
