#pragma once

// Range-error metrics over sold and unsold items, all in log-price space.
//
//   SMLE    mean hinge distance to the target range over sold items (I1)
//   SPDMLE  mean undershoot below the sold range, over the I2 undershooting items
//   SPIMLE  mean overshoot above the sold range, over the I3 overshooting items
//   UMLE / UPDMLE / UPIMLE   the unsold analogues over I4, I5, I6
//
// Items exactly on a boundary are in range.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pricesuggest/error.hpp"
#include "pricesuggest/objectives.hpp"
#include "pricesuggest/types.hpp"

namespace pricesuggest {

struct MetricReport {
  double smle = 0.0;
  double spdmle = 0.0;
  double spimle = 0.0;
  double umle = 0.0;
  double updmle = 0.0;
  double upimle = 0.0;
  std::size_t i1 = 0, i2 = 0, i3 = 0, i4 = 0, i5 = 0, i6 = 0;
  std::size_t n_items = 0;

  /// Counts are consistent and the means decompose into their one-sided
  /// parts (I1*SMLE = I2*SPDMLE + I3*SPIMLE and the unsold analogue) up to
  /// floating rounding.
  [[nodiscard]] bool consistent(double rel_tol = 1e-12) const {
    auto close = [rel_tol](double a, double b) {
      return std::abs(a - b) <= rel_tol * std::max({1.0, std::abs(a), std::abs(b)});
    };
    return i2 + i3 <= i1 && i5 + i6 <= i4 && i1 + i4 == n_items &&
           close(static_cast<double>(i1) * smle, static_cast<double>(i2) * spdmle + static_cast<double>(i3) * spimle) &&
           close(static_cast<double>(i4) * umle, static_cast<double>(i5) * updmle + static_cast<double>(i6) * upimle);
  }
};

inline double safe_mean(double sum, std::size_t count) { return count == 0 ? 0.0 : sum / static_cast<double>(count); }

inline MetricReport compute_metrics(std::span<const double> suggested_log_price, std::span<const ItemOutcome> outcomes,
                                    const RangeLossParams& rp) {
  detail::require_dims(suggested_log_price.size() == outcomes.size(),
                       "compute_metrics: " + std::to_string(suggested_log_price.size()) + " predictions for " +
                           std::to_string(outcomes.size()) + " items");
  MetricReport m;
  m.n_items = outcomes.size();
  double sold_below = 0.0, sold_above = 0.0, unsold_below = 0.0, unsold_above = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const double p = suggested_log_price[i];
    const TargetRange r = target_range(outcomes[i].status, outcomes[i].log_price, rp);
    const bool sold = outcomes[i].status == SaleStatus::sold;
    (sold ? m.i1 : m.i4) += 1;
    if (p < r.lower) {
      (sold ? sold_below : unsold_below) += r.lower - p;
      (sold ? m.i2 : m.i5) += 1;
    } else if (p > r.upper) {
      (sold ? sold_above : unsold_above) += p - r.upper;
      (sold ? m.i3 : m.i6) += 1;
    }
  }
  m.smle = safe_mean(sold_below + sold_above, m.i1);
  m.spdmle = safe_mean(sold_below, m.i2);
  m.spimle = safe_mean(sold_above, m.i3);
  m.umle = safe_mean(unsold_below + unsold_above, m.i4);
  m.updmle = safe_mean(unsold_below, m.i5);
  m.upimle = safe_mean(unsold_above, m.i6);
  return m;
}

inline MetricReport compute_metrics(std::span<const PredictionOutcome> predictions,
                                    std::span<const ItemOutcome> outcomes, const RangeLossParams& rp) {
  std::vector<double> p(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) p[i] = predictions[i].suggested_log_price;
  return compute_metrics(std::span<const double>(p), outcomes, rp);
}

/// Metrics partitioned by the classifier's hard label.
struct SplitReport {
  MetricReport positive;
  MetricReport negative;
  std::size_t n_positive = 0;
  double positive_fraction = 0.0;
};

inline SplitReport split_report(std::span<const PredictionOutcome> predictions, std::span<const ItemOutcome> outcomes,
                                const RangeLossParams& rp) {
  detail::require_dims(predictions.size() == outcomes.size(), "split_report: predictions/outcomes size mismatch");
  std::vector<double> pos_p, neg_p;
  std::vector<ItemOutcome> pos_o, neg_o;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].hard_label == HardLabel::positive) {
      pos_p.push_back(predictions[i].suggested_log_price);
      pos_o.push_back(outcomes[i]);
    } else {
      neg_p.push_back(predictions[i].suggested_log_price);
      neg_o.push_back(outcomes[i]);
    }
  }
  SplitReport s;
  s.positive = compute_metrics(std::span<const double>(pos_p), pos_o, rp);
  s.negative = compute_metrics(std::span<const double>(neg_p), neg_o, rp);
  s.n_positive = pos_p.size();
  s.positive_fraction = predictions.empty() ? 0.0 : static_cast<double>(s.n_positive) / static_cast<double>(predictions.size());
  return s;
}

/// Multiplicative price ratio represented by a log-price error.
inline double log_error_to_ratio(double log_error) { return std::exp(log_error); }

// ---------------------------------------------------------------------------
// Serialization: flat records, keys prefixed per side.

inline void write_metrics(nlohmann::ordered_json& j, const MetricReport& m, const std::string& prefix) {
  j[prefix + "n_items"] = m.n_items;
  j[prefix + "smle"] = m.smle;
  j[prefix + "spdmle"] = m.spdmle;
  j[prefix + "spimle"] = m.spimle;
  j[prefix + "umle"] = m.umle;
  j[prefix + "updmle"] = m.updmle;
  j[prefix + "upimle"] = m.upimle;
  j[prefix + "i1"] = m.i1;
  j[prefix + "i2"] = m.i2;
  j[prefix + "i3"] = m.i3;
  j[prefix + "i4"] = m.i4;
  j[prefix + "i5"] = m.i5;
  j[prefix + "i6"] = m.i6;
}

inline MetricReport read_metrics(const nlohmann::json& j, const std::string& prefix) {
  try {
    MetricReport m;
    m.n_items = j.at(prefix + "n_items").get<std::size_t>();
    m.smle = j.at(prefix + "smle").get<double>();
    m.spdmle = j.at(prefix + "spdmle").get<double>();
    m.spimle = j.at(prefix + "spimle").get<double>();
    m.umle = j.at(prefix + "umle").get<double>();
    m.updmle = j.at(prefix + "updmle").get<double>();
    m.upimle = j.at(prefix + "upimle").get<double>();
    m.i1 = j.at(prefix + "i1").get<std::size_t>();
    m.i2 = j.at(prefix + "i2").get<std::size_t>();
    m.i3 = j.at(prefix + "i3").get<std::size_t>();
    m.i4 = j.at(prefix + "i4").get<std::size_t>();
    m.i5 = j.at(prefix + "i5").get<std::size_t>();
    m.i6 = j.at(prefix + "i6").get<std::size_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metric report: ") + e.what());
  }
}

inline nlohmann::ordered_json to_json(const SplitReport& s) {
  nlohmann::ordered_json j;
  j["n_items"] = s.positive.n_items + s.negative.n_items;
  j["n_positive"] = s.n_positive;
  j["positive_fraction"] = s.positive_fraction;
  write_metrics(j, s.positive, "positive_");
  write_metrics(j, s.negative, "negative_");
  return j;
}

inline SplitReport split_report_from_json(const nlohmann::json& j) {
  SplitReport s;
  s.positive = read_metrics(j, "positive_");
  s.negative = read_metrics(j, "negative_");
  try {
    s.n_positive = j.at("n_positive").get<std::size_t>();
    s.positive_fraction = j.at("positive_fraction").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metric report: ") + e.what());
  }
  return s;
}

}  // namespace pricesuggest
