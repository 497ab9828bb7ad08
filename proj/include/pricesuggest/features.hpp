#pragma once

// Feature pipeline: token embedding, attention fusion of the visual and
// textual blocks, and marketplace price statistics.
//
// Statistical block layout (16 reals, log-price space):
//   [0..3]   global sold      Q1, Q2, Q3, mean
//   [4..7]   global unsold    Q1, Q2, Q3, mean   (listing prices)
//   [8..11]  category sold    Q1, Q2, Q3, mean
//   [12..15] category unsold  Q1, Q2, Q3, mean

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pricesuggest/error.hpp"
#include "pricesuggest/item.hpp"
#include "pricesuggest/numeric.hpp"

namespace pricesuggest {

inline constexpr std::size_t kStatDim = 16;

enum class Ablation { none, no_image, no_text, no_attention };

inline std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_image: return "no_image";
    case Ablation::no_text: return "no_text";
    case Ablation::no_attention: return "no_attention";
  }
  return "none";
}

inline Ablation parse_ablation(std::string_view s) {
  if (s == "none") return Ablation::none;
  if (s == "no_image") return Ablation::no_image;
  if (s == "no_text") return Ablation::no_text;
  if (s == "no_attention") return Ablation::no_attention;
  throw ConfigError("unknown ablation '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Embedding

/// Learned word embeddings, one row per vocabulary id. Row 0 is padding and
/// stays zero.
struct EmbeddingTable {
  Matrix table;  // [vocab_size x dim]

  EmbeddingTable() = default;
  EmbeddingTable(std::size_t vocab_size, std::size_t dim)
      : table(Matrix::Zero(static_cast<Eigen::Index>(vocab_size), static_cast<Eigen::Index>(dim))) {}

  [[nodiscard]] std::size_t vocab_size() const { return static_cast<std::size_t>(table.rows()); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(table.cols()); }

  template <class Rng>
  void init_uniform(Rng& rng, double limit = 0.05) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < table.cols(); ++c)
      for (Eigen::Index r = 0; r < table.rows(); ++r) table(r, c) = r == 0 ? 0.0 : dist(rng);
  }
};

/// Concatenates the 32 embedding rows in token order (length 32 * dim).
/// Padding positions contribute zeros whatever row 0 holds.
inline Vector embed_tokens(const TokenVector& tv, const EmbeddingTable& e) {
  const auto dim = static_cast<Eigen::Index>(e.dim());
  Vector out(static_cast<Eigen::Index>(kTokenLength) * dim);
  for (std::size_t p = 0; p < kTokenLength; ++p) {
    const std::uint32_t id = tv.ids[p];
    detail::require_dims(id < e.vocab_size(), "embed_tokens: token id outside the embedding table");
    if (id == 0)
      out.segment(static_cast<Eigen::Index>(p) * dim, dim).setZero();
    else
      out.segment(static_cast<Eigen::Index>(p) * dim, dim) = e.table.row(id).transpose();
  }
  return out;
}

/// Scatters a gradient on the concatenated embeddings back onto table rows.
/// The padding row never receives gradient.
inline void accumulate_embedding_grad(const TokenVector& tv, const Vector& grad_text, Matrix& grad_table) {
  const auto dim = grad_table.cols();
  for (std::size_t p = 0; p < kTokenLength; ++p) {
    const std::uint32_t id = tv.ids[p];
    if (id == 0) continue;
    grad_table.row(id) += grad_text.segment(static_cast<Eigen::Index>(p) * dim, dim).transpose();
  }
}

// ---------------------------------------------------------------------------
// Attention fusion

/// Projects concat(visual, textual) to two logits; their softmax weighs the
/// visual and textual blocks.
struct FusionLayer {
  DenseLayer projection;  // [(visual_dim + text_dim) -> 2]

  FusionLayer() = default;
  FusionLayer(std::size_t visual_dim, std::size_t text_dim) : projection(visual_dim + text_dim, 2) {}
};

struct FusedFeatures {
  Vector visual;
  Vector textual;
  Vector weights;  // [visual weight, textual weight]
};

inline FusedFeatures attention_fuse(const Vector& visual, const Vector& textual, const FusionLayer& fusion) {
  detail::require_dims(fusion.projection.out_size() == 2, "attention_fuse: fusion layer must output 2 logits");
  detail::require_dims(static_cast<std::size_t>(visual.size() + textual.size()) == fusion.projection.in_size(),
                       "attention_fuse: feature sizes do not match the fusion layer");
  Vector concat(visual.size() + textual.size());
  concat << visual, textual;
  FusedFeatures f;
  f.weights = softmax(dense_forward(concat, fusion.projection));
  f.visual = f.weights[0] * visual;
  f.textual = f.weights[1] * textual;
  return f;
}

// ---------------------------------------------------------------------------
// Statistical features

/// Quantile by linear interpolation between closest ranks; `sorted` ascending.
inline double quantile_linear(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error("quantile_linear: empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct PriceSummary {
  double q1 = 0.0, q2 = 0.0, q3 = 0.0, mean = 0.0;

  friend bool operator==(const PriceSummary&, const PriceSummary&) = default;
};

inline PriceSummary summarize_prices(std::vector<double> prices) {
  if (prices.empty()) return {};
  std::sort(prices.begin(), prices.end());
  PriceSummary s;
  s.q1 = quantile_linear(prices, 0.25);
  s.q2 = quantile_linear(prices, 0.50);
  s.q3 = quantile_linear(prices, 0.75);
  double sum = 0.0;
  for (double p : prices) sum += p;  // ascending order: independent of corpus order
  s.mean = sum / static_cast<double>(prices.size());
  return s;
}

/// Sold and unsold summaries of one population.
struct StatsBlock {
  PriceSummary sold;
  PriceSummary unsold;
  /// The half was empty and copied from the global block.
  bool sold_fallback = false;
  bool unsold_fallback = false;

  friend bool operator==(const StatsBlock&, const StatsBlock&) = default;
};

struct StatisticsTable {
  StatsBlock global;
  std::map<std::string, StatsBlock> per_category;

  /// The 16-real block for `category`; unseen categories use the global block.
  [[nodiscard]] std::array<double, kStatDim> features_for(const std::string& category) const {
    const auto it = per_category.find(category);
    const StatsBlock& cat = it == per_category.end() ? global : it->second;
    const PriceSummary* parts[4] = {&global.sold, &global.unsold, &cat.sold, &cat.unsold};
    std::array<double, kStatDim> out{};
    for (std::size_t b = 0; b < 4; ++b) {
      out[4 * b + 0] = parts[b]->q1;
      out[4 * b + 1] = parts[b]->q2;
      out[4 * b + 2] = parts[b]->q3;
      out[4 * b + 3] = parts[b]->mean;
    }
    return out;
  }
};

inline StatisticsTable compute_statistical_features(std::span<const ItemRecord> corpus) {
  if (corpus.empty()) throw Error("compute_statistical_features: empty corpus");
  std::vector<double> all_sold, all_unsold;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_cat;
  for (const ItemRecord& r : corpus) {
    auto& [sold, unsold] = by_cat[r.category];
    if (r.status == SaleStatus::sold) {
      all_sold.push_back(r.log_price);
      sold.push_back(r.log_price);
    } else {
      all_unsold.push_back(r.log_price);
      unsold.push_back(r.log_price);
    }
  }
  StatisticsTable t;
  t.global.sold = summarize_prices(all_sold);
  t.global.unsold = summarize_prices(all_unsold);
  t.global.sold_fallback = all_sold.empty();
  t.global.unsold_fallback = all_unsold.empty();
  for (auto& [cat, lists] : by_cat) {
    StatsBlock b;
    b.sold_fallback = lists.first.empty();
    b.unsold_fallback = lists.second.empty();
    b.sold = b.sold_fallback ? t.global.sold : summarize_prices(std::move(lists.first));
    b.unsold = b.unsold_fallback ? t.global.unsold : summarize_prices(std::move(lists.second));
    t.per_category.emplace(cat, b);
  }
  return t;
}

/// Per-column affine standardization fitted on the training split.
/// Zero-variance columns map to 0.
struct Standardizer {
  std::array<double, kStatDim> mean{};
  std::array<double, kStatDim> scale{};

  Standardizer() { scale.fill(1.0); }

  static Standardizer fit(std::span<const ItemRecord> items, const StatisticsTable& stats) {
    Standardizer s;
    if (items.empty()) return s;
    std::array<double, kStatDim> sum{}, sum_sq{};
    for (const ItemRecord& r : items) {
      const auto f = stats.features_for(r.category);
      for (std::size_t k = 0; k < kStatDim; ++k) sum[k] += f[k];
    }
    const double n = static_cast<double>(items.size());
    for (std::size_t k = 0; k < kStatDim; ++k) s.mean[k] = sum[k] / n;
    for (const ItemRecord& r : items) {
      const auto f = stats.features_for(r.category);
      for (std::size_t k = 0; k < kStatDim; ++k) sum_sq[k] += (f[k] - s.mean[k]) * (f[k] - s.mean[k]);
    }
    for (std::size_t k = 0; k < kStatDim; ++k) {
      const double sd = std::sqrt(sum_sq[k] / n);
      s.scale[k] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  [[nodiscard]] Vector apply(const std::array<double, kStatDim>& raw) const {
    Vector v(static_cast<Eigen::Index>(kStatDim));
    for (std::size_t k = 0; k < kStatDim; ++k) v[static_cast<Eigen::Index>(k)] = (raw[k] - mean[k]) / scale[k];
    return v;
  }
};

/// Input vector of the dense stack for one item:
/// concat(weighted visual, weighted textual, standardized statistics).
/// no_image / no_text zero their block before fusion; no_attention skips the
/// weighting and concatenates the raw blocks.
inline Vector assemble_input(const ItemRecord& record, const EmbeddingTable& embeddings, const FusionLayer& fusion,
                             const Vector& standardized_stats, Ablation ablation) {
  detail::require_dims(standardized_stats.size() == static_cast<Eigen::Index>(kStatDim),
                       "assemble_input: statistical block must have 16 entries");
  Vector visual = record.visual;
  Vector textual = embed_tokens(record.tokens, embeddings);
  if (ablation == Ablation::no_image) visual.setZero();
  if (ablation == Ablation::no_text) textual.setZero();
  if (ablation != Ablation::no_attention) {
    FusedFeatures f = attention_fuse(visual, textual, fusion);
    visual = std::move(f.visual);
    textual = std::move(f.textual);
  }
  Vector out(visual.size() + textual.size() + standardized_stats.size());
  out << visual, textual, standardized_stats;
  return out;
}

}  // namespace pricesuggest
