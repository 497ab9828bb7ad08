#pragma once

// The qualification classifier and the price regressor. Both heads share one
// architecture (embedding -> attention fusion -> relu stack -> one unit) and
// never share parameter values. The classifier ends in a sigmoid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pricesuggest/error.hpp"
#include "pricesuggest/features.hpp"
#include "pricesuggest/item.hpp"
#include "pricesuggest/numeric.hpp"
#include "pricesuggest/objectives.hpp"
#include "pricesuggest/types.hpp"

namespace pricesuggest {

enum class HeadKind { regression, classification };

inline std::string_view to_string(HeadKind k) { return k == HeadKind::regression ? "regression" : "classification"; }

struct HeadConfig {
  std::size_t visual_dim = 64;
  std::size_t vocab_size = 1000;
  std::size_t embed_dim = 8;
  std::vector<std::size_t> hidden_sizes{128, 64};
  Ablation ablation = Ablation::none;

  [[nodiscard]] std::size_t text_dim() const { return kTokenLength * embed_dim; }
  [[nodiscard]] std::size_t mlp_input_dim() const { return visual_dim + text_dim() + kStatDim; }

  void validate() const {
    if (visual_dim == 0 || vocab_size < 2 || embed_dim == 0)
      throw ConfigError("head config: visual_dim, vocab_size and embed_dim must be positive (vocab >= 2)");
    for (std::size_t h : hidden_sizes)
      if (h == 0) throw ConfigError("head config: hidden sizes must be positive");
  }

  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

/// Parameters of one head. Also used, zero-initialized, as its gradient.
struct HeadParams {
  HeadKind kind = HeadKind::regression;
  HeadConfig config;
  EmbeddingTable embedding;
  FusionLayer fusion;
  std::vector<DenseLayer> hidden;
  DenseLayer output;

  static HeadParams zeros(const HeadConfig& cfg, HeadKind kind) {
    cfg.validate();
    HeadParams h;
    h.kind = kind;
    h.config = cfg;
    h.embedding = EmbeddingTable(cfg.vocab_size, cfg.embed_dim);
    h.fusion = FusionLayer(cfg.visual_dim, cfg.text_dim());
    std::size_t in = cfg.mlp_input_dim();
    for (std::size_t width : cfg.hidden_sizes) {
      h.hidden.emplace_back(in, width);
      in = width;
    }
    h.output = DenseLayer(in, 1);
    return h;
  }

  /// Glorot-uniform dense layers, embeddings uniform in +-0.05 with a zero
  /// padding row, zero biases.
  template <class Rng>
  static HeadParams initialize(const HeadConfig& cfg, HeadKind kind, Rng& rng) {
    HeadParams h = zeros(cfg, kind);
    h.embedding.init_uniform(rng);
    h.fusion.projection.init_glorot(rng);
    for (DenseLayer& layer : h.hidden) layer.init_glorot(rng);
    h.output.init_glorot(rng);
    return h;
  }

  /// Visits every parameter block as (name, contiguous storage), in a fixed order.
  template <class F>
  void for_each_block(F&& f) {
    f("embedding", std::span<double>(embedding.table.data(), static_cast<std::size_t>(embedding.table.size())));
    visit_dense("fusion", fusion.projection, f);
    for (std::size_t k = 0; k < hidden.size(); ++k) visit_dense("hidden" + std::to_string(k), hidden[k], f);
    visit_dense("output", output, f);
  }

  template <class F>
  void for_each_block(F&& f) const {
    const_cast<HeadParams*>(this)->for_each_block([&](const std::string& name, std::span<double> block) {
      f(name, std::span<const double>(block.data(), block.size()));
    });
  }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_block([&](const std::string&, std::span<const double> b) { n += b.size(); });
    return n;
  }

  [[nodiscard]] bool all_finite() const {
    bool ok = true;
    for_each_block([&](const std::string&, std::span<const double> b) {
      for (double v : b) ok = ok && std::isfinite(v);
    });
    return ok;
  }

  /// All parameters flattened in block order.
  [[nodiscard]] std::vector<double> flatten() const {
    std::vector<double> out;
    for_each_block([&](const std::string&, std::span<const double> b) { out.insert(out.end(), b.begin(), b.end()); });
    return out;
  }

  void unflatten(std::span<const double> values) {
    std::size_t offset = 0;
    for_each_block([&](const std::string& name, std::span<double> b) {
      detail::require_dims(offset + b.size() <= values.size(), "unflatten: too few values for block " + name);
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), b.size(), b.begin());
      offset += b.size();
    });
    detail::require_dims(offset == values.size(), "unflatten: too many values");
  }

 private:
  template <class F>
  static void visit_dense(const std::string& prefix, DenseLayer& layer, F& f) {
    f(prefix + ".weights", std::span<double>(layer.weights.data(), static_cast<std::size_t>(layer.weights.size())));
    f(prefix + ".bias", std::span<double>(layer.bias.data(), static_cast<std::size_t>(layer.bias.size())));
  }
};

// ---------------------------------------------------------------------------
// Batched inputs

/// Model-visible inputs for a batch of items, one item per column.
struct FeatureBatch {
  Matrix visual;                    // [visual_dim x B]
  std::vector<TokenVector> tokens;  // B entries
  Matrix stats;                     // [16 x B], standardized

  [[nodiscard]] std::size_t size() const { return tokens.size(); }
};

/// Statistics fitted on a training corpus; turns item records into batches.
struct FeatureEncoder {
  StatisticsTable statistics;
  Standardizer standardizer;

  static FeatureEncoder fit(std::span<const ItemRecord> train) {
    FeatureEncoder e;
    e.statistics = compute_statistical_features(train);
    e.standardizer = Standardizer::fit(train, e.statistics);
    return e;
  }

  [[nodiscard]] Vector standardized_stats(const ItemRecord& r) const {
    return standardizer.apply(statistics.features_for(r.category));
  }

  /// Only the visual vector, tokens and category of each record are read.
  [[nodiscard]] FeatureBatch encode(std::span<const ItemRecord> items, std::span<const std::size_t> indices,
                                    std::size_t visual_dim) const {
    FeatureBatch b;
    const auto n = static_cast<Eigen::Index>(indices.size());
    b.visual.resize(static_cast<Eigen::Index>(visual_dim), n);
    b.stats.resize(static_cast<Eigen::Index>(kStatDim), n);
    b.tokens.reserve(indices.size());
    for (Eigen::Index c = 0; c < n; ++c) {
      const ItemRecord& r = items[indices[static_cast<std::size_t>(c)]];
      detail::require_dims(static_cast<std::size_t>(r.visual.size()) == visual_dim,
                           "item '" + r.id + "': visual has " + std::to_string(r.visual.size()) +
                               " entries, model expects " + std::to_string(visual_dim));
      b.visual.col(c) = r.visual;
      b.tokens.push_back(r.tokens);
      b.stats.col(c) = standardized_stats(r);
    }
    return b;
  }

  [[nodiscard]] FeatureBatch encode_all(std::span<const ItemRecord> items, std::size_t visual_dim) const {
    std::vector<std::size_t> idx(items.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return encode(items, idx, visual_dim);
  }
};

// ---------------------------------------------------------------------------
// Forward / backward

struct ForwardCache {
  bool valid = false;
  std::size_t batch_size = 0;
  Matrix visual;     // after ablation, before weighting
  Matrix text;       // concatenated embeddings, after ablation
  Matrix attention;  // [2 x B]; empty when attention is skipped
  std::vector<Matrix> activations;  // mlp input, then each relu output
  std::vector<Matrix> preactivations;
  RowVector output;  // regression value or confidence
  /// Smallest |pre-activation| over the relu units, for kink detection.
  double min_abs_preactivation = std::numeric_limits<double>::infinity();
};

inline constexpr double kSigmoidFloor = 1e-12;

inline Matrix gather_embeddings(const EmbeddingTable& e, std::span<const TokenVector> tokens) {
  const auto dim = static_cast<Eigen::Index>(e.dim());
  Matrix t(static_cast<Eigen::Index>(kTokenLength) * dim, static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t b = 0; b < tokens.size(); ++b)
    for (std::size_t p = 0; p < kTokenLength; ++p) {
      const std::uint32_t id = tokens[b].ids[p];
      detail::require_dims(id < e.vocab_size(), "token id outside the embedding table");
      auto slot = t.block(static_cast<Eigen::Index>(p) * dim, static_cast<Eigen::Index>(b), dim, 1);
      if (id == 0)
        slot.setZero();
      else
        slot = e.table.row(id).transpose();
    }
  return t;
}

/// Head outputs for every column of `batch`; fills `cache` for backward when given.
inline RowVector head_forward(const HeadParams& head, const FeatureBatch& batch, ForwardCache* cache = nullptr) {
  const HeadConfig& cfg = head.config;
  const auto vd = static_cast<Eigen::Index>(cfg.visual_dim);
  const auto td = static_cast<Eigen::Index>(cfg.text_dim());
  const auto n = static_cast<Eigen::Index>(batch.size());
  detail::require_dims(batch.visual.rows() == vd && batch.visual.cols() == n,
                       "head_forward: visual block is " + std::to_string(batch.visual.rows()) + "x" +
                           std::to_string(batch.visual.cols()) + ", expected " + std::to_string(vd) + "x" +
                           std::to_string(n));
  detail::require_dims(batch.stats.rows() == static_cast<Eigen::Index>(kStatDim) && batch.stats.cols() == n,
                       "head_forward: statistical block has the wrong shape");

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.batch_size = batch.size();
  c.visual = batch.visual;
  c.text = gather_embeddings(head.embedding, batch.tokens);
  if (cfg.ablation == Ablation::no_image) c.visual.setZero();
  if (cfg.ablation == Ablation::no_text) c.text.setZero();

  Matrix input(static_cast<Eigen::Index>(cfg.mlp_input_dim()), n);
  if (cfg.ablation == Ablation::no_attention) {
    input.topRows(vd) = c.visual;
    input.middleRows(vd, td) = c.text;
  } else {
    const Matrix& w = head.fusion.projection.weights;
    Matrix logits = w.leftCols(vd) * c.visual;
    logits.noalias() += w.rightCols(td) * c.text;
    logits.colwise() += head.fusion.projection.bias;
    c.attention = softmax_columns(logits);
    input.topRows(vd) = c.visual * c.attention.row(0).asDiagonal();
    input.middleRows(vd, td) = c.text * c.attention.row(1).asDiagonal();
  }
  input.bottomRows(static_cast<Eigen::Index>(kStatDim)) = batch.stats;
  c.activations.push_back(std::move(input));

  for (const DenseLayer& layer : head.hidden) {
    Matrix pre = dense_forward(c.activations.back(), layer);
    if (pre.size() > 0) c.min_abs_preactivation = std::min(c.min_abs_preactivation, pre.cwiseAbs().minCoeff());
    c.activations.push_back(pre.cwiseMax(0.0));
    c.preactivations.push_back(std::move(pre));
  }
  RowVector out = dense_forward(c.activations.back(), head.output).row(0);
  if (head.kind == HeadKind::classification)
    out = out.unaryExpr([](double z) { return std::clamp(sigmoid(z), kSigmoidFloor, 1.0 - kSigmoidFloor); });
  if (!out.allFinite())
    throw NonFiniteError(std::string("head_forward: non-finite ") + std::string(to_string(head.kind)) + " output");
  c.output = out;
  c.valid = true;
  return out;
}

/// Gradient of sum_b upstream[b] * output[b] with respect to every parameter.
inline HeadParams head_backward(const HeadParams& head, const FeatureBatch& batch, const ForwardCache& cache,
                                const RowVector& upstream) {
  if (!cache.valid) throw Error("head_backward: no forward cache; run head_forward first");
  detail::require_dims(cache.batch_size == batch.size() && static_cast<std::size_t>(upstream.size()) == batch.size(),
                       "head_backward: batch size differs from the cached forward pass");
  const HeadConfig& cfg = head.config;
  const auto vd = static_cast<Eigen::Index>(cfg.visual_dim);
  const auto td = static_cast<Eigen::Index>(cfg.text_dim());
  HeadParams g = HeadParams::zeros(cfg, head.kind);

  Matrix d_out = upstream;  // [1 x B]
  if (head.kind == HeadKind::classification)
    d_out = (upstream.array() * cache.output.array() * (1.0 - cache.output.array())).matrix();

  DenseBackwardBatch ob = dense_backward(cache.activations.back(), head.output, d_out);
  g.output.weights = std::move(ob.grad.weights);
  g.output.bias = std::move(ob.grad.bias);
  Matrix d_act = std::move(ob.grad_input);
  for (std::size_t k = head.hidden.size(); k-- > 0;) {
    const Matrix d_pre = (cache.preactivations[k].array() > 0.0).select(d_act, 0.0);
    DenseBackwardBatch hb = dense_backward(cache.activations[k], head.hidden[k], d_pre);
    g.hidden[k].weights = std::move(hb.grad.weights);
    g.hidden[k].bias = std::move(hb.grad.bias);
    d_act = std::move(hb.grad_input);
  }

  Matrix d_text;
  if (cfg.ablation == Ablation::no_attention) {
    d_text = d_act.middleRows(vd, td);
  } else {
    const auto d_vis_w = d_act.topRows(vd);
    const auto d_txt_w = d_act.middleRows(vd, td);
    // weighted block = a_k * block: product rule into both the block and a_k.
    const RowVector d_a0 = (cache.visual.array() * d_vis_w.array()).colwise().sum();
    const RowVector d_a1 = (cache.text.array() * d_txt_w.array()).colwise().sum();
    d_text = d_txt_w * cache.attention.row(1).asDiagonal();
    const RowVector inner = cache.attention.row(0).cwiseProduct(d_a0) + cache.attention.row(1).cwiseProduct(d_a1);
    Matrix d_logits(2, d_a0.size());
    d_logits.row(0) = cache.attention.row(0).cwiseProduct(d_a0 - inner);
    d_logits.row(1) = cache.attention.row(1).cwiseProduct(d_a1 - inner);
    g.fusion.projection.weights.leftCols(vd).noalias() = d_logits * cache.visual.transpose();
    g.fusion.projection.weights.rightCols(td).noalias() = d_logits * cache.text.transpose();
    g.fusion.projection.bias = d_logits.rowwise().sum();
    d_text.noalias() += head.fusion.projection.weights.rightCols(td).transpose() * d_logits;
  }
  if (cfg.ablation != Ablation::no_text) {
    for (std::size_t b = 0; b < batch.size(); ++b)
      accumulate_embedding_grad(batch.tokens[b], d_text.col(static_cast<Eigen::Index>(b)), g.embedding.table);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Optimizer over a whole head

/// One Adam state per parameter block.
struct HeadOptimizer {
  std::vector<AdamState> blocks;

  void step(HeadParams& params, const HeadParams& grads, double lr) {
    std::vector<std::span<const double>> g;
    grads.for_each_block([&](const std::string&, std::span<const double> b) { g.push_back(b); });
    if (blocks.empty()) blocks.resize(g.size());
    detail::require_dims(blocks.size() == g.size(), "HeadOptimizer: block count changed");
    std::size_t k = 0;
    params.for_each_block([&](const std::string& name, std::span<double> p) {
      adam_step(p, g[k], blocks[k], lr, std::string(to_string(params.kind)) + "." + name);
      ++k;
    });
  }
};

// ---------------------------------------------------------------------------
// Complete model

struct PriceModel {
  HeadConfig config;
  HeadParams classifier;
  HeadParams regressor;
  FeatureEncoder encoder;
  ConstraintConfig constraint;
  RangeLossParams range;
  /// "joint" or "baseline".
  std::string training_scheme = "joint";

  [[nodiscard]] std::vector<PredictionOutcome> predict(std::span<const ItemRecord> items,
                                                       std::size_t chunk = 2048) const {
    std::vector<PredictionOutcome> out(items.size());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < items.size(); start += chunk) {
      const std::size_t end = std::min(items.size(), start + chunk);
      idx.resize(end - start);
      for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
      const FeatureBatch b = encoder.encode(items, idx, config.visual_dim);
      const RowVector conf = head_forward(classifier, b);
      const RowVector price = head_forward(regressor, b);
      for (std::size_t i = start; i < end; ++i) {
        const auto c = static_cast<Eigen::Index>(i - start);
        out[i].confidence = conf[c];
        out[i].suggested_log_price = price[c];
        out[i].hard_label = hard_indicator(conf[c]) == 1 ? HardLabel::positive : HardLabel::negative;
      }
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Persistence (structured JSON, doubles written round-trip exact)

inline constexpr int kModelLayoutVersion = 1;

namespace detail {

inline nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  nlohmann::ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = std::move(data);
  return j;
}

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  const auto r = j.at("rows").get<Eigen::Index>();
  const auto c = j.at("cols").get<Eigen::Index>();
  if (r != rows || c != cols)
    throw DimensionError("model block '" + name + "' is " + std::to_string(r) + "x" + std::to_string(c) +
                         ", architecture expects " + std::to_string(rows) + "x" + std::to_string(cols));
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw FormatError("model block '" + name + "' has " + std::to_string(data.size()) + " values");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index jj = 0; jj < cols; ++jj) m(i, jj) = data[k++].get<double>();
  return m;
}

inline nlohmann::ordered_json head_to_json(const HeadParams& h) {
  nlohmann::ordered_json j;
  j["embedding"] = matrix_to_json(h.embedding.table);
  j["fusion.weights"] = matrix_to_json(h.fusion.projection.weights);
  j["fusion.bias"] = matrix_to_json(h.fusion.projection.bias);
  for (std::size_t k = 0; k < h.hidden.size(); ++k) {
    j["hidden" + std::to_string(k) + ".weights"] = matrix_to_json(h.hidden[k].weights);
    j["hidden" + std::to_string(k) + ".bias"] = matrix_to_json(h.hidden[k].bias);
  }
  j["output.weights"] = matrix_to_json(h.output.weights);
  j["output.bias"] = matrix_to_json(h.output.bias);
  return j;
}

inline void dense_from_json(const nlohmann::json& j, const std::string& name, DenseLayer& layer) {
  layer.weights = matrix_from_json(j.at(name + ".weights"), layer.weights.rows(), layer.weights.cols(), name + ".weights");
  layer.bias = matrix_from_json(j.at(name + ".bias"), layer.bias.size(), 1, name + ".bias");
}

inline HeadParams head_from_json(const nlohmann::json& j, const HeadConfig& cfg, HeadKind kind) {
  HeadParams h = HeadParams::zeros(cfg, kind);
  h.embedding.table = matrix_from_json(j.at("embedding"), h.embedding.table.rows(), h.embedding.table.cols(), "embedding");
  dense_from_json(j, "fusion", h.fusion.projection);
  for (std::size_t k = 0; k < h.hidden.size(); ++k) dense_from_json(j, "hidden" + std::to_string(k), h.hidden[k]);
  dense_from_json(j, "output", h.output);
  return h;
}

inline nlohmann::ordered_json summary_to_json(const PriceSummary& s) { return {s.q1, s.q2, s.q3, s.mean}; }

inline PriceSummary summary_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw FormatError("price summary must have 4 entries");
  return {v[0], v[1], v[2], v[3]};
}

inline nlohmann::ordered_json block_to_json(const StatsBlock& b) {
  nlohmann::ordered_json j;
  j["sold"] = summary_to_json(b.sold);
  j["unsold"] = summary_to_json(b.unsold);
  j["sold_fallback"] = b.sold_fallback;
  j["unsold_fallback"] = b.unsold_fallback;
  return j;
}

inline StatsBlock block_from_json(const nlohmann::json& j) {
  StatsBlock b;
  b.sold = summary_from_json(j.at("sold"));
  b.unsold = summary_from_json(j.at("unsold"));
  b.sold_fallback = j.at("sold_fallback").get<bool>();
  b.unsold_fallback = j.at("unsold_fallback").get<bool>();
  return b;
}

}  // namespace detail

inline nlohmann::ordered_json architecture_to_json(const HeadConfig& c) {
  nlohmann::ordered_json j;
  j["visual_dim"] = c.visual_dim;
  j["vocab_size"] = c.vocab_size;
  j["embed_dim"] = c.embed_dim;
  j["token_length"] = kTokenLength;
  j["stat_dim"] = kStatDim;
  j["hidden_sizes"] = c.hidden_sizes;
  j["ablation"] = std::string(to_string(c.ablation));
  return j;
}

inline std::string model_to_string(const PriceModel& m) {
  nlohmann::ordered_json j;
  j["format"] = "pricesuggest-model";
  j["layout_version"] = kModelLayoutVersion;
  j["architecture"] = architecture_to_json(m.config);
  nlohmann::ordered_json t;
  t["scheme"] = m.training_scheme;
  t["constraint_mode"] = std::string(to_string(m.constraint.mode));
  t["delta"] = m.constraint.delta;
  t["beta"] = m.constraint.beta;
  t["epsilon"] = m.constraint.epsilon;
  t["gamma"] = m.constraint.gamma;
  t["mu"] = m.range.mu;
  t["nu"] = m.range.nu;
  t["range_mode"] = std::string(to_string(m.range.mode));
  j["training"] = std::move(t);
  nlohmann::ordered_json f;
  f["standardizer_mean"] = m.encoder.standardizer.mean;
  f["standardizer_scale"] = m.encoder.standardizer.scale;
  f["global"] = detail::block_to_json(m.encoder.statistics.global);
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (const auto& [name, block] : m.encoder.statistics.per_category) cats[name] = detail::block_to_json(block);
  f["categories"] = std::move(cats);
  j["features"] = std::move(f);
  j["classifier"] = detail::head_to_json(m.classifier);
  j["regressor"] = detail::head_to_json(m.regressor);
  return j.dump() + "\n";
}

inline void save_model(const PriceModel& m, const std::string& path) {
  const std::string text = model_to_string(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("write to '" + path + "' failed");
}

/// Parses a model file. When `expected` is given, the stored architecture must match it.
inline PriceModel model_from_string(const std::string& text, const std::optional<HeadConfig>& expected = std::nullopt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("model file is not valid JSON (truncated?): ") + e.what());
  }
  try {
    if (j.value("format", std::string{}) != "pricesuggest-model") throw FormatError("not a pricesuggest model file");
    const int version = j.at("layout_version").get<int>();
    if (version != kModelLayoutVersion)
      throw FormatError("unsupported model layout_version " + std::to_string(version) + " (this build reads " +
                        std::to_string(kModelLayoutVersion) + ")");
    const auto& a = j.at("architecture");
    PriceModel m;
    m.config.visual_dim = a.at("visual_dim").get<std::size_t>();
    m.config.vocab_size = a.at("vocab_size").get<std::size_t>();
    m.config.embed_dim = a.at("embed_dim").get<std::size_t>();
    m.config.hidden_sizes = a.at("hidden_sizes").get<std::vector<std::size_t>>();
    m.config.ablation = parse_ablation(a.at("ablation").get<std::string>());
    if (a.at("token_length").get<std::size_t>() != kTokenLength || a.at("stat_dim").get<std::size_t>() != kStatDim)
      throw DimensionError("model token_length/stat_dim differ from this build (32/16)");
    if (expected && !(*expected == m.config)) {
      throw DimensionError("model architecture mismatch: file has " + architecture_to_json(m.config).dump() +
                           ", expected " + architecture_to_json(*expected).dump());
    }
    m.config.validate();
    const auto& t = j.at("training");
    m.training_scheme = t.at("scheme").get<std::string>();
    m.constraint.mode = parse_constraint_mode(t.at("constraint_mode").get<std::string>());
    m.constraint.delta = t.at("delta").get<double>();
    m.constraint.beta = t.at("beta").get<double>();
    m.constraint.epsilon = t.at("epsilon").get<double>();
    m.constraint.gamma = t.at("gamma").get<double>();
    m.range.mu = t.at("mu").get<double>();
    m.range.nu = t.at("nu").get<double>();
    m.range.mode = parse_range_mode(t.at("range_mode").get<std::string>());
    const auto& f = j.at("features");
    m.encoder.standardizer.mean = f.at("standardizer_mean").get<std::array<double, kStatDim>>();
    m.encoder.standardizer.scale = f.at("standardizer_scale").get<std::array<double, kStatDim>>();
    m.encoder.statistics.global = detail::block_from_json(f.at("global"));
    for (const auto& [name, block] : f.at("categories").items())
      m.encoder.statistics.per_category.emplace(name, detail::block_from_json(block));
    m.classifier = detail::head_from_json(j.at("classifier"), m.config, HeadKind::classification);
    m.regressor = detail::head_from_json(j.at("regressor"), m.config, HeadKind::regression);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

inline PriceModel load_model(const std::string& path, const std::optional<HeadConfig>& expected = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_string(ss.str(), expected);
}

}  // namespace pricesuggest
