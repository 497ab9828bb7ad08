#pragma once

// Item datasets: log-price transform, synthetic marketplace generator,
// line-delimited JSON persistence and train/validation/test splitting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pricesuggest/error.hpp"
#include "pricesuggest/item.hpp"
#include "pricesuggest/numeric.hpp"
#include "pricesuggest/types.hpp"

namespace pricesuggest {

inline double log_transform(double price) {
  if (!(price > 0.0) || !std::isfinite(price))
    throw Error("log_transform: price must be positive and finite, got " + std::to_string(price));
  return std::log(price);
}

inline double inverse_log_transform(double log_price) { return std::exp(log_price); }

/// Population skewness m3 / m2^(3/2).
inline double skewness(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  return m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

// ---------------------------------------------------------------------------
// Synthetic marketplace

/// Each item has a latent attribute vector z and a value
/// v = category offset + weights . z. Qualified listings expose z through
/// tokens (attribute dims [0, 6)) and the visual vector (dims [4, 8)).
/// Unqualified listings carry uninformative noise in both: each reuses one of
/// a fixed set of placeholder images and boilerplate descriptions drawn once
/// per dataset, so their features say nothing about the item. A share of
/// qualified listings comes with a degraded (noise plus illumination shift)
/// image but informative text. Sold items are priced at v plus category
/// noise; unsold items are listed above v by a ratio centred on
/// `overprice_ratio`.
struct SyntheticConfig {
  std::size_t n_items = 20000;
  std::size_t vocab_size = 1000;
  std::size_t visual_dim = 64;
  std::size_t n_categories = 10;
  double sold_fraction = 0.68;
  double unqualified_fraction = 0.4;
  double noise_scale_qualified = 0.1;
  double noise_scale_unqualified = 1.0;
  std::uint64_t seed = 7;

  // Shape of the latent price model.
  double value_scale = 0.6;  // std of weights . z
  double degraded_image_fraction = 0.3;
  double overprice_ratio = 1.2;
  double price_noise_min = 0.03;  // per-category std of the price noise
  double price_noise_max = 0.3;
  double category_offset_min = 2.5;
  double category_offset_max = 5.5;
  // Unqualified listings reuse one of this many placeholder image/description pairs.
  std::size_t unqualified_templates = 64;

  void validate() const {
    if (n_items == 0) throw ConfigError("synthetic.n_items must be positive");
    if (visual_dim < 4) throw ConfigError("synthetic.visual_dim must be at least 4");
    if (n_categories == 0) throw ConfigError("synthetic.n_categories must be positive");
    if (!(sold_fraction > 0.0 && sold_fraction < 1.0)) throw ConfigError("synthetic.sold_fraction must lie in (0, 1)");
    if (!(unqualified_fraction > 0.0 && unqualified_fraction < 1.0))
      throw ConfigError("synthetic.unqualified_fraction must lie in (0, 1)");
    if (!(noise_scale_unqualified > noise_scale_qualified) || noise_scale_qualified < 0.0)
      throw ConfigError("synthetic.noise_scale_unqualified must exceed noise_scale_qualified");
    if (!(degraded_image_fraction >= 0.0 && degraded_image_fraction < 1.0))
      throw ConfigError("synthetic.degraded_image_fraction must lie in [0, 1)");
    if (!(overprice_ratio > 1.0)) throw ConfigError("synthetic.overprice_ratio must exceed 1");
    if (!(price_noise_min >= 0.0 && price_noise_max >= price_noise_min))
      throw ConfigError("synthetic.price_noise_min/max must be ordered and nonnegative");
    if (!(category_offset_max >= category_offset_min)) throw ConfigError("synthetic.category offsets must be ordered");
    if (unqualified_templates == 0) throw ConfigError("synthetic.unqualified_templates must be positive");
    if (vocab_size < min_vocab_size()) throw ConfigError("synthetic.vocab_size must be at least " + std::to_string(min_vocab_size()));
  }

  static constexpr std::size_t kLatentDim = 8;
  static constexpr std::size_t kTextDims = 6;  // latent dims [0, 6) are written into tokens
  static constexpr std::size_t kVisualFirstDim = 4;  // latent dims [4, 8) shape the image vector
  static constexpr std::size_t kBins = 12;
  static constexpr double kBinRange = 2.4;

  [[nodiscard]] std::size_t attribute_token_base() const { return 1 + n_categories; }
  [[nodiscard]] std::size_t filler_token_base() const { return attribute_token_base() + kTextDims * kBins; }
  [[nodiscard]] std::size_t min_vocab_size() const { return filler_token_base() + 16; }
};

/// Parameters the generator drew; the ground truth behind a dataset.
struct GeneratorTruth {
  std::vector<double> category_offset;
  std::vector<double> category_price_noise;
  std::vector<double> value_weights;  // [kLatentDim]
  Matrix visual_projection;           // [visual_dim x 4]
};

struct SyntheticDataset {
  std::vector<ItemRecord> items;
  GeneratorTruth truth;
};

inline std::string category_name(std::size_t c) {
  std::ostringstream os;
  os << "cat" << std::setw(2) << std::setfill('0') << c;
  return os.str();
}

inline SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  constexpr std::size_t K = SyntheticConfig::kLatentDim;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticDataset out;
  GeneratorTruth& truth = out.truth;
  for (std::size_t c = 0; c < cfg.n_categories; ++c) {
    truth.category_offset.push_back(cfg.category_offset_min +
                                    (cfg.category_offset_max - cfg.category_offset_min) * unit(rng));
    const double t = cfg.n_categories == 1 ? 0.0 : static_cast<double>(c) / static_cast<double>(cfg.n_categories - 1);
    truth.category_price_noise.push_back(cfg.price_noise_min + (cfg.price_noise_max - cfg.price_noise_min) * t);
  }
  // Text-only dims carry 60% of the value variance, shared dims 25%, image-only 15%.
  const double share[K] = {0.15, 0.15, 0.15, 0.15, 0.125, 0.125, 0.075, 0.075};
  for (std::size_t k = 0; k < K; ++k) {
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    truth.value_weights.push_back(sign * cfg.value_scale * std::sqrt(share[k]));
  }
  const auto vd = static_cast<Eigen::Index>(cfg.visual_dim);
  truth.visual_projection = Matrix(vd, 4);
  for (Eigen::Index c = 0; c < 4; ++c)
    for (Eigen::Index r = 0; r < vd; ++r) truth.visual_projection(r, c) = 0.5 * normal(rng);

  const std::size_t attr_base = cfg.attribute_token_base();
  const std::size_t filler_base = cfg.filler_token_base();
  std::uniform_int_distribution<std::size_t> category_dist(0, cfg.n_categories - 1);
  std::uniform_int_distribution<std::size_t> filler_id(filler_base, cfg.vocab_size - 1);
  std::uniform_int_distribution<std::size_t> any_id(1, cfg.vocab_size - 1);
  std::uniform_int_distribution<std::size_t> filler_len(0, 14);
  std::uniform_int_distribution<std::size_t> junk_len(4, 24);
  const double bin_width = 2.0 * SyntheticConfig::kBinRange / static_cast<double>(SyntheticConfig::kBins);

  std::vector<Vector> template_visual;
  std::vector<std::vector<std::int64_t>> template_tokens;
  for (std::size_t t = 0; t < cfg.unqualified_templates; ++t) {
    Vector v(vd);
    for (Eigen::Index r = 0; r < vd; ++r) v[r] = cfg.noise_scale_unqualified * normal(rng);
    template_visual.push_back(std::move(v));
    std::vector<std::int64_t> ids(junk_len(rng));
    for (auto& id : ids) id = static_cast<std::int64_t>(any_id(rng));
    template_tokens.push_back(std::move(ids));
  }
  std::uniform_int_distribution<std::size_t> template_pick(0, cfg.unqualified_templates - 1);
  out.items.reserve(cfg.n_items);
  for (std::size_t i = 0; i < cfg.n_items; ++i) {
    ItemRecord item;
    item.id = "item-" + std::to_string(i);
    const std::size_t c = category_dist(rng);
    item.category = category_name(c);
    double z[K];
    double value = truth.category_offset[c];
    for (std::size_t k = 0; k < K; ++k) {
      z[k] = normal(rng);
      value += truth.value_weights[k] * z[k];
    }
    value = std::max(value, 0.5);

    const bool qualified = unit(rng) >= cfg.unqualified_fraction;
    item.quality_hint = qualified ? Quality::qualified : Quality::unqualified;
    item.visual = Vector(vd);
    std::vector<std::int64_t> tokens;
    if (qualified) {
      const bool degraded_image = unit(rng) < cfg.degraded_image_fraction;
      if (degraded_image) {
        for (Eigen::Index r = 0; r < vd; ++r) item.visual[r] = 1.5 + cfg.noise_scale_unqualified * normal(rng);
      } else {
        Eigen::Vector4d zv(z[4], z[5], z[6], z[7]);
        item.visual = truth.visual_projection * zv;
        for (Eigen::Index r = 0; r < vd; ++r) item.visual[r] += cfg.noise_scale_qualified * normal(rng);
      }
      tokens.push_back(static_cast<std::int64_t>(1 + c));
      for (std::size_t k = 0; k < SyntheticConfig::kTextDims; ++k) {
        const double noisy = z[k] + cfg.noise_scale_qualified * normal(rng);
        const double pos = (noisy + SyntheticConfig::kBinRange) / bin_width;
        const auto bin = static_cast<std::size_t>(
            std::clamp(std::floor(pos), 0.0, static_cast<double>(SyntheticConfig::kBins - 1)));
        tokens.push_back(static_cast<std::int64_t>(attr_base + k * SyntheticConfig::kBins + bin));
      }
      const std::size_t nf = filler_len(rng);
      for (std::size_t f = 0; f < nf; ++f) tokens.push_back(static_cast<std::int64_t>(filler_id(rng)));
    } else {
      const std::size_t t = template_pick(rng);
      item.visual = template_visual[t];
      tokens = template_tokens[t];
    }
    item.tokens = pad_or_truncate(tokens, cfg.vocab_size);

    const bool sold = unit(rng) < cfg.sold_fraction;
    item.status = sold ? SaleStatus::sold : SaleStatus::unsold;
    const double noise = truth.category_price_noise[c] * normal(rng);
    item.log_price = sold ? value + noise : value + std::log(cfg.overprice_ratio) + 0.03 * normal(rng) + noise;
    out.items.push_back(std::move(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: a header line followed by one JSON object per item.

inline constexpr int kDatasetSchemaVersion = 1;

struct DatasetHeader {
  std::size_t visual_dim = 0;
  std::size_t vocab_size = 0;
};

inline nlohmann::ordered_json item_to_json(const ItemRecord& r, bool include_hint) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["category"] = r.category;
  j["visual"] = std::vector<double>(r.visual.data(), r.visual.data() + r.visual.size());
  std::vector<std::uint32_t> tokens(r.tokens.ids.begin(), r.tokens.ids.begin() + static_cast<std::ptrdiff_t>(r.tokens.used_length()));
  j["tokens"] = tokens;
  j["status"] = std::string(to_string(r.status));
  j["log_price"] = r.log_price;
  if (include_hint && r.quality_hint) j["quality_hint"] = std::string(to_string(*r.quality_hint));
  return j;
}

/// Writes items; the generator's quality hints are dropped unless
/// `include_hints` is set.
inline void save_dataset(std::span<const ItemRecord> items, const std::string& path, std::size_t vocab_size,
                         bool include_hints = false) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  nlohmann::ordered_json header;
  header["format"] = "pricesuggest-items";
  header["schema_version"] = kDatasetSchemaVersion;
  header["visual_dim"] = items.empty() ? 0 : items.front().visual.size();
  header["vocab_size"] = vocab_size;
  out << header.dump() << '\n';
  for (const ItemRecord& r : items) out << item_to_json(r, include_hints).dump() << '\n';
  if (!out) throw Error("write to '" + path + "' failed");
}

struct LoadedDataset {
  std::vector<ItemRecord> items;
  DatasetHeader header;
};

inline LoadedDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset '" + path + "'");
  LoadedDataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!have_header) {
      if (!j.is_object() || !j.contains("schema_version"))
        throw FormatError(where + "missing dataset header with schema_version");
      if (j.at("schema_version") != kDatasetSchemaVersion)
        throw FormatError(where + "unsupported dataset schema_version " + j.at("schema_version").dump());
      ds.header.visual_dim = j.value("visual_dim", std::size_t{0});
      ds.header.vocab_size = j.value("vocab_size", std::size_t{0});
      have_header = true;
      continue;
    }
    try {
      ItemRecord r;
      r.id = j.at("id").get<std::string>();
      r.category = j.at("category").get<std::string>();
      const auto visual = j.at("visual").get<std::vector<double>>();
      if (ds.header.visual_dim != 0 && visual.size() != ds.header.visual_dim)
        throw FormatError("visual has " + std::to_string(visual.size()) + " entries, header declares " +
                          std::to_string(ds.header.visual_dim));
      r.visual = Eigen::Map<const Vector>(visual.data(), static_cast<Eigen::Index>(visual.size()));
      const auto tokens = j.at("tokens").get<std::vector<std::int64_t>>();
      if (tokens.size() > kTokenLength) throw FormatError("more than 32 tokens");
      const std::size_t vocab = ds.header.vocab_size == 0 ? std::numeric_limits<std::uint32_t>::max() : ds.header.vocab_size;
      r.tokens = pad_or_truncate(tokens, vocab);
      r.status = parse_sale_status(j.at("status").get<std::string>());
      r.log_price = j.at("log_price").get<double>();
      if (!std::isfinite(r.log_price)) throw FormatError("log_price is not finite");
      if (j.contains("quality_hint")) r.quality_hint = parse_quality(j.at("quality_hint").get<std::string>());
      ds.items.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + e.what());
    } catch (const Error& e) {
      throw FormatError(where + e.what());
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitFractions {
  double train = 0.78;
  double validation = 0.04;
  double test = 0.18;
};

struct DatasetSplit {
  std::vector<ItemRecord> train;
  std::vector<ItemRecord> validation;
  std::vector<ItemRecord> test;
};

/// Seeded shuffle, then contiguous train / validation / test slices.
inline DatasetSplit split_dataset(std::span<const ItemRecord> items, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0.0 || f.validation < 0.0 || f.test < 0.0 ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must be nonnegative and sum to 1");
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(items.size());
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * n));
  const auto n_val = std::min(items.size() - n_train, static_cast<std::size_t>(std::llround(f.validation * n)));
  DatasetSplit s;
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& dst = k < n_train ? s.train : (k < n_train + n_val ? s.validation : s.test);
    dst.push_back(items[order[k]]);
  }
  return s;
}

}  // namespace pricesuggest
