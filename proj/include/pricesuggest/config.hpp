#pragma once

// JSON config files for the command-line pipeline. Every section is optional;
// absent fields keep their defaults and unknown fields are rejected by name.
//
// {
//   "synthetic": { "n_items": 20000, "seed": 7, ... },
//   "split":     { "train": 0.78, "validation": 0.04, "test": 0.18, "seed": 1 },
//   "training":  { "scheme": "joint", "constraint": { "mode": "percentile", "delta": 0.6, ... },
//                  "range": { "mu": 1.2, "nu": 0.8333, "mode": "multiplicative-log" }, ... },
//   "sweep":     { "kind": "percentile", "values": [0.4, 0.5], "selection_grid": [0.1, 1] }
// }

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pricesuggest/dataset.hpp"
#include "pricesuggest/error.hpp"
#include "pricesuggest/trainer.hpp"

namespace pricesuggest {

enum class TrainingScheme { joint, baseline };

inline std::string_view to_string(TrainingScheme s) { return s == TrainingScheme::joint ? "joint" : "baseline"; }

inline TrainingScheme parse_training_scheme(std::string_view s) {
  if (s == "joint") return TrainingScheme::joint;
  if (s == "baseline") return TrainingScheme::baseline;
  throw ConfigError("unknown training scheme '" + std::string(s) + "'");
}

struct SplitConfig {
  SplitFractions fractions;
  std::uint64_t seed = 1;
};

struct PipelineConfig {
  SyntheticConfig synthetic;
  SplitConfig split;
  TrainingConfig training;
  TrainingScheme scheme = TrainingScheme::joint;
  SweepConfig sweep;

  void validate() const {
    synthetic.validate();
    training.validate();
    const auto& f = split.fractions;
    if (f.train < 0.0 || f.validation < 0.0 || f.test < 0.0 || std::abs(f.train + f.validation + f.test - 1.0) > 1e-9)
      throw ConfigError("split fractions must be nonnegative and sum to 1");
  }
};

namespace detail {

/// Reads fields out of one JSON object and reports leftovers.
class SectionReader {
 public:
  SectionReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path_ + "." + key + " has the wrong type");
    }
  }

  template <class T, class Parse>
  void read_enum(const char* key, T& out, Parse parse) {
    std::string s;
    bool present = j_.contains(key);
    read(key, s);
    if (!present) return;
    try {
      out = parse(s);
    } catch (const ConfigError& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  [[nodiscard]] bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  [[nodiscard]] SectionReader section(const char* key) {
    seen_.insert(key);
    return SectionReader(j_.at(key), path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config field " + path_ + "." + k);
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

}  // namespace detail

inline void read_config(detail::SectionReader r, SyntheticConfig& c) {
  r.read("n_items", c.n_items);
  r.read("vocab_size", c.vocab_size);
  r.read("visual_dim", c.visual_dim);
  r.read("n_categories", c.n_categories);
  r.read("sold_fraction", c.sold_fraction);
  r.read("unqualified_fraction", c.unqualified_fraction);
  r.read("noise_scale_qualified", c.noise_scale_qualified);
  r.read("noise_scale_unqualified", c.noise_scale_unqualified);
  r.read("seed", c.seed);
  r.read("value_scale", c.value_scale);
  r.read("degraded_image_fraction", c.degraded_image_fraction);
  r.read("overprice_ratio", c.overprice_ratio);
  r.read("price_noise_min", c.price_noise_min);
  r.read("price_noise_max", c.price_noise_max);
  r.read("category_offset_min", c.category_offset_min);
  r.read("category_offset_max", c.category_offset_max);
  r.read("unqualified_templates", c.unqualified_templates);
  r.finish();
}

inline void read_config(detail::SectionReader r, SplitConfig& c) {
  r.read("train", c.fractions.train);
  r.read("validation", c.fractions.validation);
  r.read("test", c.fractions.test);
  r.read("seed", c.seed);
  r.finish();
}

inline void read_config(detail::SectionReader r, TrainingConfig& c, TrainingScheme& scheme) {
  r.read_enum("scheme", scheme, parse_training_scheme);
  if (r.has("constraint")) {
    auto s = r.section("constraint");
    s.read_enum("mode", c.constraint.mode, parse_constraint_mode);
    s.read("delta", c.constraint.delta);
    s.read("beta", c.constraint.beta);
    s.read("epsilon", c.constraint.epsilon);
    s.read("gamma", c.constraint.gamma);
    s.finish();
  }
  if (r.has("range")) {
    auto s = r.section("range");
    s.read("mu", c.range.mu);
    s.read("nu", c.range.nu);
    s.read_enum("mode", c.range.mode, parse_range_mode);
    s.finish();
  }
  r.read("lr_phase1", c.lr_phase1);
  r.read("lr_phase2", c.lr_phase2);
  r.read("epochs_phase1", c.epochs_phase1);
  r.read("epochs_phase2", c.epochs_phase2);
  r.read("batch_size", c.batch_size);
  r.read("seed", c.seed);
  r.read_enum("ablation", c.ablation, parse_ablation);
  r.read("hidden_sizes", c.hidden_sizes);
  r.read("embed_dim", c.embed_dim);
  r.read("visual_dim", c.visual_dim);
  r.read("vocab_size", c.vocab_size);
  r.finish();
}

inline void read_config(detail::SectionReader r, SweepConfig& c) {
  r.read_enum("kind", c.kind, parse_sweep_kind);
  r.read("values", c.values);
  r.read("selection_grid", c.selection_grid);
  r.finish();
}

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  detail::SectionReader r(j, "config");
  if (r.has("synthetic")) read_config(r.section("synthetic"), c.synthetic);
  if (r.has("split")) read_config(r.section("split"), c.split);
  if (r.has("training")) read_config(r.section("training"), c.training, c.scheme);
  if (r.has("sweep")) read_config(r.section("sweep"), c.sweep);
  r.finish();
  return c;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

inline nlohmann::ordered_json to_json(const SyntheticConfig& c) {
  nlohmann::ordered_json j;
  j["n_items"] = c.n_items;
  j["vocab_size"] = c.vocab_size;
  j["visual_dim"] = c.visual_dim;
  j["n_categories"] = c.n_categories;
  j["sold_fraction"] = c.sold_fraction;
  j["unqualified_fraction"] = c.unqualified_fraction;
  j["noise_scale_qualified"] = c.noise_scale_qualified;
  j["noise_scale_unqualified"] = c.noise_scale_unqualified;
  j["seed"] = c.seed;
  j["value_scale"] = c.value_scale;
  j["degraded_image_fraction"] = c.degraded_image_fraction;
  j["overprice_ratio"] = c.overprice_ratio;
  j["price_noise_min"] = c.price_noise_min;
  j["price_noise_max"] = c.price_noise_max;
  j["category_offset_min"] = c.category_offset_min;
  j["category_offset_max"] = c.category_offset_max;
  j["unqualified_templates"] = c.unqualified_templates;
  return j;
}

inline nlohmann::ordered_json to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["synthetic"] = to_json(c.synthetic);
  j["split"] = {{"train", c.split.fractions.train},
                {"validation", c.split.fractions.validation},
                {"test", c.split.fractions.test},
                {"seed", c.split.seed}};
  const TrainingConfig& t = c.training;
  nlohmann::ordered_json tr;
  tr["scheme"] = std::string(to_string(c.scheme));
  tr["constraint"] = {{"mode", std::string(to_string(t.constraint.mode))},
                      {"delta", t.constraint.delta},
                      {"beta", t.constraint.beta},
                      {"epsilon", t.constraint.epsilon},
                      {"gamma", t.constraint.gamma}};
  tr["range"] = {{"mu", t.range.mu}, {"nu", t.range.nu}, {"mode", std::string(to_string(t.range.mode))}};
  tr["lr_phase1"] = t.lr_phase1;
  tr["lr_phase2"] = t.lr_phase2;
  tr["epochs_phase1"] = t.epochs_phase1;
  tr["epochs_phase2"] = t.epochs_phase2;
  tr["batch_size"] = t.batch_size;
  tr["seed"] = t.seed;
  tr["ablation"] = std::string(to_string(t.ablation));
  tr["hidden_sizes"] = t.hidden_sizes;
  tr["embed_dim"] = t.embed_dim;
  tr["visual_dim"] = t.visual_dim;
  tr["vocab_size"] = t.vocab_size;
  j["training"] = std::move(tr);
  j["sweep"] = {{"kind", std::string(to_string(c.sweep.kind))},
                {"values", c.sweep.values},
                {"selection_grid", c.sweep.selection_grid}};
  return j;
}

/// Applies `section.field=value` overrides, with the value parsed as JSON
/// (bare words are taken as strings).
inline void apply_override(PipelineConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  nlohmann::json j = to_json(c);
  nlohmann::json::json_pointer ptr("/" + [&] {
    std::string p = key;
    for (char& ch : p)
      if (ch == '.') ch = '/';
    return p;
  }());
  if (!j.contains(ptr)) throw ConfigError("unknown config field config." + key);
  j[ptr] = value;
  c = pipeline_config_from_json(j);
}

}  // namespace pricesuggest
