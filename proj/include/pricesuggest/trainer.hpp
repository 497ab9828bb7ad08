#pragma once

// Joint training of the classifier and regressor, the separately trained
// baseline regressor, evaluation, and experiment sweeps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pricesuggest/error.hpp"
#include "pricesuggest/features.hpp"
#include "pricesuggest/metrics.hpp"
#include "pricesuggest/model.hpp"
#include "pricesuggest/objectives.hpp"

namespace pricesuggest {

struct TrainingConfig {
  ConstraintConfig constraint;
  RangeLossParams range;
  double lr_phase1 = 5e-4;
  double lr_phase2 = 2e-4;
  std::size_t epochs_phase1 = 60;
  std::size_t epochs_phase2 = 30;
  std::size_t batch_size = 256;
  std::uint64_t seed = 1;
  Ablation ablation = Ablation::none;
  std::vector<std::size_t> hidden_sizes{128, 64};
  std::size_t embed_dim = 8;
  std::size_t visual_dim = 64;
  std::size_t vocab_size = 1000;

  [[nodiscard]] HeadConfig head_config() const {
    HeadConfig h;
    h.visual_dim = visual_dim;
    h.vocab_size = vocab_size;
    h.embed_dim = embed_dim;
    h.hidden_sizes = hidden_sizes;
    h.ablation = ablation;
    return h;
  }

  [[nodiscard]] std::size_t total_epochs() const { return epochs_phase1 + epochs_phase2; }

  void validate() const {
    constraint.validate();
    range.validate();
    head_config().validate();
    if (!(lr_phase1 > 0.0) || !(lr_phase2 > 0.0)) throw ConfigError("learning rates must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (constraint.mode == ConstraintMode::threshold && batch_size < 2)
      throw ConfigError("batch_size must be at least 2 in threshold mode");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double objective = 0.0;
  /// Share of training items the classifier labelled positive during the epoch.
  double positive_fraction = 0.0;
  /// Mean range loss over those hard-positive items.
  double positive_regression_loss = 0.0;
  /// Mean percentile penalty or cross-entropy term.
  double constraint_term = 0.0;
  /// Threshold mode: batches in which one label class was absent.
  std::size_t dropped_class_batches = 0;
};

using TrainingHistory = std::vector<EpochRecord>;

struct TrainingResult {
  PriceModel model;
  TrainingHistory history;
};

class DivergenceError : public NonFiniteError {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch, const std::string& what)
      : NonFiniteError("training diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) +
                       ": " + what),
        epoch_(epoch),
        batch_(batch) {}
  [[nodiscard]] std::size_t epoch() const { return epoch_; }
  [[nodiscard]] std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

namespace detail {

inline FeatureBatch gather_columns(const FeatureBatch& all, std::span<const std::size_t> idx) {
  FeatureBatch b;
  const auto n = static_cast<Eigen::Index>(idx.size());
  b.visual.resize(all.visual.rows(), n);
  b.stats.resize(all.stats.rows(), n);
  b.tokens.reserve(idx.size());
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto src = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(c)]);
    b.visual.col(c) = all.visual.col(src);
    b.stats.col(c) = all.stats.col(src);
    b.tokens.push_back(all.tokens[static_cast<std::size_t>(src)]);
  }
  return b;
}

inline double median_log_price(std::span<const ItemRecord> items) {
  std::vector<double> p;
  p.reserve(items.size());
  for (const ItemRecord& r : items) p.push_back(r.log_price);
  std::sort(p.begin(), p.end());
  return quantile_linear(p, 0.5);
}

/// Shared scaffolding of joint and baseline training: initialization,
/// shuffled mini-batches and the two-phase learning-rate schedule.
/// `step` consumes one batch and returns its objective.
struct TrainingLoop {
  const TrainingConfig& cfg;
  std::span<const ItemRecord> train;
  PriceModel model;
  FeatureBatch encoded;

  TrainingLoop(const TrainingConfig& c, std::span<const ItemRecord> t) : cfg(c), train(t) {
    cfg.validate();
    if (train.empty()) throw Error("training split is empty");
    model.config = cfg.head_config();
    model.constraint = cfg.constraint;
    model.range = cfg.range;
    model.encoder = FeatureEncoder::fit(train);
    std::mt19937_64 init_rng(cfg.seed);
    model.classifier = HeadParams::initialize(model.config, HeadKind::classification, init_rng);
    model.regressor = HeadParams::initialize(model.config, HeadKind::regression, init_rng);
    // Start the price output at the typical log price instead of zero.
    model.regressor.output.bias[0] = median_log_price(train);
    encoded = model.encoder.encode_all(train, cfg.visual_dim);
  }

  template <class Step>
  TrainingHistory run(Step&& step) {
    TrainingHistory history;
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.total_epochs(); ++epoch) {
      EpochRecord rec;
      rec.epoch = epoch;
      rec.learning_rate = epoch < cfg.epochs_phase1 ? cfg.lr_phase1 : cfg.lr_phase2;
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      std::size_t batches = 0, positives = 0;
      double objective_sum = 0.0, constraint_sum = 0.0, positive_loss_sum = 0.0;
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        const std::span<const std::size_t> idx(order.data() + start, end - start);
        const FeatureBatch batch = gather_columns(encoded, idx);
        BatchStats s;
        try {
          s = step(batch, idx, rec.learning_rate);
        } catch (const NonFiniteError& e) {
          throw DivergenceError(epoch, batches, e.what());
        }
        if (!std::isfinite(s.objective)) throw DivergenceError(epoch, batches, "non-finite objective");
        objective_sum += s.objective;
        constraint_sum += s.constraint_term;
        positives += s.positives;
        positive_loss_sum += s.positive_loss_sum;
        rec.dropped_class_batches += s.dropped_class ? 1 : 0;
        ++batches;
      }
      rec.objective = objective_sum / static_cast<double>(batches);
      rec.constraint_term = constraint_sum / static_cast<double>(batches);
      rec.positive_fraction = static_cast<double>(positives) / static_cast<double>(train.size());
      rec.positive_regression_loss = positives == 0 ? 0.0 : positive_loss_sum / static_cast<double>(positives);
      history.push_back(rec);
    }
    return history;
  }

  struct BatchStats {
    double objective = 0.0;
    double constraint_term = 0.0;
    std::size_t positives = 0;
    double positive_loss_sum = 0.0;
    bool dropped_class = false;
  };
};

inline std::vector<RangeLoss> batch_range_losses(std::span<const ItemRecord> train, std::span<const std::size_t> idx,
                                                 const RowVector& price, const RangeLossParams& rp) {
  std::vector<RangeLoss> out(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const ItemRecord& r = train[idx[b]];
    out[b] = range_loss(r.status, price[static_cast<Eigen::Index>(b)], r.log_price, rp);
  }
  return out;
}

}  // namespace detail

/// Trains both heads jointly under the configured constraint. Each batch:
/// forward both heads, evaluate the joint objective, backpropagate into both
/// heads and take one Adam step per head.
inline TrainingResult train_joint(std::span<const ItemRecord> train, const TrainingConfig& cfg) {
  detail::TrainingLoop loop(cfg, train);
  loop.model.training_scheme = "joint";
  HeadOptimizer cls_opt, reg_opt;
  ForwardCache cls_cache, reg_cache;
  std::vector<double> conf, loss;
  TrainingHistory history = loop.run([&](const FeatureBatch& batch, std::span<const std::size_t> idx, double lr) {
    const RowVector c = head_forward(loop.model.classifier, batch, &cls_cache);
    const RowVector p = head_forward(loop.model.regressor, batch, &reg_cache);
    const std::vector<RangeLoss> rl = detail::batch_range_losses(train, idx, p, cfg.range);
    conf.assign(c.data(), c.data() + c.size());
    loss.resize(rl.size());
    for (std::size_t i = 0; i < rl.size(); ++i) loss[i] = rl[i].value;
    const ObjectiveResult obj = joint_objective(conf, loss, cfg.constraint);

    const auto n = static_cast<Eigen::Index>(idx.size());
    RowVector d_conf(n), d_price(n);
    detail::TrainingLoop::BatchStats s;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      d_conf[i] = obj.grad_confidence[k];
      d_price[i] = obj.grad_loss[k] * rl[k].subgradient;
      if (hard_indicator(conf[k]) == 1) {
        ++s.positives;
        s.positive_loss_sum += loss[k];
      }
    }
    const HeadParams g_cls = head_backward(loop.model.classifier, batch, cls_cache, d_conf);
    const HeadParams g_reg = head_backward(loop.model.regressor, batch, reg_cache, d_price);
    cls_opt.step(loop.model.classifier, g_cls, lr);
    reg_opt.step(loop.model.regressor, g_reg, lr);
    s.objective = obj.value;
    s.constraint_term = obj.constraint_term;
    s.dropped_class = cfg.constraint.mode == ConstraintMode::threshold && obj.dropped_class;
    return s;
  });
  return {std::move(loop.model), std::move(history)};
}

/// The regressor trained alone on the unweighted mean range loss, with the
/// joint model's architecture and schedule. The returned model's classifier
/// is its untrained initialization; pair the regressor with a jointly trained
/// classifier for comparisons.
inline TrainingResult train_baseline_regression(std::span<const ItemRecord> train, const TrainingConfig& cfg) {
  detail::TrainingLoop loop(cfg, train);
  loop.model.training_scheme = "baseline";
  HeadOptimizer reg_opt;
  ForwardCache reg_cache;
  std::vector<double> loss;
  TrainingHistory history = loop.run([&](const FeatureBatch& batch, std::span<const std::size_t> idx, double lr) {
    const RowVector p = head_forward(loop.model.regressor, batch, &reg_cache);
    const std::vector<RangeLoss> rl = detail::batch_range_losses(train, idx, p, cfg.range);
    loss.resize(rl.size());
    for (std::size_t i = 0; i < rl.size(); ++i) loss[i] = rl[i].value;
    const ObjectiveResult obj = mean_loss_objective(loss);
    RowVector d_price(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) d_price[static_cast<Eigen::Index>(i)] = obj.grad_loss[i] * rl[i].subgradient;
    const HeadParams g = head_backward(loop.model.regressor, batch, reg_cache, d_price);
    reg_opt.step(loop.model.regressor, g, lr);
    detail::TrainingLoop::BatchStats s;
    s.objective = obj.value;
    s.positives = idx.size();
    s.positive_loss_sum = obj.value * static_cast<double>(idx.size());
    return s;
  });
  return {std::move(loop.model), std::move(history)};
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  SplitReport report;
  std::vector<PredictionOutcome> predictions;
};

/// Classifies every item, predicts every price, and reports metrics per hard label.
inline Evaluation evaluate_split(const PriceModel& model, std::span<const ItemRecord> items) {
  if (items.empty()) throw Error("evaluate_split: empty dataset");
  Evaluation e;
  e.predictions = model.predict(items);
  std::vector<ItemOutcome> outcomes;
  outcomes.reserve(items.size());
  for (const ItemRecord& r : items) outcomes.push_back(r.outcome());
  e.report = split_report(e.predictions, outcomes, model.range);
  return e;
}

/// Same, with the regressor swapped for another one of identical shape.
inline Evaluation evaluate_split(const PriceModel& classifier_model, const HeadParams& regressor,
                                 std::span<const ItemRecord> items) {
  detail::require_dims(regressor.config == classifier_model.config,
                       "evaluate_split: regressor architecture differs from the model");
  PriceModel m = classifier_model;
  m.regressor = regressor;
  return evaluate_split(m, items);
}

// ---------------------------------------------------------------------------
// Hyper-parameter selection on the validation split

inline const std::vector<double>& default_selection_grid() {
  static const std::vector<double> grid{0.1, 0.5, 1.0, 2.0, 5.0};
  return grid;
}

struct SelectionCandidate {
  double value = 0.0;  // beta or gamma
  double validation_positive_fraction = 0.0;
  double validation_positive_smle = 0.0;
};

struct SelectionResult {
  double chosen = 0.0;
  std::vector<SelectionCandidate> candidates;
  TrainingResult trained;  // the run with the chosen value
};

/// Trains once per grid value and keeps one run.
///  - percentile: beta whose validation positive fraction is closest to delta.
///  - threshold: gamma with the lowest validation positive-side SMLE among
///    runs whose positive fraction is within 0.05 of the largest one.
/// Ties go to the earlier grid value.
inline SelectionResult select_constraint_weight(std::span<const ItemRecord> train,
                                                std::span<const ItemRecord> validation, const TrainingConfig& base,
                                                std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("selection grid is empty");
  if (validation.empty()) throw Error("validation split is empty");
  const bool percentile = base.constraint.mode == ConstraintMode::percentile;
  SelectionResult out;
  std::vector<TrainingResult> runs;
  for (double v : grid) {
    TrainingConfig cfg = base;
    (percentile ? cfg.constraint.beta : cfg.constraint.gamma) = v;
    TrainingResult r = train_joint(train, cfg);
    const Evaluation e = evaluate_split(r.model, validation);
    out.candidates.push_back({v, e.report.positive_fraction, e.report.positive.smle});
    runs.push_back(std::move(r));
  }
  std::size_t best = 0;
  if (percentile) {
    for (std::size_t k = 1; k < grid.size(); ++k)
      if (std::abs(out.candidates[k].validation_positive_fraction - base.constraint.delta) <
          std::abs(out.candidates[best].validation_positive_fraction - base.constraint.delta))
        best = k;
  } else {
    double max_fraction = 0.0;
    for (const auto& c : out.candidates) max_fraction = std::max(max_fraction, c.validation_positive_fraction);
    bool found = false;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (out.candidates[k].validation_positive_fraction < max_fraction - 0.05) continue;
      if (!found || out.candidates[k].validation_positive_smle < out.candidates[best].validation_positive_smle) best = k;
      found = true;
    }
  }
  out.chosen = grid[best];
  out.trained = std::move(runs[best]);
  return out;
}

// ---------------------------------------------------------------------------
// Experiment sweeps

enum class SweepKind { percentile, threshold, ablation };

inline std::string_view to_string(SweepKind k) {
  switch (k) {
    case SweepKind::percentile: return "percentile";
    case SweepKind::threshold: return "threshold";
    case SweepKind::ablation: return "ablation";
  }
  return "percentile";
}

inline SweepKind parse_sweep_kind(std::string_view s) {
  if (s == "percentile") return SweepKind::percentile;
  if (s == "threshold") return SweepKind::threshold;
  if (s == "ablation") return SweepKind::ablation;
  throw ConfigError("unknown sweep kind '" + std::string(s) + "'");
}

struct SweepConfig {
  SweepKind kind = SweepKind::percentile;
  /// delta values, epsilon values, or unused for ablation sweeps.
  std::vector<double> values;
  /// Candidate beta/gamma values; an empty grid keeps the base config's value.
  std::vector<double> selection_grid = default_selection_grid();
};

struct ExperimentRow {
  std::string label;
  ConstraintMode mode = ConstraintMode::percentile;
  double constraint_value = 0.0;  // delta or epsilon
  double constraint_weight = 0.0;  // beta or gamma actually used
  SplitReport report;
};

struct ExperimentTable {
  SweepKind kind = SweepKind::percentile;
  RangeMode range_mode = RangeMode::multiplicative_log;
  std::vector<ExperimentRow> rows;
};

struct ExperimentData {
  std::span<const ItemRecord> train;
  std::span<const ItemRecord> validation;
  std::span<const ItemRecord> test;
};

namespace detail {

struct TrainedRun {
  TrainingResult result;
  double weight = 0.0;
};

inline TrainedRun train_with_selection(const ExperimentData& data, const TrainingConfig& cfg,
                                       std::span<const double> grid) {
  if (grid.empty()) {
    const double w = cfg.constraint.mode == ConstraintMode::percentile ? cfg.constraint.beta : cfg.constraint.gamma;
    return {train_joint(data.train, cfg), w};
  }
  SelectionResult s = select_constraint_weight(data.train, data.validation, cfg, grid);
  return {std::move(s.trained), s.chosen};
}

inline double constraint_value(const ConstraintConfig& c) {
  return c.mode == ConstraintMode::percentile ? c.delta : c.epsilon;
}

}  // namespace detail

/// Trains and evaluates (on the test split) every configuration of a sweep
/// with the base config's seed.
///  - percentile / threshold: one row per delta / epsilon value.
///  - ablation: Baseline, Ours, W/O attention, W/O image, W/O text under the
///    base constraint. Baseline pairs the separately trained regressor with
///    the Ours classifier; ablated runs reuse the weight selected for Ours.
inline ExperimentTable run_experiment_suite(const ExperimentData& data, const TrainingConfig& base,
                                            const SweepConfig& sweep,
                                            const std::function<void(const ExperimentRow&)>& on_row = {}) {
  ExperimentTable table;
  table.kind = sweep.kind;
  table.range_mode = base.range.mode;
  auto emit = [&](ExperimentRow row) {
    if (on_row) on_row(row);
    table.rows.push_back(std::move(row));
  };
  auto fail = [](const std::string& label, const std::exception& e) -> Error {
    return Error("experiment '" + label + "' failed: " + e.what());
  };

  if (sweep.kind != SweepKind::ablation) {
    if (sweep.values.empty()) throw ConfigError("sweep has no values");
    for (double v : sweep.values) {
      TrainingConfig cfg = base;
      cfg.constraint.mode = sweep.kind == SweepKind::percentile ? ConstraintMode::percentile : ConstraintMode::threshold;
      (sweep.kind == SweepKind::percentile ? cfg.constraint.delta : cfg.constraint.epsilon) = v;
      const std::string label = std::string(to_string(sweep.kind)) + "=" + nlohmann::json(v).dump();
      try {
        detail::TrainedRun run = detail::train_with_selection(data, cfg, sweep.selection_grid);
        emit({label, cfg.constraint.mode, v, run.weight, evaluate_split(run.result.model, data.test).report});
      } catch (const std::exception& e) {
        throw fail(label, e);
      }
    }
    return table;
  }

  const double value = detail::constraint_value(base.constraint);
  TrainingConfig ours_cfg = base;
  ours_cfg.ablation = Ablation::none;
  detail::TrainedRun ours;
  try {
    ours = detail::train_with_selection(data, ours_cfg, sweep.selection_grid);
  } catch (const std::exception& e) {
    throw fail("Ours", e);
  }
  TrainingConfig tuned = ours_cfg;
  (tuned.constraint.mode == ConstraintMode::percentile ? tuned.constraint.beta : tuned.constraint.gamma) = ours.weight;
  try {
    const TrainingResult baseline = train_baseline_regression(data.train, tuned);
    emit({"Baseline", base.constraint.mode, value, ours.weight,
          evaluate_split(ours.result.model, baseline.model.regressor, data.test).report});
  } catch (const std::exception& e) {
    throw fail("Baseline", e);
  }
  emit({"Ours", base.constraint.mode, value, ours.weight, evaluate_split(ours.result.model, data.test).report});
  const std::pair<const char*, Ablation> ablations[] = {
      {"W/O attention", Ablation::no_attention}, {"W/O image", Ablation::no_image}, {"W/O text", Ablation::no_text}};
  for (const auto& [label, ablation] : ablations) {
    TrainingConfig cfg = tuned;
    cfg.ablation = ablation;
    try {
      const TrainingResult r = train_joint(data.train, cfg);
      emit({label, base.constraint.mode, value, ours.weight, evaluate_split(r.model, data.test).report});
    } catch (const std::exception& e) {
      throw fail(label, e);
    }
  }
  return table;
}

inline nlohmann::ordered_json to_json(const ExperimentRow& row) {
  nlohmann::ordered_json j;
  j["label"] = row.label;
  j["constraint"] = std::string(to_string(row.mode));
  j["value"] = row.constraint_value;
  j["weight"] = row.constraint_weight;
  const nlohmann::ordered_json report = to_json(row.report);
  for (const auto& [k, v] : report.items()) j[k] = v;
  return j;
}

inline nlohmann::ordered_json to_json(const ExperimentTable& t) {
  nlohmann::ordered_json j;
  j["sweep"] = std::string(to_string(t.kind));
  j["range_mode"] = std::string(to_string(t.range_mode));
  j["rows"] = nlohmann::ordered_json::array();
  for (const ExperimentRow& r : t.rows) j["rows"].push_back(to_json(r));
  return j;
}

inline nlohmann::ordered_json to_json(const TrainingHistory& h) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const EpochRecord& r : h) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["learning_rate"] = r.learning_rate;
    j["objective"] = r.objective;
    j["positive_fraction"] = r.positive_fraction;
    j["positive_regression_loss"] = r.positive_regression_loss;
    j["constraint_term"] = r.constraint_term;
    j["dropped_class_batches"] = r.dropped_class_batches;
    rows.push_back(std::move(j));
  }
  return rows;
}

}  // namespace pricesuggest
