// Command-line pipeline: gen-data, train, evaluate, predict, sweep.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pricesuggest/pricesuggest.hpp"

namespace fs = std::filesystem;
namespace ps = pricesuggest;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int verbosity = 0;

void log(const std::string& line) {
  if (verbosity > 0) std::cerr << line << '\n';
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void require_input(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw ps::ConfigError(std::string(what) + " '" + path + "' does not exist");
}

void require_output(const std::string& path, std::initializer_list<const std::string*> inputs) {
  const fs::path p = fs::absolute(path);
  if (p.has_parent_path() && !fs::is_directory(p.parent_path()))
    throw ps::ConfigError("output directory '" + p.parent_path().string() + "' does not exist");
  for (const std::string* in : inputs)
    if (in && !in->empty() && fs::exists(*in) && fs::equivalent(*in, path))
      throw ps::ConfigError("output '" + path + "' would overwrite an input file");
}

/// Writes through a sibling temporary so that a failed run leaves no partial file.
void write_file(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ps::Error("cannot open '" + tmp + "' for writing");
    out << text;
    if (!out.flush()) throw ps::Error("write to '" + tmp + "' failed");
  }
  fs::rename(tmp, path);
}

ps::PipelineConfig load_config(const Common& c) {
  ps::PipelineConfig cfg;
  if (!c.config_path.empty()) {
    require_input(c.config_path, "config");
    cfg = ps::load_pipeline_config(c.config_path);
  }
  for (const auto& o : c.overrides) ps::apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

std::vector<ps::ItemRecord> load_items(const std::string& path) {
  require_input(path, "dataset");
  return ps::load_dataset(path).items;
}

void check_compatible(const ps::PriceModel& m, const std::string& dataset_path) {
  const auto header = ps::load_dataset(dataset_path).header;
  if (header.visual_dim != m.config.visual_dim || header.vocab_size > m.config.vocab_size)
    throw ps::DimensionError("dataset has visual_dim " + std::to_string(header.visual_dim) + " and vocab_size " +
                             std::to_string(header.vocab_size) + "; model expects visual_dim " +
                             std::to_string(m.config.visual_dim) + " and vocab_size <= " +
                             std::to_string(m.config.vocab_size));
}

std::vector<ps::ItemRecord> select_split(const std::vector<ps::ItemRecord>& items, const ps::SplitConfig& s,
                                         const std::string& which) {
  if (which == "all") return items;
  auto parts = ps::split_dataset(items, s.fractions, s.seed);
  if (which == "train") return std::move(parts.train);
  if (which == "validation") return std::move(parts.validation);
  return std::move(parts.test);
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_path, "JSON config file");
  sub->add_option("--set", c.overrides, "Override a config field, e.g. training.epochs_phase1=5");
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Common& common, const std::string& out, bool hints) {
  auto cfg = load_config(common);
  if (common.seed) cfg.synthetic.seed = *common.seed;
  require_output(out, {});
  const auto data = ps::generate_synthetic(cfg.synthetic);
  std::size_t sold = 0;
  for (const auto& r : data.items) sold += r.status == ps::SaleStatus::sold;
  const std::string tmp = out + ".partial";
  ps::save_dataset(data.items, tmp, cfg.synthetic.vocab_size, hints);
  fs::rename(tmp, out);
  nlohmann::ordered_json summary;
  summary["items"] = data.items.size();
  summary["sold"] = sold;
  summary["unsold"] = data.items.size() - sold;
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_train(const Common& common, const std::string& data_path, const std::string& model_out,
              std::string history_out, const std::string& split) {
  auto cfg = load_config(common);
  if (common.seed) cfg.training.seed = *common.seed;
  if (history_out.empty()) history_out = model_out + ".history.json";
  require_output(model_out, {&data_path});
  require_output(history_out, {&data_path});
  const auto items = select_split(load_items(data_path), cfg.split, split);
  log("training " + std::string(to_string(cfg.scheme)) + " on " + std::to_string(items.size()) + " items");
  ps::TrainingResult r;
  try {
    r = cfg.scheme == ps::TrainingScheme::joint ? ps::train_joint(items, cfg.training)
                                                : ps::train_baseline_regression(items, cfg.training);
  } catch (const ps::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "; no model written\n";
    return kExitFailure;
  }
  for (const auto& h : r.history)
    log("epoch " + std::to_string(h.epoch) + " objective " + std::to_string(h.objective) + " positive " +
        std::to_string(h.positive_fraction));
  write_file(history_out, ps::to_json(r.history).dump(1) + "\n");
  write_file(model_out, ps::model_to_string(r.model));
  return 0;
}

int cmd_evaluate(const Common& common, const std::string& model_path, const std::string& data_path,
                 const std::string& report_out, const std::string& split) {
  const auto cfg = load_config(common);
  require_input(model_path, "model");
  if (!report_out.empty()) require_output(report_out, {&data_path, &model_path});
  const auto model = ps::load_model(model_path);
  require_input(data_path, "dataset");
  check_compatible(model, data_path);
  const auto items = select_split(load_items(data_path), cfg.split, split);
  const auto e = ps::evaluate_split(model, items);
  const std::string text = ps::to_json(e.report).dump(1) + "\n";
  if (!report_out.empty()) write_file(report_out, text);
  std::cout << text;
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path, const std::string& out) {
  require_input(model_path, "model");
  require_input(data_path, "dataset");
  if (!out.empty()) require_output(out, {&data_path, &model_path});
  const auto model = ps::load_model(model_path);
  check_compatible(model, data_path);
  const auto items = load_items(data_path);
  const auto preds = model.predict(items);
  std::string text;
  for (std::size_t i = 0; i < items.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = items[i].id;
    j["confidence"] = preds[i].confidence;
    if (preds[i].hard_label == ps::HardLabel::positive) {
      j["verdict"] = "positive";
      j["suggested_log_price"] = preds[i].suggested_log_price;
      j["suggested_price_CHN"] = ps::inverse_log_transform(preds[i].suggested_log_price);
    } else {
      j["verdict"] = "update encouraged";
    }
    text += j.dump() + "\n";
  }
  if (out.empty())
    std::cout << text;
  else
    write_file(out, text);
  return 0;
}

int cmd_sweep(const Common& common, const std::string& data_path, const std::string& report_out) {
  auto cfg = load_config(common);
  if (common.seed) cfg.training.seed = *common.seed;
  if (!report_out.empty()) require_output(report_out, {&data_path});
  const auto items = load_items(data_path);
  const auto parts = ps::split_dataset(items, cfg.split.fractions, cfg.split.seed);
  const ps::ExperimentData data{parts.train, parts.validation, parts.test};
  const auto table = ps::run_experiment_suite(data, cfg.training, cfg.sweep, [](const ps::ExperimentRow& r) {
    log(r.label + ": positive SMLE " + std::to_string(r.report.positive.smle) + ", positive fraction " +
        std::to_string(r.report.positive_fraction));
  });
  const std::string text = ps::to_json(table).dump(1) + "\n";
  if (!report_out.empty()) write_file(report_out, text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint qualification and price suggestion for second-hand listings"};
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", verbosity, "Log progress to stderr");

  Common common;
  std::string data, out, model, history, report, split = "all";
  bool hints = false;
  const std::vector<std::string> splits{"all", "train", "validation", "test"};

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic listing dataset");
  add_common(gen, common);
  gen->add_option("--seed", common.seed, "Generator seed");
  gen->add_option("-o,--out", out, "Dataset file to write")->required();
  gen->add_flag("--with-hints", hints, "Keep the generator's quality hints in the file");

  auto* train = app.add_subcommand("train", "Train a model on a dataset");
  add_common(train, common);
  train->add_option("--seed", common.seed, "Training seed");
  train->add_option("-d,--data", data, "Dataset file")->required();
  train->add_option("-o,--model-out", model, "Model file to write")->required();
  train->add_option("--history-out", history, "Per-epoch history (default: <model>.history.json)");
  train->add_option("--split", split, "Which split of the dataset to train on")->check(CLI::IsMember(splits));

  auto* eval = app.add_subcommand("evaluate", "Report metrics of a model on a dataset");
  add_common(eval, common);
  eval->add_option("-m,--model", model, "Model file")->required();
  eval->add_option("-d,--data", data, "Dataset file")->required();
  eval->add_option("-o,--report-out", report, "Report file to write");
  eval->add_option("--split", split, "Which split of the dataset to evaluate")->check(CLI::IsMember(splits));

  auto* pred = app.add_subcommand("predict", "Per-item verdicts and suggested prices");
  pred->add_option("-m,--model", model, "Model file")->required();
  pred->add_option("-d,--data", data, "Dataset file")->required();
  pred->add_option("-o,--out", out, "Predictions file (default: stdout)");

  auto* sweep = app.add_subcommand("sweep", "Run a percentile, threshold or ablation sweep");
  add_common(sweep, common);
  sweep->add_option("--seed", common.seed, "Training seed");
  sweep->add_option("-d,--data", data, "Dataset file")->required();
  sweep->add_option("-o,--report-out", report, "Table file to write");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(common, out, hints);
    if (train->parsed()) return cmd_train(common, data, model, history, split);
    if (eval->parsed()) return cmd_evaluate(common, model, data, report, split);
    if (pred->parsed()) return cmd_predict(model, data, out);
    if (sweep->parsed()) return cmd_sweep(common, data, report);
  } catch (const ps::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
