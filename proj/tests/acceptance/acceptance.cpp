// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.
// The training criteria share one default 20k-item dataset and reuse each
// other's runs where the configurations coincide.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradient_trials.hpp"
#include "oracles.hpp"
#include "pricesuggest/pricesuggest.hpp"

namespace ps = pricesuggest;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail) {
  std::printf("CRITERION %2d %s  %s: %s\n", id, pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void note(const std::string& line) {
  std::printf("  %s\n", line.c_str());
  std::fflush(stdout);
}

double minutes_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count() / 60.0;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  const ps::RangeLossParams rp;
  struct Case {
    double value, expected;
  };
  const Case cases[] = {
      {ps::range_loss_sold(1.5, 2.0, rp), 0.5},   {ps::range_loss_sold(2.6, 2.0, rp), 0.2},
      {ps::range_loss_sold(2.2, 2.0, rp), 0.0},   {ps::range_loss_unsold(2.4, 3.0, rp), 0.1},
      {ps::range_loss_unsold(3.2, 3.0, rp), 0.2}, {ps::range_loss_unsold(2.75, 3.0, rp), 0.0},
  };
  double worst = 0.0;
  for (const auto& c : cases) worst = std::max(worst, std::abs(c.value - c.expected));
  report(1, worst <= 1e-12, "range-loss exactness", fmt("%zu branch examples, max |error| %.3g (tol 1e-12)",
                                                        std::size(cases), worst));
}

void criterion_2() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, double>> parts{
      {"regression head", trials::head_trials(ps::HeadKind::regression, trials::small_config(), 100, 201).max_relative_error},
      {"classification head",
       trials::head_trials(ps::HeadKind::classification, trials::small_config(), 100, 202).max_relative_error},
      {"attention fusion", trials::fusion_trials(100, 203).max_relative_error},
      {"percentile objective",
       trials::objective_trials(trials::percentile_config(), trials::ObjectivePart::exact, 100, 204).max_relative_error},
      {"percentile straight-through",
       trials::objective_trials(trials::percentile_config(), trials::ObjectivePart::straight_through, 100, 205)
           .max_relative_error},
      {"threshold objective",
       trials::objective_trials(trials::threshold_config(), trials::ObjectivePart::exact, 100, 206).max_relative_error},
  };
  double worst = 0.0;
  for (const auto& [name, err] : parts) {
    note(fmt("%-28s max rel err %.3g", name.c_str(), err));
    worst = std::max(worst, err);
  }
  const double minutes = minutes_since(t0);
  report(2, worst < 1e-4 && minutes < 1.0, "gradient suite",
         fmt("100 points each, step 1e-5, max rel err %.3g (< 1e-4), %.2f min", worst, minutes));
}

void criterion_3() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> price(-1.0, 8.0), off(-1.5, 1.5), u;
  std::uniform_int_distribution<std::size_t> size(1, 300);
  std::size_t mismatches = 0, inconsistent = 0;
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const ps::RangeLossParams rp = [&] {
      ps::RangeLossParams r;
      if (s % 2) r.mode = ps::RangeMode::additive_log;
      return r;
    }();
    const std::size_t n = size(rng);
    std::vector<double> p;
    std::vector<ps::ItemOutcome> o;
    for (std::size_t i = 0; i < n; ++i) {
      const double q = price(rng);
      o.push_back({u(rng) < 0.68 ? ps::SaleStatus::sold : ps::SaleStatus::unsold, q});
      // a tenth of the suggestions sit exactly on a range boundary
      const auto r = oracle::range_of(o.back().status, q, rp);
      p.push_back(u(rng) < 0.1 ? (u(rng) < 0.5 ? r.lo : r.hi) : q + off(rng));
    }
    const auto m = ps::compute_metrics(p, o, rp);
    const auto b = oracle::brute_force_metrics(p, o, rp);
    const double diff = std::max({std::abs(m.smle - b.smle), std::abs(m.spdmle - b.spdmle), std::abs(m.spimle - b.spimle),
                                  std::abs(m.umle - b.umle), std::abs(m.updmle - b.updmle), std::abs(m.upimle - b.upimle)});
    worst = std::max(worst, diff);
    if (diff > 1e-12 || m.i1 != b.i1 || m.i2 != b.i2 || m.i3 != b.i3 || m.i4 != b.i4 || m.i5 != b.i5 || m.i6 != b.i6)
      ++mismatches;
    if (!m.consistent()) ++inconsistent;
  }
  report(3, mismatches == 0 && inconsistent == 0, "metrics oracle",
         fmt("1000 random sets: %zu oracle mismatches (max diff %.3g), %zu decomposition failures (rel 1e-12)",
             mismatches, worst, inconsistent));
}

// ---------------------------------------------------------------------------
// Training criteria

struct Run {
  ps::TrainingResult result;
  double weight = 0.0;
  ps::SplitReport test;
};

struct Shared {
  ps::SyntheticDataset data;
  ps::DatasetSplit split;
  std::map<double, Run> percentile, threshold;
  std::vector<double> grid = ps::default_selection_grid();
};

Run train_selected(const Shared& s, ps::ConstraintMode mode, double value) {
  ps::TrainingConfig cfg;
  cfg.constraint.mode = mode;
  (mode == ps::ConstraintMode::percentile ? cfg.constraint.delta : cfg.constraint.epsilon) = value;
  auto sel = ps::select_constraint_weight(s.split.train, s.split.validation, cfg, s.grid);
  Run r{std::move(sel.trained), sel.chosen, {}};
  r.test = ps::evaluate_split(r.result.model, s.split.test).report;
  note(fmt("%s=%.3f: weight %.1f, test positive fraction %.4f (%zu items), positive SMLE %.4f UMLE %.4f, "
           "negative SMLE %.4f UMLE %.4f",
           std::string(to_string(mode)).c_str(), value, r.weight, r.test.positive_fraction, r.test.n_positive,
           r.test.positive.smle, r.test.positive.umle, r.test.negative.smle, r.test.negative.umle));
  return r;
}

void criterion_4(Shared& s) {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  double prev = -1.0;
  for (double delta : {0.4, 0.5, 0.6}) {
    const Run& r = s.percentile[delta] = train_selected(s, ps::ConstraintMode::percentile, delta);
    const double f = r.test.positive_fraction;
    ok = ok && f >= delta - 0.05 && f <= delta + 0.12 && f >= prev;
    prev = f;
    detail += fmt("%s%.2f->%.4f", detail.empty() ? "" : ", ", delta, f);
  }
  const double minutes = minutes_since(t0);
  report(4, ok && minutes <= 15.0, "percentile adherence",
         "delta->fraction " + detail + fmt(" (band [d-0.05, d+0.12], nondecreasing), %.1f min", minutes));
}

void criterion_6(Shared& s) {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  std::size_t prev_count = 0;
  double prev_smle = -1.0;
  for (double eps : {0.10, 0.15, 0.20}) {
    const Run& r = s.threshold[eps] = train_selected(s, ps::ConstraintMode::threshold, eps);
    ok = ok && r.test.n_positive >= prev_count && r.test.positive.smle >= prev_smle;
    prev_count = r.test.n_positive;
    prev_smle = r.test.positive.smle;
    detail += fmt("%s%.2f->(%zu, %.4f)", detail.empty() ? "" : ", ", eps, r.test.n_positive, r.test.positive.smle);
  }
  const double minutes = minutes_since(t0);
  report(6, ok && minutes <= 15.0, "threshold monotonicity",
         "epsilon->(positives, positive SMLE) " + detail + fmt(", both nondecreasing, %.1f min", minutes));
}

void criterion_5(const Shared& s) {
  bool ok = true;
  std::string detail;
  for (const auto& [label, r] : {std::pair<const char*, const Run*>{"delta=0.6", &s.percentile.at(0.6)},
                                 std::pair<const char*, const Run*>{"eps=0.15", &s.threshold.at(0.15)}}) {
    const auto& t = r->test;
    const double rs = t.positive.smle / t.negative.smle, ru = t.positive.umle / t.negative.umle;
    ok = ok && rs <= 2.0 / 3.0 && ru <= 2.0 / 3.0;
    detail += fmt("%s%s: SMLE %.4f/%.4f=%.3f, UMLE %.4f/%.4f=%.3f", detail.empty() ? "" : "; ", label, t.positive.smle,
                  t.negative.smle, rs, t.positive.umle, t.negative.umle, ru);
  }
  report(5, ok, "classifier separation", detail + " (ratios <= 0.667)");
}

void point_biserial(const Shared& s) {
  const Run& r = s.percentile.at(0.6);
  const auto preds = r.result.model.predict(s.split.test);
  std::vector<double> x, y;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    x.push_back(preds[i].hard_label == ps::HardLabel::positive ? 1.0 : 0.0);
    y.push_back(s.split.test[i].quality_hint == ps::Quality::qualified ? 1.0 : 0.0);
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double corr = sxy / std::sqrt(sxx * syy);
  std::printf("INVARIANT    %s  hard-positive vs qualified point-biserial correlation at delta=0.6: %.3f (> 0)\n",
              corr > 0.0 ? "PASS" : "FAIL", corr);
  if (!(corr > 0.0)) ++failures;
}

void criterion_7(const Shared& s) {
  const auto t0 = Clock::now();
  ps::TrainingConfig cfg;
  const auto baseline = ps::train_baseline_regression(s.split.train, cfg);
  bool ok = true;
  std::string detail;
  for (const auto& [label, r] : {std::pair<const char*, const Run*>{"delta=0.6", &s.percentile.at(0.6)},
                                 std::pair<const char*, const Run*>{"eps=0.15", &s.threshold.at(0.15)}}) {
    const auto b = ps::evaluate_split(r->result.model, baseline.model.regressor, s.split.test).report;
    const double joint = r->test.positive.smle, base = b.positive.smle;
    ok = ok && joint <= base * 1.02;
    detail += fmt("%s%s: joint %.4f vs baseline %.4f (ratio %.3f)", detail.empty() ? "" : "; ", label, joint, base,
                  joint / base);
  }
  const double minutes = minutes_since(t0);
  report(7, ok && minutes <= 20.0, "joint vs baseline", detail + fmt(" (ratio <= 1.02), %.1f min", minutes));
}

void criterion_8(const Shared& s) {
  const auto t0 = Clock::now();
  const Run& ours = s.percentile.at(0.6);
  std::map<ps::Ablation, double> smle;
  for (auto a : {ps::Ablation::no_attention, ps::Ablation::no_image, ps::Ablation::no_text}) {
    ps::TrainingConfig cfg;
    cfg.constraint.delta = 0.6;
    cfg.constraint.beta = ours.weight;
    cfg.ablation = a;
    const auto r = ps::train_joint(s.split.train, cfg);
    const auto t = ps::evaluate_split(r.model, s.split.test).report;
    smle[a] = t.positive.smle;
    note(fmt("%-13s positive SMLE %.4f, positive fraction %.4f", std::string(to_string(a)).c_str(), t.positive.smle,
             t.positive_fraction));
  }
  const double full = ours.test.positive.smle;
  const double text_ratio = smle[ps::Ablation::no_text] / full;
  const bool ok = text_ratio >= 1.10 && smle[ps::Ablation::no_attention] > full;
  const double minutes = minutes_since(t0);
  report(8, ok && minutes <= 20.0, "ablation direction",
         fmt("full %.4f, W/O text %.4f (+%.1f%%, need >= 10%%), W/O attention %.4f (need > full), W/O image %.4f, "
             "%.1f min",
             full, smle[ps::Ablation::no_text], 100.0 * (text_ratio - 1.0), smle[ps::Ablation::no_attention],
             smle[ps::Ablation::no_image], minutes));
}

void criterion_9() {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {7u, 1u, 2u, 3u, 4u}) {
    ps::SyntheticConfig c;
    c.seed = seed;
    const auto d = ps::generate_synthetic(c);
    std::vector<double> raw, logs;
    for (const auto& r : d.items) {
      logs.push_back(r.log_price);
      raw.push_back(ps::inverse_log_transform(r.log_price));
    }
    const double sr = ps::skewness(raw), sl = ps::skewness(logs);
    ok = ok && std::abs(sr) > std::abs(sl);
    detail += fmt("%sseed %llu: %.2f vs %.2f", detail.empty() ? "" : ", ", static_cast<unsigned long long>(seed), sr, sl);
  }
  report(9, ok, "log-transform effect", "raw vs log skewness " + detail);
}

// ---------------------------------------------------------------------------

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool sh(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null").c_str());
  return WIFEXITED(status) && WEXITSTATUS(status) == 0;
}

void criterion_10() {
  const auto t0 = Clock::now();
  const fs::path dir = fs::temp_directory_path() / "pricesuggest_acceptance";
  fs::remove_all(dir);
  bool ran = true;
  for (const char* tag : {"a", "b"}) {
    const fs::path d = dir / tag;
    fs::create_directories(d);
    const std::string cli = PRICESUGGEST_CLI;
    ran = ran && sh(cli + " gen-data --seed 7 -o " + (d / "data.jsonl").string());
    ran = ran && sh(cli + " train --seed 1 --split train -d " + (d / "data.jsonl").string() + " -o " +
                    (d / "model.json").string());
    ran = ran && sh(cli + " evaluate --split test -m " + (d / "model.json").string() + " -d " +
                    (d / "data.jsonl").string() + " -o " + (d / "report.json").string());
  }
  bool same = ran;
  for (const char* f : {"data.jsonl", "model.json", "model.json.history.json", "report.json"})
    same = same && read_all(dir / "a" / f) == read_all(dir / "b" / f) && !read_all(dir / "a" / f).empty();
  fs::remove_all(dir);
  report(10, same, "determinism",
         fmt("gen-data -> train -> evaluate twice through the CLI: %s, %.1f min",
             !ran ? "a command failed" : (same ? "dataset, model, history and report byte-identical" : "outputs differ"),
             minutes_since(t0)));
}

void criterion_11() {
  const double a = ps::log_error_to_ratio(0.15), b = ps::log_error_to_ratio(0.14);
  report(11, std::abs(a - 1.162) <= 0.001 && std::abs(b - 1.150) <= 0.001, "ratio conversion",
         fmt("ratio(0.15) = %.4f (1.162 +- 0.001), ratio(0.14) = %.4f (1.150 +- 0.001)", a, b));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_9();
  criterion_11();

  Shared s;
  s.data = ps::generate_synthetic(ps::SyntheticConfig{});
  s.split = ps::split_dataset(s.data.items, {}, 1);
  note(fmt("default dataset: %zu train / %zu validation / %zu test items", s.split.train.size(),
           s.split.validation.size(), s.split.test.size()));
  criterion_4(s);
  criterion_6(s);
  criterion_5(s);
  point_biserial(s);
  criterion_7(s);
  criterion_8(s);
  criterion_10();

  std::printf("%d failing line(s), %.1f min total\n", failures, minutes_since(t0));
  return failures == 0 ? 0 : 1;
}
