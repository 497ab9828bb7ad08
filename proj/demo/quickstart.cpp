// Generates a small synthetic market, trains the joint model, and prints the
// test metrics next to a few per-item suggestions.

#include <cstdio>

#include "pricesuggest/pricesuggest.hpp"

namespace ps = pricesuggest;

int main() {
  ps::SyntheticConfig data_cfg;
  data_cfg.n_items = 6000;
  const auto data = ps::generate_synthetic(data_cfg);
  const auto split = ps::split_dataset(data.items, {}, 1);

  ps::TrainingConfig cfg;
  cfg.epochs_phase1 = 30;
  cfg.epochs_phase2 = 15;
  cfg.constraint.mode = ps::ConstraintMode::percentile;
  cfg.constraint.delta = 0.6;
  const auto trained = ps::train_joint(split.train, cfg);
  const auto eval = ps::evaluate_split(trained.model, split.test);

  const auto& r = eval.report;
  std::printf("test items %zu, positive fraction %.3f\n", r.positive.n_items + r.negative.n_items,
              r.positive_fraction);
  std::printf("%-9s %7s %7s %7s %7s %7s %7s\n", "", "SMLE", "SPDMLE", "SPIMLE", "UMLE", "UPDMLE", "UPIMLE");
  for (const auto* side : {&r.positive, &r.negative}) {
    std::printf("%-9s %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f\n", side == &r.positive ? "positive" : "negative",
                side->smle, side->spdmle, side->spimle, side->umle, side->updmle, side->upimle);
  }
  std::printf("positive-side SMLE %.3f: suggestions for sold items miss their range by a factor of %.3f on average\n",
              r.positive.smle, ps::log_error_to_ratio(r.positive.smle));

  std::printf("\n%-10s %-7s %-10s %-18s %s\n", "item", "status", "price", "verdict", "suggested");
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& item = split.test[i];
    const auto& p = eval.predictions[i];
    const double price = ps::inverse_log_transform(item.log_price);
    if (p.hard_label == ps::HardLabel::positive) {
      std::printf("%-10s %-7s %7.2f    %-18s %.2f CHN\n", item.id.c_str(), std::string(to_string(item.status)).c_str(),
                  price, "positive", ps::inverse_log_transform(p.suggested_log_price));
    } else {
      std::printf("%-10s %-7s %7.2f    %-18s -\n", item.id.c_str(), std::string(to_string(item.status)).c_str(), price,
                  "update encouraged");
    }
  }
  return 0;
}
