#pragma once

#include <string>
#include <string_view>

#include "pricesuggest/error.hpp"

namespace pricesuggest {

enum class SaleStatus { sold, unsold };

/// Generator-only ground truth. Never part of model input.
enum class Quality { qualified, unqualified };

enum class HardLabel { negative, positive };

/// Per-item output of the two heads.
struct PredictionOutcome {
  double suggested_log_price = 0.0;
  double confidence = 0.0;
  HardLabel hard_label = HardLabel::negative;
};

/// What actually happened to a listing: its status and the matching log price
/// (sold price when sold, listing price when unsold).
struct ItemOutcome {
  SaleStatus status = SaleStatus::sold;
  double log_price = 0.0;
};

inline std::string_view to_string(SaleStatus s) { return s == SaleStatus::sold ? "sold" : "unsold"; }
inline std::string_view to_string(Quality q) { return q == Quality::qualified ? "qualified" : "unqualified"; }

inline SaleStatus parse_sale_status(std::string_view s) {
  if (s == "sold") return SaleStatus::sold;
  if (s == "unsold") return SaleStatus::unsold;
  throw FormatError("unknown status '" + std::string(s) + "'");
}

inline Quality parse_quality(std::string_view s) {
  if (s == "qualified") return Quality::qualified;
  if (s == "unqualified") return Quality::unqualified;
  throw FormatError("unknown quality_hint '" + std::string(s) + "'");
}

}  // namespace pricesuggest
