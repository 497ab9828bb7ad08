#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "pricesuggest/error.hpp"
#include "pricesuggest/numeric.hpp"
#include "pricesuggest/types.hpp"

namespace pricesuggest {

inline constexpr std::size_t kTokenLength = 32;

/// Fixed-length word-indicator vector; id 0 is padding.
struct TokenVector {
  std::array<std::uint32_t, kTokenLength> ids{};

  friend bool operator==(const TokenVector&, const TokenVector&) = default;

  /// Number of ids before the trailing padding.
  [[nodiscard]] std::size_t used_length() const {
    std::size_t n = kTokenLength;
    while (n > 0 && ids[n - 1] == 0) --n;
    return n;
  }
};

/// Right-pads with 0 or keeps the first 32 ids.
inline TokenVector pad_or_truncate(std::span<const std::int64_t> tokens, std::size_t vocab_size) {
  TokenVector tv;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::int64_t id = tokens[i];
    if (id < 0 || static_cast<std::uint64_t>(id) >= vocab_size)
      throw DimensionError("token id " + std::to_string(id) + " at position " + std::to_string(i) +
                           " is outside the vocabulary [0, " + std::to_string(vocab_size) + ")");
    if (i < kTokenLength) tv.ids[i] = static_cast<std::uint32_t>(id);
  }
  return tv;
}

/// One marketplace listing. `log_price` is the sold price for sold items and
/// the listing price for unsold ones.
struct ItemRecord {
  std::string id;
  std::string category;
  Vector visual;
  TokenVector tokens;
  SaleStatus status = SaleStatus::sold;
  double log_price = 0.0;
  std::optional<Quality> quality_hint;

  [[nodiscard]] ItemOutcome outcome() const { return {status, log_price}; }

  friend bool operator==(const ItemRecord& a, const ItemRecord& b) {
    return a.id == b.id && a.category == b.category && a.visual.size() == b.visual.size() &&
           a.visual == b.visual && a.tokens == b.tokens && a.status == b.status && a.log_price == b.log_price &&
           a.quality_hint == b.quality_hint;
  }
};

}  // namespace pricesuggest
