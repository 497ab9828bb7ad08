#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "pricesuggest/dataset.hpp"

namespace ps = pricesuggest;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("pricesuggest_" + name); }

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ps::SyntheticConfig small_synthetic(std::uint64_t seed = 7, std::size_t n = 500) {
  ps::SyntheticConfig c;
  c.n_items = n;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(LogTransform, Values) {
  EXPECT_EQ(ps::log_transform(1.0), 0.0);
  EXPECT_NEAR(ps::log_transform(std::exp(1.0)), 1.0, 1e-15);
  EXPECT_THROW(ps::log_transform(0.0), ps::Error);
  EXPECT_THROW(ps::log_transform(-3.0), ps::Error);
}

TEST(LogTransform, RoundTrip) {
  std::mt19937_64 rng(1);
  std::lognormal_distribution<double> price(3.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const double p = price(rng);
    EXPECT_NEAR(ps::inverse_log_transform(ps::log_transform(p)) / p, 1.0, 1e-12);
  }
}

TEST(Generator, DeterministicUnderSeedAndSeedSensitive) {
  const auto a = ps::generate_synthetic(small_synthetic(3));
  const auto b = ps::generate_synthetic(small_synthetic(3));
  const auto c = ps::generate_synthetic(small_synthetic(4));
  EXPECT_EQ(a.items, b.items);
  EXPECT_NE(a.items, c.items);
  const auto pa = temp_file("gen_a.jsonl"), pb = temp_file("gen_b.jsonl");
  ps::save_dataset(a.items, pa.string(), 1000);
  ps::save_dataset(b.items, pb.string(), 1000);
  EXPECT_EQ(read_all(pa), read_all(pb));
  fs::remove(pa);
  fs::remove(pb);
}

TEST(Generator, SoldFractionAtDefaultSize) {
  const auto d = ps::generate_synthetic(ps::SyntheticConfig{});
  ASSERT_EQ(d.items.size(), 20000u);
  std::size_t sold = 0;
  for (const auto& r : d.items) sold += r.status == ps::SaleStatus::sold;
  EXPECT_NEAR(static_cast<double>(sold) / 20000.0, 0.68, 0.02);
}

TEST(Generator, QualifiedFeaturesPredictPriceBetterUnderOls) {
  const ps::SyntheticConfig cfg{};
  const auto d = ps::generate_synthetic(cfg);
  const std::size_t vocab_cols = cfg.filler_token_base();  // category and attribute ids
  auto fit = [&](ps::Quality q) {
    std::vector<const ps::ItemRecord*> rows;
    for (const auto& r : d.items)
      if (r.quality_hint == q && r.status == ps::SaleStatus::sold) rows.push_back(&r);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                              static_cast<Eigen::Index>(cfg.visual_dim + vocab_cols));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      x.row(row).head(static_cast<Eigen::Index>(cfg.visual_dim)) = rows[i]->visual.transpose();
      for (auto id : rows[i]->tokens.ids)
        if (id != 0 && id < vocab_cols) x(row, static_cast<Eigen::Index>(cfg.visual_dim + id)) += 1.0;
      y[row] = rows[i]->log_price;
    }
    return oracle::ols_rmse(x, y);
  };
  const double qualified = fit(ps::Quality::qualified);
  const double unqualified = fit(ps::Quality::unqualified);
  EXPECT_LT(qualified, unqualified);
  EXPECT_LT(qualified, 0.7 * unqualified);
}

TEST(Generator, LogTransformReducesSkewness) {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const auto d = ps::generate_synthetic(small_synthetic(seed, 20000));
    std::vector<double> raw, logs;
    for (const auto& r : d.items) {
      logs.push_back(r.log_price);
      raw.push_back(ps::inverse_log_transform(r.log_price));
    }
    EXPECT_GT(std::abs(ps::skewness(raw)), std::abs(ps::skewness(logs)));
  }
}

TEST(Generator, UnsoldListingsSitAboveValue) {
  const auto d = ps::generate_synthetic(small_synthetic(5, 5000));
  double sold = 0.0, unsold = 0.0;
  std::size_t ns = 0, nu = 0;
  for (const auto& r : d.items) {
    if (r.status == ps::SaleStatus::sold) {
      sold += r.log_price;
      ++ns;
    } else {
      unsold += r.log_price;
      ++nu;
    }
  }
  EXPECT_NEAR(unsold / static_cast<double>(nu) - sold / static_cast<double>(ns), std::log(1.2), 0.06);
}

TEST(Generator, InvalidConfigIsRejected) {
  auto c = small_synthetic();
  c.noise_scale_unqualified = c.noise_scale_qualified;
  EXPECT_THROW(ps::generate_synthetic(c), ps::ConfigError);
  c = small_synthetic();
  c.sold_fraction = 1.0;
  EXPECT_THROW(ps::generate_synthetic(c), ps::ConfigError);
}

TEST(Persistence, SaveLoadRoundTripStripsHints) {
  const auto d = ps::generate_synthetic(small_synthetic());
  const auto p = temp_file("roundtrip.jsonl");
  ps::save_dataset(d.items, p.string(), 1000);
  const auto loaded = ps::load_dataset(p.string());
  ASSERT_EQ(loaded.items.size(), d.items.size());
  EXPECT_EQ(loaded.header.visual_dim, 64u);
  for (std::size_t i = 0; i < d.items.size(); ++i) {
    auto expected = d.items[i];
    expected.quality_hint.reset();
    EXPECT_EQ(loaded.items[i], expected);
  }
  ps::save_dataset(d.items, p.string(), 1000, true);
  EXPECT_EQ(ps::load_dataset(p.string()).items, d.items);
  fs::remove(p);
}

TEST(Persistence, CorruptedLineIsCited) {
  const auto d = ps::generate_synthetic(small_synthetic(7, 5));
  const auto p = temp_file("corrupt.jsonl");
  ps::save_dataset(d.items, p.string(), 1000);
  std::string text = read_all(p);
  // break the third item (line 4 after the header)
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k) pos = text.find('\n', pos) + 1;
  text.insert(pos + 1, "#");
  std::ofstream(p, std::ios::binary) << text;
  try {
    ps::load_dataset(p.string());
    FAIL() << "expected FormatError";
  } catch (const ps::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
  }
  fs::remove(p);
}

TEST(Persistence, EmptyFileIsEmptyDataset) {
  const auto p = temp_file("empty.jsonl");
  std::ofstream(p).close();
  EXPECT_TRUE(ps::load_dataset(p.string()).items.empty());
  fs::remove(p);
}

TEST(Persistence, UnknownSchemaVersionIsRejected) {
  const auto p = temp_file("schema.jsonl");
  std::ofstream(p) << R"({"format":"pricesuggest-items","schema_version":99,"visual_dim":2,"vocab_size":10})" << '\n';
  EXPECT_THROW(ps::load_dataset(p.string()), ps::FormatError);
  fs::remove(p);
}

TEST(Split, SizesDisjointExhaustive) {
  const auto d = ps::generate_synthetic(small_synthetic(7, 1000));
  const auto s = ps::split_dataset(d.items, {}, 11);
  EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), 1000u);
  std::set<std::string> ids;
  for (const auto* part : {&s.train, &s.validation, &s.test})
    for (const auto& r : *part) EXPECT_TRUE(ids.insert(r.id).second);
  EXPECT_EQ(ids.size(), 1000u);
}

TEST(Split, SameSeedSameSplit) {
  const auto d = ps::generate_synthetic(small_synthetic(7, 300));
  const auto a = ps::split_dataset(d.items, {}, 5), b = ps::split_dataset(d.items, {}, 5);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, DefaultProportionsAtHundredItems) {
  const auto d = ps::generate_synthetic(small_synthetic(7, 100));
  const auto s = ps::split_dataset(d.items, {}, 1);
  EXPECT_EQ(s.train.size(), 78u);
  EXPECT_EQ(s.validation.size(), 4u);
  EXPECT_EQ(s.test.size(), 18u);
}

TEST(Split, FractionsMustSumToOne) {
  const auto d = ps::generate_synthetic(small_synthetic(7, 10));
  EXPECT_THROW(ps::split_dataset(d.items, {0.7, 0.1, 0.1}, 1), ps::ConfigError);
  EXPECT_NO_THROW(ps::split_dataset(d.items, {0.5, 0.25, 0.25 + 1e-12}, 1));
}
