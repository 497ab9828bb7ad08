#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pricesuggest/features.hpp"

namespace ps = pricesuggest;

namespace {

ps::ItemRecord record(std::string cat, ps::SaleStatus s, double price) {
  ps::ItemRecord r;
  r.id = cat + std::to_string(price);
  r.category = std::move(cat);
  r.status = s;
  r.log_price = price;
  r.visual = ps::Vector::Zero(4);
  return r;
}

}  // namespace

TEST(PadOrTruncate, PadsShortDescriptions) {
  const auto tv = ps::pad_or_truncate(std::vector<std::int64_t>{5, 7}, 1000);
  EXPECT_EQ(tv.ids[0], 5u);
  EXPECT_EQ(tv.ids[1], 7u);
  for (std::size_t i = 2; i < ps::kTokenLength; ++i) EXPECT_EQ(tv.ids[i], 0u);
  EXPECT_EQ(tv.used_length(), 2u);
}

TEST(PadOrTruncate, KeepsFirst32) {
  std::vector<std::int64_t> ids(40);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i + 1);
  const auto tv = ps::pad_or_truncate(ids, 1000);
  for (std::size_t i = 0; i < ps::kTokenLength; ++i) EXPECT_EQ(tv.ids[i], i + 1);
}

TEST(PadOrTruncate, EmptyIsAllPadding) {
  EXPECT_EQ(ps::pad_or_truncate(std::vector<std::int64_t>{}, 10), ps::TokenVector{});
}

TEST(PadOrTruncate, OutOfVocabularyIdThrowsEvenPastPosition32) {
  EXPECT_THROW(ps::pad_or_truncate(std::vector<std::int64_t>{3, 10}, 10), ps::DimensionError);
  EXPECT_THROW(ps::pad_or_truncate(std::vector<std::int64_t>{-1}, 10), ps::DimensionError);
  std::vector<std::int64_t> long_ids(40, 1);
  long_ids.back() = 99;
  EXPECT_THROW(ps::pad_or_truncate(long_ids, 10), ps::DimensionError);
}

TEST(EmbedTokens, Lookups) {
  ps::EmbeddingTable e(3, 1);
  e.table << 0, 2, 3;
  const auto v = ps::embed_tokens(ps::pad_or_truncate(std::vector<std::int64_t>{1, 2}, 3), e);
  ASSERT_EQ(v.size(), 32);
  EXPECT_EQ(v[0], 2.0);
  EXPECT_EQ(v[1], 3.0);
  EXPECT_TRUE(v.tail(30).isZero(0));

  EXPECT_TRUE(ps::embed_tokens(ps::TokenVector{}, e).isZero(0));

  ps::TokenVector same;
  same.ids.fill(2);
  EXPECT_TRUE(ps::embed_tokens(same, e).isConstant(3.0));
}

TEST(EmbedTokens, RandomInitKeepsPaddingRowZero) {
  std::mt19937_64 rng(1);
  ps::EmbeddingTable e(50, 8);
  e.init_uniform(rng);
  EXPECT_TRUE(e.table.row(0).isZero(0));
  EXPECT_LE(e.table.cwiseAbs().maxCoeff(), 0.05);
  EXPECT_GT(e.table.cwiseAbs().maxCoeff(), 0.0);
}

TEST(EmbedTokens, GradientNeverReachesPaddingRow) {
  ps::Matrix g = ps::Matrix::Zero(10, 2);
  const auto tv = ps::pad_or_truncate(std::vector<std::int64_t>{3, 0, 3, 4}, 10);
  ps::accumulate_embedding_grad(tv, ps::Vector::Ones(64), g);
  EXPECT_TRUE(g.row(0).isZero(0));
  EXPECT_EQ(g(3, 0), 2.0);
  EXPECT_EQ(g(4, 1), 1.0);
}

TEST(AttentionFuse, EqualLogitsHalveBoth) {
  ps::FusionLayer f(2, 3);
  f.projection.weights.setZero();
  f.projection.bias << 0.7, 0.7;
  const ps::Vector v = ps::Vector::Constant(2, 4.0), t = ps::Vector::Constant(3, -2.0);
  const auto out = ps::attention_fuse(v, t, f);
  EXPECT_EQ(out.weights, (ps::Vector(2) << 0.5, 0.5).finished());
  EXPECT_TRUE(out.visual.isApprox(0.5 * v));
  EXPECT_TRUE(out.textual.isApprox(0.5 * t));
}

TEST(AttentionFuse, SaturatedLogits) {
  ps::FusionLayer f(2, 3);
  f.projection.weights.setZero();
  f.projection.bias << 20.0, -20.0;
  const auto out = ps::attention_fuse(ps::Vector::Ones(2), ps::Vector::Ones(3), f);
  EXPECT_NEAR(out.weights[0], 1.0, 1e-15);
  EXPECT_LT(out.textual.cwiseAbs().maxCoeff(), 1e-17);
}

TEST(AttentionFuse, ZeroInputsZeroBias) {
  std::mt19937_64 rng(2);
  ps::FusionLayer f(3, 5);
  f.projection.init_glorot(rng);
  const auto out = ps::attention_fuse(ps::Vector::Zero(3), ps::Vector::Zero(5), f);
  EXPECT_EQ(out.weights, (ps::Vector(2) << 0.5, 0.5).finished());
}

TEST(AttentionFuse, WeightsAreAProbabilityPairAndArgmaxSurvivesLogitScaling) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 300; ++trial) {
    ps::FusionLayer f(4, 6);
    f.projection.init_glorot(rng);
    ps::Vector v(4), t(6);
    for (auto& x : v) x = n(rng);
    for (auto& x : t) x = n(rng);
    const auto out = ps::attention_fuse(v, t, f);
    EXPECT_NEAR(out.weights.sum(), 1.0, 1e-15);
    EXPECT_GT(out.weights.minCoeff(), 0.0);
    EXPECT_LT(out.weights.maxCoeff(), 1.0);
    ps::FusionLayer scaled = f;
    scaled.projection.weights *= 3.7;
    scaled.projection.bias *= 3.7;
    const auto s = ps::attention_fuse(v, t, scaled);
    if (out.weights[0] != out.weights[1]) EXPECT_EQ(out.weights[0] > out.weights[1], s.weights[0] > s.weights[1]);
  }
}

TEST(AttentionFuse, WrongSizesThrow) {
  ps::FusionLayer f(2, 3);
  EXPECT_THROW(ps::attention_fuse(ps::Vector::Zero(3), ps::Vector::Zero(3), f), ps::DimensionError);
}

TEST(Statistics, QuartilesOfOneToFour) {
  std::vector<ps::ItemRecord> corpus;
  for (double p : {3.0, 1.0, 4.0, 2.0}) corpus.push_back(record("a", ps::SaleStatus::sold, p));
  const auto t = ps::compute_statistical_features(corpus);
  const auto& s = t.per_category.at("a").sold;
  EXPECT_DOUBLE_EQ(s.q1, 1.75);
  EXPECT_DOUBLE_EQ(s.q2, 2.5);
  EXPECT_DOUBLE_EQ(s.q3, 3.25);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_TRUE(t.per_category.at("a").unsold_fallback);
}

TEST(Statistics, QuantileMatchesRankOracle) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(3.0, 1.0);
  for (std::size_t size = 1; size < 60; ++size) {
    std::vector<double> xs(size);
    for (auto& x : xs) x = n(rng);
    auto sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    for (double q : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0})
      EXPECT_NEAR(ps::quantile_linear(sorted, q), oracle::quantile(xs, q), 1e-12);
  }
}

TEST(Statistics, SingleItemGivesConstantBlock) {
  const std::vector<ps::ItemRecord> corpus{record("a", ps::SaleStatus::sold, 2.2)};
  const auto s = ps::compute_statistical_features(corpus).per_category.at("a").sold;
  EXPECT_EQ(s, (ps::PriceSummary{2.2, 2.2, 2.2, 2.2}));
}

TEST(Statistics, IdenticalCategoriesGetIdenticalBlocks) {
  std::vector<ps::ItemRecord> corpus;
  for (double p : {1.0, 1.5, 4.0}) {
    corpus.push_back(record("x", ps::SaleStatus::sold, p));
    corpus.push_back(record("y", ps::SaleStatus::sold, p));
    corpus.push_back(record("x", ps::SaleStatus::unsold, p + 0.2));
    corpus.push_back(record("y", ps::SaleStatus::unsold, p + 0.2));
  }
  const auto t = ps::compute_statistical_features(corpus);
  EXPECT_EQ(t.per_category.at("x"), t.per_category.at("y"));
  EXPECT_EQ(t.features_for("x"), t.features_for("y"));
}

TEST(Statistics, UnseenCategoryFallsBackToGlobal) {
  const std::vector<ps::ItemRecord> corpus{record("a", ps::SaleStatus::sold, 1.0), record("b", ps::SaleStatus::sold, 3.0)};
  const auto t = ps::compute_statistical_features(corpus);
  const auto f = t.features_for("zzz");
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(f[k], f[k + 8]);
  EXPECT_EQ(f[1], 2.0);
}

TEST(Statistics, PermutationInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(3.0, 1.0);
  std::vector<ps::ItemRecord> corpus;
  for (int i = 0; i < 300; ++i)
    corpus.push_back(record(i % 3 ? "a" : "b", i % 4 ? ps::SaleStatus::sold : ps::SaleStatus::unsold, n(rng)));
  const auto t = ps::compute_statistical_features(corpus);
  std::shuffle(corpus.begin(), corpus.end(), rng);
  const auto u = ps::compute_statistical_features(corpus);
  EXPECT_EQ(t.global, u.global);
  EXPECT_EQ(t.per_category, u.per_category);
}

TEST(Statistics, EmptyCorpusThrows) {
  EXPECT_THROW(ps::compute_statistical_features({}), ps::Error);
}

TEST(Standardizer, ZeroMeanUnitVarianceOnTrainingItems) {
  std::vector<ps::ItemRecord> corpus;
  for (int i = 0; i < 40; ++i)
    corpus.push_back(record(i % 2 ? "a" : "b", i % 3 ? ps::SaleStatus::sold : ps::SaleStatus::unsold, 0.1 * i));
  const auto t = ps::compute_statistical_features(corpus);
  const auto s = ps::Standardizer::fit(corpus, t);
  ps::Matrix z(16, 40);
  for (int i = 0; i < 40; ++i) z.col(i) = s.apply(t.features_for(corpus[static_cast<std::size_t>(i)].category));
  for (Eigen::Index k = 0; k < 16; ++k) {
    EXPECT_NEAR(z.row(k).mean(), 0.0, 1e-12);
    const double var = z.row(k).squaredNorm() / 40.0;
    // global columns are constant and stay at zero
    if (k < 8) EXPECT_NEAR(var, 0.0, 1e-20);
    else EXPECT_NEAR(var, 1.0, 1e-12);
  }
}

TEST(AssembleInput, ShapeAndAblations) {
  std::mt19937_64 rng(6);
  ps::ItemRecord r = record("a", ps::SaleStatus::sold, 1.0);
  r.visual = ps::Vector::Random(4);
  r.tokens = ps::pad_or_truncate(std::vector<std::int64_t>{1, 2, 3}, 5);
  ps::EmbeddingTable e(5, 2);
  e.init_uniform(rng);
  ps::FusionLayer f(4, 64);
  f.projection.init_glorot(rng);
  const ps::Vector stats = ps::Vector::LinSpaced(16, -1.0, 1.0);

  const ps::Vector full = ps::assemble_input(r, e, f, stats, ps::Ablation::none);
  EXPECT_EQ(full.size(), 4 + 32 * 2 + 16);
  EXPECT_EQ(full.tail(16), stats);

  const ps::Vector no_img = ps::assemble_input(r, e, f, stats, ps::Ablation::no_image);
  EXPECT_TRUE(no_img.head(4).isZero(0));
  EXPECT_EQ(no_img.tail(16), stats);

  const ps::Vector no_txt = ps::assemble_input(r, e, f, stats, ps::Ablation::no_text);
  EXPECT_TRUE(no_txt.segment(4, 64).isZero(0));

  const ps::Vector raw = ps::assemble_input(r, e, f, stats, ps::Ablation::no_attention);
  EXPECT_EQ(raw.head(4), r.visual);
  EXPECT_EQ(raw.segment(4, 64), ps::embed_tokens(r.tokens, e));
}

TEST(Ablation, NamesRoundTrip) {
  for (auto a : {ps::Ablation::none, ps::Ablation::no_image, ps::Ablation::no_text, ps::Ablation::no_attention})
    EXPECT_EQ(ps::parse_ablation(ps::to_string(a)), a);
  EXPECT_THROW(ps::parse_ablation("no_price"), ps::ConfigError);
}
