#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "pers16/scoring.hpp"
#include "test_support.hpp"

using namespace pers16;

TEST(KeyScore, AllTenCases) {
  const std::pair<char, int> positive[] = {{'A', 5}, {'B', 4}, {'C', 3}, {'D', 2}, {'E', 1}};
  for (auto [opt, want] : positive) {
    EXPECT_EQ(key_score(opt, Polarity::Positive), want);
    EXPECT_EQ(key_score(opt, Polarity::Negative), 6 - want);
  }
  EXPECT_THROW(key_score('F', Polarity::Positive), std::invalid_argument);
}

TEST(KeyScore, BijectionPerPolarity) {
  for (auto key : {Polarity::Positive, Polarity::Negative}) {
    std::set<int> image;
    for (char c = 'A'; c <= 'E'; ++c) image.insert(key_score(c, key));
    EXPECT_EQ(image, (std::set<int>{1, 2, 3, 4, 5}));
  }
}

// Flipping every item's key while mirroring every answer leaves the score
// unchanged.
TEST(KeyScore, ReversalInvariance) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::optional<int>> a, b;
    for (int i = 0; i < 13; ++i) {
      const char opt = static_cast<char>('A' + rng() % 5);
      const auto key = rng() % 2 ? Polarity::Positive : Polarity::Negative;
      const auto flipped = key == Polarity::Positive ? Polarity::Negative : Polarity::Positive;
      const char mirrored = static_cast<char>('E' - (opt - 'A'));
      a.push_back(key_score(opt, key));
      b.push_back(key_score(mirrored, flipped));
    }
    EXPECT_EQ(trait_score(TraitId::WARMTH, a), trait_score(TraitId::WARMTH, b));
  }
}

TEST(TraitScore, MeanAndVariances) {
  const auto s = trait_score(TraitId::WARMTH, std::vector<std::optional<int>>{5, 5, 4, 4});
  EXPECT_DOUBLE_EQ(s.mean, 4.5);
  EXPECT_DOUBLE_EQ(s.variance_population, 0.25);
  ASSERT_TRUE(s.variance_sample);
  EXPECT_DOUBLE_EQ(*s.variance_sample, 1.0 / 3.0);
  EXPECT_EQ(s.n, 4u);
}

TEST(TraitScore, MissingExcludedAndCounted) {
  const auto s = trait_score(TraitId::ANXIETY, std::vector<std::optional<int>>{2, std::nullopt, 4});
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_EQ(s.n, 2u);
  EXPECT_EQ(s.n_missing, 1u);
}

TEST(TraitScore, SingleResponseHasNoSampleVariance) {
  const auto s = trait_score(TraitId::ANXIETY, std::vector<std::optional<int>>{3});
  EXPECT_FALSE(s.variance_sample);
  EXPECT_DOUBLE_EQ(s.variance_population, 0.0);
}

TEST(TraitScore, NoDataIsAnError) {
  EXPECT_THROW(trait_score(TraitId::ANXIETY, std::vector<std::optional<int>>{std::nullopt}), NoDataError);
  EXPECT_THROW(trait_score(TraitId::ANXIETY, std::vector<std::optional<int>>{}), NoDataError);
  EXPECT_THROW(trait_score(TraitId::ANXIETY, std::vector<std::optional<int>>{6}), std::invalid_argument);
}

TEST(TraitScore, PermutationInvariantAndBounded) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::optional<int>> v;
    const int n = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) v.push_back(1 + static_cast<int>(rng() % 5));
    const auto s = trait_score(TraitId::RESERVE, v);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(trait_score(TraitId::RESERVE, v), s);
    EXPECT_GE(s.mean, 1.0);
    EXPECT_LE(s.mean, 5.0);
    EXPECT_GE(s.variance_population, 0.0);
    EXPECT_LE(s.variance_population, 4.0);
  }
}

TEST(SacScore, RequiresFullGrid) {
  std::vector<SacResponse> full;
  for (auto f : kAllFactors) {
    for (int q = 0; q < 3; ++q) full.push_back({f, q, 4});
  }
  EXPECT_DOUBLE_EQ(sac_trait_score(TraitId::WARMTH, full).mean, 4.0);
  auto short_grid = full;
  short_grid.pop_back();
  EXPECT_THROW(sac_trait_score(TraitId::WARMTH, short_grid), std::invalid_argument);
  auto with_missing = full;
  with_missing[0].digit.reset();
  EXPECT_EQ(sac_trait_score(TraitId::WARMTH, with_missing).n_missing, 1u);
}

TEST(Format, RoundHalfUpTwoDecimals) {
  EXPECT_EQ(format_2dp(2.675), "2.68");
  EXPECT_EQ(format_2dp(1.005), "1.01");
  EXPECT_EQ(format_2dp(60.0 / 13.0), "4.62");
  EXPECT_EQ(format_2dp(0.0), "0.00");
  EXPECT_EQ(format_2dp(-0.001), "0.00");
  EXPECT_EQ(format_2dp(-1.25), "-1.25");
}

TEST(Profile, JsonRoundTrip) {
  TraitMap<double> means{3.0};
  means[TraitId::WARMTH] = 4.6;
  auto p = pers16::testing::make_profile("m", Condition::sac_induced(TraitId::WARMTH, 5), means);
  const auto back = profile_from_json(to_json(p));
  EXPECT_EQ(back.model_id, "m");
  EXPECT_EQ(back.condition, p.condition);
  EXPECT_EQ(back.manifest_ref, p.manifest_ref);
  EXPECT_DOUBLE_EQ(back.scores[TraitId::WARMTH].mean, 4.6);
  auto j = to_json(p);
  j["scores"].erase(0);
  EXPECT_THROW(profile_from_json(j), std::invalid_argument);
}

TEST(TraitScore, KeyedLettersExample) {
  std::vector<std::optional<int>> v;
  for (char c : {'A', 'B', 'A', 'C'}) v.push_back(key_score(c, Polarity::Positive));
  const auto s = trait_score(TraitId::WARMTH, v);
  EXPECT_DOUBLE_EQ(s.mean, 4.25);
  EXPECT_DOUBLE_EQ(s.variance_population, 0.6875);
}

TEST(SacScore, SpreadDigitsExample) {
  std::vector<SacResponse> r;
  int k = 0;
  for (auto f : kAllFactors) {
    for (int q = 0; q < 3; ++q) r.push_back({f, q, k++ < 5 ? 5 : (k <= 10 ? 3 : 1)});
  }
  const auto s = sac_trait_score(TraitId::WARMTH, r);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_NEAR(s.variance_population, 8.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.variance(VarianceMode::Sample), 40.0 / 14.0, 1e-12);
  EXPECT_LE(s.variance(VarianceMode::Sample), 5.0);
}
