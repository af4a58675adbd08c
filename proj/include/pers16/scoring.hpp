#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pers16/item_bank.hpp"
#include "pers16/prompt_forge.hpp"
#include "pers16/traits.hpp"

namespace pers16 {

class NoDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class VarianceMode { Population, Sample };

inline constexpr std::string_view to_string(VarianceMode m) {
  return m == VarianceMode::Population ? "population" : "sample";
}

inline VarianceMode variance_mode_from_string(std::string_view s) {
  if (s == "population") return VarianceMode::Population;
  if (s == "sample") return VarianceMode::Sample;
  throw std::invalid_argument("variance mode must be 'population' or 'sample', got '" + std::string(s) + "'");
}

// f(option, key): A=5 .. E=1 for positively keyed items, reversed otherwise.
inline int key_score(char option, Polarity key) {
  if (option < 'A' || option > 'E') throw std::invalid_argument("option must be A-E");
  const int forward = 5 - (option - 'A');
  return key == Polarity::Positive ? forward : 6 - forward;
}

struct TraitScore {
  TraitId trait{};
  double mean = 0.0;
  double variance_population = 0.0;
  // Undefined for a single response.
  std::optional<double> variance_sample;
  std::size_t n = 0;
  std::size_t n_missing = 0;

  double variance(VarianceMode mode) const {
    if (mode == VarianceMode::Population) return variance_population;
    return variance_sample.value_or(0.0);
  }
  bool operator==(const TraitScore&) const = default;
};

// Mean and variances over integer-valued Likert responses. Missing values are
// excluded from the statistics and counted separately. Sums stay exact in
// integers so permutation of the input never changes the result.
inline TraitScore trait_score(TraitId trait, std::span<const std::optional<int>> values) {
  TraitScore s;
  s.trait = trait;
  std::int64_t sum = 0;
  std::int64_t sum_sq = 0;
  for (const auto& v : values) {
    if (!v) {
      ++s.n_missing;
      continue;
    }
    if (*v < 1 || *v > 5) throw std::invalid_argument("response score outside 1..5");
    ++s.n;
    sum += *v;
    sum_sq += static_cast<std::int64_t>(*v) * *v;
  }
  if (s.n == 0) throw NoDataError("no scored responses for trait " + std::string(to_string(trait)));
  const auto n = static_cast<std::int64_t>(s.n);
  const std::int64_t ss_scaled = n * sum_sq - sum * sum;  // n * sum of squared deviations
  s.mean = static_cast<double>(sum) / static_cast<double>(n);
  s.variance_population = static_cast<double>(ss_scaled) / static_cast<double>(n * n);
  if (n >= 2) s.variance_sample = static_cast<double>(ss_scaled) / static_cast<double>(n * (n - 1));
  return s;
}

inline TraitScore trait_score(TraitId trait, const std::vector<std::optional<int>>& values) {
  return trait_score(trait, std::span<const std::optional<int>>(values));
}

struct SacResponse {
  FactorId factor{};
  int question_index = 0;
  std::optional<int> digit;
};

// Aggregates the 5 factors x 3 questions of one observed trait under one
// condition (or whole multiples of that grid when repeats are used).
inline TraitScore sac_trait_score(TraitId trait, std::span<const SacResponse> responses) {
  std::set<std::pair<FactorId, int>> cells;
  std::vector<std::optional<int>> values;
  values.reserve(responses.size());
  for (const auto& r : responses) {
    if (r.question_index < 0 || r.question_index >= static_cast<int>(kQuestionsPerTrait)) {
      throw std::invalid_argument("question index outside 0..2");
    }
    cells.emplace(r.factor, r.question_index);
    values.push_back(r.digit);
  }
  constexpr std::size_t grid = kFactorCount * kQuestionsPerTrait;
  if (cells.size() != grid || responses.size() % grid != 0) {
    throw std::invalid_argument("SAC responses for " + std::string(to_string(trait)) +
                                " do not cover the 5 factor x 3 question grid");
  }
  return trait_score(trait, values);
}

struct TraitProfile {
  std::string model_id;
  Condition condition;
  std::string bank_digest;
  std::string manifest_ref;  // run_id of the producing run
  TraitMap<TraitScore> scores;

  std::vector<double> means() const {
    std::vector<double> out;
    for (auto t : kAllTraits) out.push_back(scores[t].mean);
    return out;
  }
};

inline json to_json(const TraitScore& s) {
  json j{{"trait", std::string(to_string(s.trait))},
         {"mean", s.mean},
         {"variance_population", s.variance_population},
         {"n", s.n},
         {"n_missing", s.n_missing}};
  j["variance_sample"] = s.variance_sample ? json(*s.variance_sample) : json(nullptr);
  return j;
}

inline json to_json(const TraitProfile& p) {
  json scores = json::array();
  for (auto t : kAllTraits) scores.push_back(to_json(p.scores[t]));
  return {{"model_id", p.model_id},
          {"condition", to_json(p.condition)},
          {"bank_digest", p.bank_digest},
          {"run_id", p.manifest_ref},
          {"scores", scores}};
}

inline TraitProfile profile_from_json(const json& j) {
  TraitProfile p;
  p.model_id = j.at("model_id").get<std::string>();
  p.condition = condition_from_json(j.at("condition"));
  p.bank_digest = j.at("bank_digest").get<std::string>();
  p.manifest_ref = j.value("run_id", std::string{});
  std::set<TraitId> seen;
  for (const auto& s : j.at("scores")) {
    TraitScore ts;
    ts.trait = trait_from_string(s.at("trait").get<std::string>());
    ts.mean = s.at("mean").get<double>();
    ts.variance_population = s.value("variance_population", 0.0);
    if (s.contains("variance_sample") && !s.at("variance_sample").is_null()) {
      ts.variance_sample = s.at("variance_sample").get<double>();
    }
    ts.n = s.value("n", std::size_t{0});
    ts.n_missing = s.value("n_missing", std::size_t{0});
    if (!(ts.mean >= 1.0 && ts.mean <= 5.0)) {
      throw std::invalid_argument("profile mean for " + std::string(to_string(ts.trait)) + " outside [1,5]");
    }
    if (!seen.insert(ts.trait).second) throw std::invalid_argument("duplicate trait in profile");
    p.scores[ts.trait] = ts;
  }
  if (seen.size() != kTraitCount) throw std::invalid_argument("profile must contain all 16 traits");
  return p;
}

// Presentation rounding for CSV output: 2 decimals, round half up. The small
// offset absorbs binary representation error (2.675 is stored as 2.67499...).
inline std::string format_2dp(double v) {
  const double scaled = std::floor(v * 100.0 + 0.5 + 1e-9);
  const double r = scaled / 100.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", r == 0.0 ? 0.0 : r);
  return buf;
}

}  // namespace pers16
