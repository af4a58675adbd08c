#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pers16/prompt_forge.hpp"
#include "pers16/scoring.hpp"
#include "pers16/traits.hpp"

namespace pers16 {

class AnalysisError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double euclidean_distance(const TraitMap<double>& a, const TraitMap<double>& b) {
  double sum = 0.0;
  for (auto t : kAllTraits) {
    const double d = a[t] - b[t];
    sum += d * d;
  }
  return std::sqrt(sum);
}

inline TraitMap<double> mean_map(const TraitProfile& p) {
  TraitMap<double> m;
  for (auto t : kAllTraits) m[t] = p.scores[t].mean;
  return m;
}

// Distance between two models' mean vectors over all sixteen traits.
inline double euclidean_distance(const TraitProfile& a, const TraitProfile& b) {
  if (a.condition.kind != b.condition.kind) {
    throw AnalysisError("cannot compare profiles from different condition kinds (" +
                        std::string(to_string(a.condition.kind)) + " vs " + std::string(to_string(b.condition.kind)) +
                        ")");
  }
  return euclidean_distance(mean_map(a), mean_map(b));
}

// Spread of one trait's means across M models. Population mode divides by M,
// sample mode by M - 1.
inline double cross_model_sd(std::span<const double> means, VarianceMode mode) {
  const std::size_t m = means.size();
  if (m < 2) throw AnalysisError("cross-model SD needs at least two models");
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(m);
  double ss = 0.0;
  for (double v : means) ss += (v - mean) * (v - mean);
  const double denom = mode == VarianceMode::Population ? static_cast<double>(m) : static_cast<double>(m - 1);
  return std::sqrt(ss / denom);
}

inline double cross_model_sd(const std::vector<double>& means, VarianceMode mode) {
  return cross_model_sd(std::span<const double>(means), mode);
}

struct CrossModelStat {
  TraitId trait{};
  std::vector<double> per_model_means;
  double sd_sample = 0.0;
  double sd_population = 0.0;
};

inline std::vector<CrossModelStat> cross_model_stats(const std::vector<TraitProfile>& profiles) {
  std::vector<CrossModelStat> out;
  for (auto t : kAllTraits) {
    CrossModelStat s;
    s.trait = t;
    for (const auto& p : profiles) s.per_model_means.push_back(p.scores[t].mean);
    s.sd_sample = cross_model_sd(s.per_model_means, VarianceMode::Sample);
    s.sd_population = cross_model_sd(s.per_model_means, VarianceMode::Population);
    out.push_back(std::move(s));
  }
  return out;
}

inline double delta(double induced_mean, double neutral_mean) { return induced_mean - neutral_mean; }

struct DeltaVector {
  std::string model_id;
  ConditionKind family = ConditionKind::SAC_INDUCED;
  TraitId target_trait{};
  std::optional<int> level;
  TraitMap<double> deltas;
};

inline ConditionKind neutral_family_of(ConditionKind induced) {
  switch (induced) {
    case ConditionKind::P2_INDUCED: return ConditionKind::MPI_NEUTRAL;
    case ConditionKind::SAC_INDUCED: return ConditionKind::SAC_NEUTRAL;
    default: throw AnalysisError(std::string(to_string(induced)) + " is not an induced condition");
  }
}

inline DeltaVector delta_profile(const TraitProfile& induced, const TraitProfile& neutral) {
  const ConditionKind family = induced.condition.kind;
  if (neutral_family_of(family) != neutral.condition.kind) {
    throw AnalysisError("family mismatch: " + std::string(to_string(family)) + " must be compared against " +
                        std::string(to_string(neutral_family_of(family))) + ", not " +
                        std::string(to_string(neutral.condition.kind)));
  }
  if (induced.model_id != neutral.model_id) {
    throw AnalysisError("delta across different models (" + induced.model_id + " vs " + neutral.model_id + ")");
  }
  DeltaVector v;
  v.model_id = induced.model_id;
  v.family = family;
  v.target_trait = *induced.condition.induced_trait;
  v.level = induced.condition.level;
  for (auto t : kAllTraits) {
    const double d = delta(induced.scores[t].mean, neutral.scores[t].mean);
    if (!(d >= -4.0 && d <= 4.0)) throw AnalysisError("delta outside [-4,4] for " + std::string(to_string(t)));
    v.deltas[t] = d;
  }
  return v;
}

struct CoMover {
  TraitId trait{};
  double delta = 0.0;
  bool operator==(const CoMover&) const = default;
};

struct CoMoverReport {
  TraitId target_trait{};
  std::optional<int> level;  // empty for P2 and for the across-level aggregate
  CoMover first;
  CoMover second;
};

namespace detail {
// Two largest |score| over non-target traits; ties go to the earlier trait in
// canonical order. `score` yields (magnitude, signed delta).
template <typename Score>
std::pair<CoMover, CoMover> top_two(TraitId target, Score&& score) {
  std::vector<TraitId> candidates;
  for (auto t : kAllTraits) {
    if (t != target) candidates.push_back(t);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](TraitId a, TraitId b) { return score(a).first > score(b).first; });
  return {{candidates[0], score(candidates[0]).second}, {candidates[1], score(candidates[1]).second}};
}
}  // namespace detail

inline CoMoverReport co_movers(const DeltaVector& v) {
  auto [first, second] =
      detail::top_two(v.target_trait, [&](TraitId t) { return std::pair{std::abs(v.deltas[t]), v.deltas[t]}; });
  return {v.target_trait, v.level, first, second};
}

// Co-movers for one target across several levels: each trait is ranked by
// its largest |delta| over the levels, reported with that level's signed
// delta (lowest level wins ties).
inline CoMoverReport aggregate_co_movers(std::span<const DeltaVector> per_level) {
  if (per_level.empty()) throw AnalysisError("aggregate co-movers need at least one delta vector");
  const TraitId target = per_level.front().target_trait;
  for (const auto& v : per_level) {
    if (v.target_trait != target || v.model_id != per_level.front().model_id) {
      throw AnalysisError("aggregate co-movers mix targets or models");
    }
  }
  std::vector<const DeltaVector*> ordered;
  for (const auto& v : per_level) ordered.push_back(&v);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const DeltaVector* a, const DeltaVector* b) { return a->level.value_or(0) < b->level.value_or(0); });
  auto score = [&](TraitId t) {
    double best = -1.0;
    double signed_best = 0.0;
    for (const auto* v : ordered) {
      if (std::abs(v->deltas[t]) > best) {
        best = std::abs(v->deltas[t]);
        signed_best = v->deltas[t];
      }
    }
    return std::pair{best, signed_best};
  };
  auto [first, second] = detail::top_two(target, score);
  return {target, std::nullopt, first, second};
}

inline json to_json(const DeltaVector& v) {
  json deltas = json::object();
  for (auto t : kAllTraits) deltas[std::string(to_string(t))] = v.deltas[t];
  return {{"model_id", v.model_id},
          {"family", std::string(to_string(v.family))},
          {"target_trait", std::string(to_string(v.target_trait))},
          {"level", v.level ? json(*v.level) : json(nullptr)},
          {"deltas", deltas}};
}

inline json to_json(const CoMoverReport& r) {
  return {{"target_trait", std::string(to_string(r.target_trait))},
          {"level", r.level ? json(*r.level) : json(nullptr)},
          {"first", {{"trait", std::string(to_string(r.first.trait))}, {"delta", r.first.delta}}},
          {"second", {{"trait", std::string(to_string(r.second.trait))}, {"delta", r.second.delta}}}};
}

}  // namespace pers16
