#pragma once

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "pers16/digest.hpp"
#include "pers16/item_bank.hpp"
#include "pers16/prompt_forge.hpp"
#include "pers16/scoring.hpp"
#include "pers16/traits.hpp"

namespace pers16 {

// Ground-truth parameters of the deterministic answer oracle.
// coupling[t][o] is the effect on observed trait o of inducing target t.
struct GroundTruth {
  TraitMap<double> theta{3.0};
  std::array<std::array<double, kTraitCount>, kTraitCount> coupling{};
  std::uint64_t seed = 0;
  // Probability of a uniform +/-1 step; 0 disables noise.
  double noise_probability = 0.0;

  GroundTruth() {
    for (std::size_t i = 0; i < kTraitCount; ++i) coupling[i][i] = 1.0;
  }

  double coupling_at(TraitId target, TraitId observed) const { return coupling[index_of(target)][index_of(observed)]; }

  void validate() const {
    for (auto t : kAllTraits) {
      if (!(theta[t] >= 1.0 && theta[t] <= 5.0)) {
        throw std::invalid_argument("theta for " + std::string(to_string(t)) + " must lie in [1,5]");
      }
    }
    for (std::size_t i = 0; i < kTraitCount; ++i) {
      if (coupling[i][i] != 1.0) throw std::invalid_argument("coupling diagonal must be 1");
      for (std::size_t j = 0; j < kTraitCount; ++j) {
        if (!(coupling[i][j] >= -2.0 && coupling[i][j] <= 2.0)) {
          throw std::invalid_argument("coupling entries must lie in [-2,2]");
        }
      }
    }
    if (!(noise_probability >= 0.0 && noise_probability <= 1.0)) {
      throw std::invalid_argument("noise probability must lie in [0,1]");
    }
  }
};

inline json to_json(const GroundTruth& gt) {
  json theta = json::object();
  for (auto t : kAllTraits) theta[std::string(to_string(t))] = gt.theta[t];
  return {{"theta", theta}, {"coupling", gt.coupling}, {"seed", gt.seed}, {"noise_probability", gt.noise_probability}};
}

// theta must name all 16 traits; coupling defaults to the identity.
inline GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth gt;
  const auto& theta = j.at("theta");
  for (auto t : kAllTraits) {
    const std::string name(to_string(t));
    if (!theta.contains(name)) throw std::invalid_argument("ground truth theta misses " + name);
    gt.theta[t] = theta.at(name).get<double>();
  }
  if (j.contains("coupling")) {
    const auto& c = j.at("coupling");
    if (!c.is_array() || c.size() != kTraitCount) throw std::invalid_argument("coupling must be 16x16");
    for (std::size_t i = 0; i < kTraitCount; ++i) {
      if (!c[i].is_array() || c[i].size() != kTraitCount) throw std::invalid_argument("coupling must be 16x16");
      for (std::size_t k = 0; k < kTraitCount; ++k) gt.coupling[i][k] = c[i][k].get<double>();
    }
  }
  gt.seed = j.value("seed", std::uint64_t{0});
  gt.noise_probability = j.value("noise_probability", 0.0);
  gt.validate();
  return gt;
}

inline GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read ground truth file '" + path.string() + "'");
  return ground_truth_from_json(json::parse(in));
}

inline int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

inline int clamp_1_5(int v) { return std::clamp(v, 1, 5); }

// Letter whose keyed score equals the rounded trait intensity.
inline char answer_mpi(const GroundTruth& gt, const Item& item) {
  const int target = clamp_1_5(round_half_up(gt.theta[item.trait]));
  return item.key == Polarity::Positive ? static_cast<char>('A' + (5 - target)) : static_cast<char>('A' + (target - 1));
}

inline int answer_sac(const GroundTruth& gt, const PromptJob& job) {
  const TraitId o = job.observed_trait;
  switch (job.condition.kind) {
    case ConditionKind::SAC_NEUTRAL:
      return clamp_1_5(round_half_up(gt.theta[o]));
    case ConditionKind::SAC_INDUCED: {
      const TraitId t = *job.condition.induced_trait;
      // The induced trait itself moves a full step per level so a midpoint
      // respondent lands on the requested level; other traits follow the
      // coupling at half slope.
      const int step = *job.condition.level - 3;
      const double shift = o == t ? step : gt.coupling_at(t, o) * step / 2.0;
      return clamp_1_5(round_half_up(gt.theta[o] + shift));
    }
    default:
      throw std::invalid_argument("answer_sac needs a SAC job");
  }
}

// Answer for any job kind, with the optional seeded noise applied per job.
// P2 jobs are answered like the neutral inventory shifted along the coupling
// row of the induced trait at full strength.
inline std::string synthetic_answer(const GroundTruth& gt, const ItemBank& bank, const PromptJob& job) {
  int score = 0;
  Polarity key = Polarity::Positive;
  if (is_sac(job.condition.kind)) {
    score = answer_sac(gt, job);
  } else {
    const Item* item = job.item_id ? bank.find_item(*job.item_id) : nullptr;
    if (!item) throw std::invalid_argument("job " + job.job_id + " references an unknown item");
    key = item->key;
    if (job.condition.kind == ConditionKind::P2_INDUCED) {
      GroundTruth shifted = gt;
      const TraitId t = *job.condition.induced_trait;
      shifted.theta[item->trait] =
          std::clamp(gt.theta[item->trait] + gt.coupling_at(t, item->trait), 1.0, 5.0);
      score = key_score(answer_mpi(shifted, *item), key);
    } else {
      score = key_score(answer_mpi(gt, *item), key);
    }
  }

  if (gt.noise_probability > 0.0) {
    const auto h = Sha256{}.field(std::to_string(gt.seed)).field(job.job_id).hex();
    std::mt19937_64 rng(std::stoull(h.substr(0, 16), nullptr, 16));
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u < gt.noise_probability) score = clamp_1_5(score + ((rng() & 1) ? 1 : -1));
  }

  if (is_sac(job.condition.kind)) return std::to_string(score);
  // Invert the keying: the letter whose keyed score equals `score`.
  const char letter = key == Polarity::Positive ? static_cast<char>('A' + (5 - score)) : static_cast<char>('A' + (score - 1));
  return std::string(1, letter);
}

}  // namespace pers16
