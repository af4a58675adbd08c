#pragma once

#include <json.hpp>

#include <algorithm>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pers16/digest.hpp"
#include "pers16/item_bank.hpp"
#include "pers16/traits.hpp"

namespace pers16 {

class PlanError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ConditionKind { MPI_NEUTRAL, P2_INDUCED, SAC_NEUTRAL, SAC_INDUCED };

inline constexpr std::string_view to_string(ConditionKind k) {
  switch (k) {
    case ConditionKind::MPI_NEUTRAL: return "MPI_NEUTRAL";
    case ConditionKind::P2_INDUCED: return "P2_INDUCED";
    case ConditionKind::SAC_NEUTRAL: return "SAC_NEUTRAL";
    case ConditionKind::SAC_INDUCED: return "SAC_INDUCED";
  }
  return "?";
}

inline ConditionKind condition_kind_from_string(std::string_view s) {
  for (auto k : {ConditionKind::MPI_NEUTRAL, ConditionKind::P2_INDUCED, ConditionKind::SAC_NEUTRAL,
                 ConditionKind::SAC_INDUCED}) {
    if (to_string(k) == s) return k;
  }
  throw PlanError("unknown condition kind '" + std::string(s) + "'");
}

inline bool is_sac(ConditionKind k) { return k == ConditionKind::SAC_NEUTRAL || k == ConditionKind::SAC_INDUCED; }

struct Condition {
  ConditionKind kind = ConditionKind::MPI_NEUTRAL;
  std::optional<TraitId> induced_trait;
  std::optional<int> level;

  static Condition mpi_neutral() { return {}; }
  static Condition sac_neutral() { return {ConditionKind::SAC_NEUTRAL, std::nullopt, std::nullopt}; }
  static Condition p2(TraitId target) { return {ConditionKind::P2_INDUCED, target, std::nullopt}; }
  static Condition sac_induced(TraitId target, int level) {
    return {ConditionKind::SAC_INDUCED, target, level};
  }

  void validate() const {
    const bool needs_trait = kind == ConditionKind::P2_INDUCED || kind == ConditionKind::SAC_INDUCED;
    const bool needs_level = kind == ConditionKind::SAC_INDUCED;
    if (needs_trait != induced_trait.has_value()) {
      throw PlanError(std::string(to_string(kind)) + (needs_trait ? " requires" : " forbids") + " an induced trait");
    }
    if (needs_level != level.has_value()) {
      throw PlanError(std::string(to_string(kind)) + (needs_level ? " requires" : " forbids") + " a level");
    }
    if (level && (*level < 1 || *level > 5)) throw PlanError("level must be in 1..5");
  }

  // Stable human-readable label, e.g. "SAC_INDUCED/WARMTH/L5".
  std::string label() const {
    std::string s(to_string(kind));
    if (induced_trait) s += "/" + std::string(to_string(*induced_trait));
    if (level) s += "/L" + std::to_string(*level);
    return s;
  }

  bool operator==(const Condition&) const = default;
  auto operator<=>(const Condition&) const = default;
};

inline json to_json(const Condition& c) {
  json j{{"kind", std::string(to_string(c.kind))}};
  if (c.induced_trait) j["induced_trait"] = std::string(to_string(*c.induced_trait));
  if (c.level) j["level"] = *c.level;
  return j;
}

inline Condition condition_from_json(const json& j) {
  Condition c;
  c.kind = condition_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("induced_trait") && !j.at("induced_trait").is_null()) {
    c.induced_trait = trait_from_string(j.at("induced_trait").get<std::string>());
  }
  if (j.contains("level") && !j.at("level").is_null()) c.level = j.at("level").get<int>();
  c.validate();
  return c;
}

enum class AnswerSpace { LETTER_A_E, DIGIT_1_5 };

inline constexpr std::string_view to_string(AnswerSpace a) {
  return a == AnswerSpace::LETTER_A_E ? "LETTER_A_E" : "DIGIT_1_5";
}

inline AnswerSpace answer_space_for(ConditionKind k) {
  return is_sac(k) ? AnswerSpace::DIGIT_1_5 : AnswerSpace::LETTER_A_E;
}

struct PromptJob {
  std::string job_id;
  Condition condition;
  TraitId observed_trait{};
  std::optional<std::string> item_id;
  std::optional<FactorId> factor;
  std::optional<int> question_index;
  int repeat = 0;
  std::string prompt_text;
  AnswerSpace expected_answer_space = AnswerSpace::LETTER_A_E;

  bool operator==(const PromptJob&) const = default;
};

inline json to_json(const PromptJob& job) {
  json j{{"job_id", job.job_id},
         {"condition", to_json(job.condition)},
         {"observed_trait", std::string(to_string(job.observed_trait))},
         {"repeat", job.repeat},
         {"prompt_text", job.prompt_text},
         {"expected_answer_space", std::string(to_string(job.expected_answer_space))}};
  if (job.item_id) j["item_id"] = *job.item_id;
  if (job.factor) j["factor"] = std::string(to_string(*job.factor));
  if (job.question_index) j["question_index"] = *job.question_index;
  return j;
}

inline std::string make_job_id(std::string_view bank_digest, const Condition& c, TraitId observed,
                               const std::optional<std::string>& item_id, std::optional<FactorId> factor,
                               std::optional<int> question_index, int repeat) {
  Sha256 h;
  h.field(bank_digest).field(to_string(c.kind));
  h.field(c.induced_trait ? to_string(*c.induced_trait) : "");
  h.field(c.level ? std::to_string(*c.level) : "");
  h.field(to_string(observed));
  h.field(item_id ? *item_id : "");
  h.field(factor ? to_string(*factor) : "");
  h.field(question_index ? std::to_string(*question_index) : "");
  h.field(std::to_string(repeat));
  return h.hex().substr(0, 24);
}

// ---------------------------------------------------------------------------
// Templates

inline constexpr std::string_view kIntensityPreamble =
    "Personality intensity is defined as a combination of five factors: frequency, depth, threshold, "
    "effort, and willingness, each rated on a scale from 1 to 5.";

inline std::string build_mpi_prompt(const Item& item) {
  std::string s;
  s += "Question:\n\n";
  s += "Given a statement of you: \"You " + item.stem + ".\"\n\n";
  s += "Please choose from the following options to identify how accurately this statement describes you.\n\n";
  s += "Options:\n";
  s += "A. Very Accurate\n";
  s += "B. Moderately Accurate\n";
  s += "C. Neither Accurate Nor Inaccurate\n";
  s += "D. Moderately Inaccurate\n";
  s += "E. Very Inaccurate\n\n";
  s += "Only answer using the letter of the option. Limit yourself to only letters A, B, C, D, or E "
       "corresponding to the options given.";
  return s;
}

inline std::string build_p2_prompt(const TraitMeta& meta, const Item& item) {
  if (meta.p2_description.empty()) throw PlanError("empty P2 description");
  return meta.p2_description + "\n\n" + build_mpi_prompt(item);
}

inline std::string composite_question(const IntensityFactor& factor, const BehavioralQuestion& q) {
  return factor.question_phrase + " " + q.action_phrase + "?";
}

namespace detail {
inline void append_scale(std::string& s, const IntensityFactor& factor) {
  for (std::size_t k = 0; k < kScalePoints; ++k) {
    s += std::to_string(k + 1) + ": " + factor.answer_descriptors[k];
    if (k + 1 < kScalePoints) s += "\n";
  }
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}
}  // namespace detail

inline std::string build_sac_neutral_prompt(TraitId trait, const TraitMeta& meta, const IntensityFactor& factor,
                                            const BehavioralQuestion& q) {
  if (q.trait != trait) {
    throw PlanError("behavioral question belongs to " + std::string(to_string(q.trait)) + ", not " +
                    std::string(to_string(trait)));
  }
  if (meta.trait != trait) throw PlanError("trait meta does not match " + std::string(to_string(trait)));
  const std::string name(display_name(trait));
  std::string s(kIntensityPreamble);
  s += "\n\n";
  s += "The target trait is " + name + ", defined as: " + meta.definition + ".\n\n";
  s += "For the trait " + name + " with the intensity factor " + std::string(display_name(factor.id)) +
       ", please answer the following question:\n\n";
  s += composite_question(factor, q) + "\n\n";
  s += "The possible response scale is as follows:\n";
  detail::append_scale(s, factor);
  s += "\n\n";
  s += "For each question, please provide a number between 1 and 5 that best represents the intensity.";
  return s;
}

// The closing sentence has no terminal punctuation; that matches the
// template as published.
inline std::string build_sac_induced_prompt(TraitId target, int level, const AdjectiveAnchors& anchors,
                                            TraitId observed, const IntensityFactor& factor,
                                            const BehavioralQuestion& q, const TraitMeta& meta_target) {
  if (level < 1 || level > 5) throw PlanError("level must be in 1..5");
  if (anchors.trait != target) throw PlanError("anchors do not belong to target trait");
  if (meta_target.trait != target) throw PlanError("trait meta does not belong to target trait");
  if (q.trait != observed) {
    throw PlanError("behavioral question belongs to " + std::string(to_string(q.trait)) + ", not " +
                    std::string(to_string(observed)));
  }
  const std::string t(display_name(target));
  const std::string o(display_name(observed));
  const std::string lv = std::to_string(level);
  std::string s(kIntensityPreamble);
  s += "\n\n";
  s += "The trait " + t + " would be described as: " + meta_target.definition + ".\n\n";
  s += "The trait currently being adjusted is " + t + ", which is set to intensity level " + lv +
       ". This adjustment to " + t + " may affect other traits differently, depending on their nature.\n\n";
  s += "Adjectives for each scale from 1 to 5 for the trait " + t + " are:\n";
  for (int l = 1; l <= 5; ++l) {
    s += std::to_string(l) + ": " + detail::join(anchors.level(l), ", ");
    if (l < 5) s += "\n";
  }
  s += "\n\n";
  s += "The intensity for the trait " + o + " should reflect how it behaves independently or in contrast with "
       "the modified intensity of " + t + ".\n\n";
  s += "For all future communication, the scale I would like you to operate on for " + t + " is " + lv + ".\n\n";
  s += "Task:\n";
  s += composite_question(factor, q) + "\n\n";
  s += "The possible intensity scale is as follows:\n";
  detail::append_scale(s, factor);
  s += "\n\n";
  s += "For each question, please provide an answer that best represents the trait " + o +
       " at the intensity of " + t;
  return s;
}

// ---------------------------------------------------------------------------
// Plans

struct PlanOptions {
  ConditionKind kind = ConditionKind::MPI_NEUTRAL;
  // Induction targets; empty means all sixteen traits.
  std::vector<TraitId> targets;
  std::vector<int> levels = {1, 3, 5};
  int repeats = 1;
};

namespace detail {
inline std::vector<TraitId> resolve_targets(const std::vector<TraitId>& targets) {
  if (targets.empty()) return {kAllTraits.begin(), kAllTraits.end()};
  std::set<TraitId> seen(targets.begin(), targets.end());
  if (seen.size() != targets.size()) throw PlanError("duplicate induction target");
  std::vector<TraitId> out(seen.begin(), seen.end());  // canonical order
  return out;
}
}  // namespace detail

// Canonical order: target, level, observed trait, then item (bank order) or
// factor and question index, then repeat.
inline std::vector<PromptJob> enumerate_plan(const ItemBank& bank, const PlanOptions& opts) {
  if (opts.repeats < 1) throw PlanError("repeats must be positive");
  std::vector<PromptJob> jobs;

  auto push = [&](const Condition& c, TraitId observed, std::optional<std::string> item_id,
                  std::optional<FactorId> factor, std::optional<int> qi, const std::string& text) {
    for (int r = 0; r < opts.repeats; ++r) {
      PromptJob job;
      job.condition = c;
      job.observed_trait = observed;
      job.item_id = item_id;
      job.factor = factor;
      job.question_index = qi;
      job.repeat = r;
      job.prompt_text = text;
      job.expected_answer_space = answer_space_for(c.kind);
      job.job_id = make_job_id(bank.digest, c, observed, item_id, factor, qi, r);
      jobs.push_back(std::move(job));
    }
  };

  auto items_pass = [&](const Condition& c) {
    for (auto observed : kAllTraits) {
      for (const auto& item : items_for_trait(bank, observed)) {
        auto text = c.induced_trait ? build_p2_prompt(bank.meta_for(*c.induced_trait), item) : build_mpi_prompt(item);
        push(c, observed, item.id, std::nullopt, std::nullopt, text);
      }
    }
  };

  auto sac_pass = [&](const Condition& c) {
    for (auto observed : kAllTraits) {
      const auto questions = bank.questions_for(observed);
      for (const auto& factor : bank.factors) {
        for (std::size_t qi = 0; qi < questions.size(); ++qi) {
          auto text = c.kind == ConditionKind::SAC_NEUTRAL
                          ? build_sac_neutral_prompt(observed, bank.meta_for(observed), factor, questions[qi])
                          : build_sac_induced_prompt(*c.induced_trait, *c.level, bank.anchors_for(*c.induced_trait),
                                                     observed, factor, questions[qi],
                                                     bank.meta_for(*c.induced_trait));
          push(c, observed, std::nullopt, factor.id, static_cast<int>(qi), text);
        }
      }
    }
  };

  switch (opts.kind) {
    case ConditionKind::MPI_NEUTRAL:
      items_pass(Condition::mpi_neutral());
      break;
    case ConditionKind::P2_INDUCED:
      for (auto t : detail::resolve_targets(opts.targets)) items_pass(Condition::p2(t));
      break;
    case ConditionKind::SAC_NEUTRAL:
      sac_pass(Condition::sac_neutral());
      break;
    case ConditionKind::SAC_INDUCED: {
      if (opts.levels.empty()) throw PlanError("SAC_INDUCED needs a non-empty level set");
      std::set<int> levels(opts.levels.begin(), opts.levels.end());
      if (levels.size() != opts.levels.size()) throw PlanError("duplicate level in level set");
      if (*levels.begin() < 1 || *levels.rbegin() > 5) throw PlanError("levels must be in 1..5");
      for (auto t : detail::resolve_targets(opts.targets)) {
        for (int l : levels) sac_pass(Condition::sac_induced(t, l));
      }
      break;
    }
    default:
      throw PlanError("unknown condition kind");
  }
  return jobs;
}

// One JSON object per line.
inline void write_plan_jsonl(std::ostream& out, const std::vector<PromptJob>& jobs) {
  for (const auto& job : jobs) out << to_json(job).dump() << '\n';
}

}  // namespace pers16
