#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pers16 {

// The sixteen 16PF traits. Enumerator order is the canonical order used for
// plan enumeration, report layout and every tie-break.
enum class TraitId : std::size_t {
  WARMTH,
  INTELLECT,
  EMOTIONAL_STABILITY,
  ASSERTIVENESS,
  GREGARIOUSNESS,
  DUTIFULNESS,
  FRIENDLINESS,
  SENSITIVITY,
  DISTRUST,
  IMAGINATION,
  RESERVE,
  ANXIETY,
  COMPLEXITY,
  INTROVERSION,
  ORDERLINESS,
  EMOTIONALITY,
};

inline constexpr std::size_t kTraitCount = 16;

inline constexpr std::array<TraitId, kTraitCount> kAllTraits = {
    TraitId::WARMTH,        TraitId::INTELLECT,      TraitId::EMOTIONAL_STABILITY,
    TraitId::ASSERTIVENESS, TraitId::GREGARIOUSNESS, TraitId::DUTIFULNESS,
    TraitId::FRIENDLINESS,  TraitId::SENSITIVITY,    TraitId::DISTRUST,
    TraitId::IMAGINATION,   TraitId::RESERVE,        TraitId::ANXIETY,
    TraitId::COMPLEXITY,    TraitId::INTROVERSION,   TraitId::ORDERLINESS,
    TraitId::EMOTIONALITY,
};

namespace detail {
inline constexpr std::array<std::string_view, kTraitCount> kTraitNames = {
    "WARMTH",        "INTELLECT",      "EMOTIONAL_STABILITY", "ASSERTIVENESS",
    "GREGARIOUSNESS", "DUTIFULNESS",   "FRIENDLINESS",        "SENSITIVITY",
    "DISTRUST",      "IMAGINATION",    "RESERVE",             "ANXIETY",
    "COMPLEXITY",    "INTROVERSION",   "ORDERLINESS",         "EMOTIONALITY",
};

// Human-facing names substituted into prompt templates.
inline constexpr std::array<std::string_view, kTraitCount> kDisplayNames = {
    "Warmth",         "Intellect",   "Emotional Stability", "Assertiveness",
    "Gregariousness", "Dutifulness", "Friendliness",        "Sensitivity",
    "Distrust",       "Imagination", "Reserve",             "Anxiety",
    "Complexity",     "Introversion", "Orderliness",        "Emotionality",
};
}  // namespace detail

constexpr std::size_t index_of(TraitId t) { return static_cast<std::size_t>(t); }

constexpr std::string_view to_string(TraitId t) { return detail::kTraitNames[index_of(t)]; }

constexpr std::string_view display_name(TraitId t) { return detail::kDisplayNames[index_of(t)]; }

inline std::optional<TraitId> parse_trait(std::string_view name) {
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    if (detail::kTraitNames[i] == name) return kAllTraits[i];
  }
  return std::nullopt;
}

inline TraitId trait_from_string(std::string_view name) {
  if (auto t = parse_trait(name)) return *t;
  throw std::invalid_argument("unknown trait '" + std::string(name) + "'");
}

// Dense per-trait storage indexed by TraitId.
template <typename T>
class TraitMap {
 public:
  TraitMap() = default;
  explicit TraitMap(const T& fill) { values_.fill(fill); }

  T& operator[](TraitId t) { return values_[index_of(t)]; }
  const T& operator[](TraitId t) const { return values_[index_of(t)]; }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool operator==(const TraitMap&) const = default;

 private:
  std::array<T, kTraitCount> values_{};
};

}  // namespace pers16
