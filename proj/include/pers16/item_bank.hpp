#pragma once

#include <json.hpp>

#include <array>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pers16/digest.hpp"
#include "pers16/traits.hpp"

namespace pers16 {

using json = nlohmann::json;

class BankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Polarity { Positive, Negative };

inline std::string_view to_token(Polarity p) { return p == Polarity::Positive ? "+" : "-"; }

// Accepts ASCII "+"/"-" and the typographic minus U+2212.
inline std::optional<Polarity> parse_polarity(std::string_view token) {
  if (token == "+") return Polarity::Positive;
  if (token == "-" || token == "−") return Polarity::Negative;
  return std::nullopt;
}

struct Item {
  std::string id;
  std::string stem;
  TraitId trait{};
  Polarity key{};
  bool operator==(const Item&) const = default;
};

enum class FactorId : std::size_t { FREQUENCY, DEPTH, THRESHOLD, EFFORT, WILLINGNESS };

inline constexpr std::size_t kFactorCount = 5;
inline constexpr std::size_t kScalePoints = 5;
inline constexpr std::size_t kQuestionsPerTrait = 3;

inline constexpr std::array<FactorId, kFactorCount> kAllFactors = {
    FactorId::FREQUENCY, FactorId::DEPTH, FactorId::THRESHOLD, FactorId::EFFORT,
    FactorId::WILLINGNESS};

inline constexpr std::string_view to_string(FactorId f) {
  constexpr std::array<std::string_view, kFactorCount> names = {
      "FREQUENCY", "DEPTH", "THRESHOLD", "EFFORT", "WILLINGNESS"};
  return names[static_cast<std::size_t>(f)];
}

// Name substituted for {intensity_factor} in the neutral SAC prompt.
inline constexpr std::string_view display_name(FactorId f) {
  constexpr std::array<std::string_view, kFactorCount> names = {
      "Frequency", "Depth", "Threshold", "Effort", "Willingness"};
  return names[static_cast<std::size_t>(f)];
}

inline std::optional<FactorId> parse_factor(std::string_view name) {
  for (auto f : kAllFactors) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

struct IntensityFactor {
  FactorId id{};
  std::string question_phrase;
  std::array<std::string, kScalePoints> answer_descriptors;
  bool operator==(const IntensityFactor&) const = default;
};

struct BehavioralQuestion {
  TraitId trait{};
  std::string action_phrase;
  bool operator==(const BehavioralQuestion&) const = default;
};

struct AdjectiveAnchors {
  TraitId trait{};
  // by_level[0] holds level 1.
  std::array<std::vector<std::string>, kScalePoints> by_level;

  const std::vector<std::string>& level(int l) const { return by_level.at(static_cast<std::size_t>(l - 1)); }
  bool operator==(const AdjectiveAnchors&) const = default;
};

struct TraitMeta {
  TraitId trait{};
  std::string definition;
  std::string p2_description;
  bool operator==(const TraitMeta&) const = default;
};

// The complete data asset. Build through bank_from_json / load_bank; the
// per-trait lookups and digest are only meaningful on a validated bank.
struct ItemBank {
  std::string version;
  std::optional<std::size_t> item_total;
  std::vector<Item> items;
  std::vector<IntensityFactor> factors;  // canonical factor order
  std::vector<BehavioralQuestion> behavioral_questions;
  std::vector<AdjectiveAnchors> anchors;  // canonical trait order
  std::vector<TraitMeta> meta;            // canonical trait order
  std::string digest;

  const IntensityFactor& factor(FactorId f) const { return factors.at(static_cast<std::size_t>(f)); }
  const AdjectiveAnchors& anchors_for(TraitId t) const { return anchors.at(index_of(t)); }
  const TraitMeta& meta_for(TraitId t) const { return meta.at(index_of(t)); }

  std::vector<BehavioralQuestion> questions_for(TraitId t) const {
    std::vector<BehavioralQuestion> out;
    for (const auto& q : behavioral_questions) {
      if (q.trait == t) out.push_back(q);
    }
    return out;
  }

  const Item* find_item(std::string_view id) const {
    auto it = item_index_.find(std::string(id));
    return it == item_index_.end() ? nullptr : &items[it->second];
  }

  bool operator==(const ItemBank& o) const {
    return version == o.version && item_total == o.item_total && items == o.items &&
           factors == o.factors && behavioral_questions == o.behavioral_questions &&
           anchors == o.anchors && meta == o.meta && digest == o.digest;
  }

 private:
  std::unordered_map<std::string, std::size_t> item_index_;
  friend ItemBank bank_from_json(const json& doc);
};

// IP_d: every item keyed to `trait`, in bank order.
inline std::vector<Item> items_for_trait(const ItemBank& bank, TraitId trait) {
  std::vector<Item> out;
  for (const auto& item : bank.items) {
    if (item.trait == trait) out.push_back(item);
  }
  return out;
}

// Canonical JSON form. nlohmann::json keeps object keys sorted, so dump()
// of this value is byte-stable and is what the digest covers.
inline json bank_to_json(const ItemBank& bank) {
  json doc;
  doc["version"] = bank.version;
  if (bank.item_total) doc["item_total"] = *bank.item_total;
  doc["items"] = json::array();
  for (const auto& it : bank.items) {
    doc["items"].push_back({{"id", it.id},
                            {"stem", it.stem},
                            {"trait", std::string(to_string(it.trait))},
                            {"key", std::string(to_token(it.key))}});
  }
  doc["factors"] = json::array();
  for (const auto& f : bank.factors) {
    doc["factors"].push_back({{"id", std::string(to_string(f.id))},
                              {"question_phrase", f.question_phrase},
                              {"answer_descriptors", f.answer_descriptors}});
  }
  doc["behavioral_questions"] = json::array();
  for (const auto& q : bank.behavioral_questions) {
    doc["behavioral_questions"].push_back(
        {{"trait", std::string(to_string(q.trait))}, {"action_phrase", q.action_phrase}});
  }
  doc["anchors"] = json::array();
  for (const auto& a : bank.anchors) {
    json levels = json::object();
    for (std::size_t l = 0; l < kScalePoints; ++l) levels[std::to_string(l + 1)] = a.by_level[l];
    doc["anchors"].push_back({{"trait", std::string(to_string(a.trait))}, {"levels", levels}});
  }
  doc["meta"] = json::array();
  for (const auto& m : bank.meta) {
    doc["meta"].push_back({{"trait", std::string(to_string(m.trait))},
                           {"definition", m.definition},
                           {"p2_description", m.p2_description}});
  }
  return doc;
}

inline std::string serialize_bank(const ItemBank& bank) { return bank_to_json(bank).dump(); }

namespace detail {

inline const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw BankError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

inline std::string require_text(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw BankError(where + ": field '" + key + "' must be a string");
  auto s = v.get<std::string>();
  if (s.empty()) throw BankError(where + ": field '" + key + "' must be non-empty");
  return s;
}

inline TraitId require_trait(const json& obj, const std::string& where) {
  auto name = require_text(obj, "trait", where);
  auto t = parse_trait(name);
  if (!t) throw BankError(where + ": unknown trait '" + name + "'");
  return *t;
}

inline const json& require_array(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_array()) throw BankError(where + ": field '" + key + "' must be an array");
  return v;
}

}  // namespace detail

// Parses and validates a bank document; throws BankError naming the first
// violated invariant.
inline ItemBank bank_from_json(const json& doc) {
  using detail::require_array;
  using detail::require_text;
  using detail::require_trait;

  if (!doc.is_object()) throw BankError("bank: document must be a JSON object");
  ItemBank bank;
  bank.version = require_text(doc, "version", "bank");
  if (doc.contains("item_total")) {
    const auto& total = doc.at("item_total");
    if (!total.is_number_unsigned()) throw BankError("bank: item_total must be a non-negative integer");
    bank.item_total = total.get<std::size_t>();
  }

  std::set<std::string> ids;
  std::size_t idx = 0;
  for (const auto& j : require_array(doc, "items", "bank")) {
    const std::string where = "items[" + std::to_string(idx++) + "]";
    Item item;
    item.id = require_text(j, "id", where);
    item.stem = require_text(j, "stem", where);
    item.trait = require_trait(j, where);
    auto key = require_text(j, "key", where);
    auto pol = parse_polarity(key);
    if (!pol) throw BankError(where + ": key must be '+' or '-', got '" + key + "'");
    item.key = *pol;
    if (!ids.insert(item.id).second) throw BankError(where + ": duplicate item id '" + item.id + "'");
    bank.items.push_back(std::move(item));
  }
  if (bank.item_total && *bank.item_total != bank.items.size()) {
    throw BankError("bank declares " + std::to_string(*bank.item_total) + " items but contains " +
                    std::to_string(bank.items.size()));
  }
  for (auto t : kAllTraits) {
    bool any = false;
    for (const auto& it : bank.items) any = any || it.trait == t;
    if (!any) {
      throw BankError("N_d ≥ 1 violated: trait " + std::string(to_string(t)) + " has no items");
    }
  }

  std::array<std::optional<IntensityFactor>, kFactorCount> factors;
  const auto& factor_docs = require_array(doc, "factors", "bank");
  if (factor_docs.size() != kFactorCount) {
    throw BankError("bank has " + std::to_string(factor_docs.size()) + " intensity factors, expected 5");
  }
  idx = 0;
  for (const auto& j : factor_docs) {
    const std::string where = "factors[" + std::to_string(idx++) + "]";
    auto name = require_text(j, "id", where);
    auto fid = parse_factor(name);
    if (!fid) throw BankError(where + ": unknown intensity factor '" + name + "'");
    auto& slot = factors[static_cast<std::size_t>(*fid)];
    if (slot) throw BankError(where + ": duplicate intensity factor '" + name + "'");
    IntensityFactor f;
    f.id = *fid;
    f.question_phrase = require_text(j, "question_phrase", where);
    const auto& answers = require_array(j, "answer_descriptors", where);
    if (answers.size() != kScalePoints) {
      throw BankError("factor " + name + " has " + std::to_string(answers.size()) +
                      " answer descriptors, expected 5");
    }
    for (std::size_t k = 0; k < kScalePoints; ++k) {
      if (!answers[k].is_string() || answers[k].get<std::string>().empty()) {
        throw BankError("factor " + name + " answer descriptor " + std::to_string(k + 1) + " must be non-empty text");
      }
      f.answer_descriptors[k] = answers[k].get<std::string>();
    }
    slot = std::move(f);
  }
  for (auto& f : factors) bank.factors.push_back(std::move(*f));

  idx = 0;
  for (const auto& j : require_array(doc, "behavioral_questions", "bank")) {
    const std::string where = "behavioral_questions[" + std::to_string(idx++) + "]";
    bank.behavioral_questions.push_back({require_trait(j, where), require_text(j, "action_phrase", where)});
  }
  for (auto t : kAllTraits) {
    std::size_t n = 0;
    for (const auto& q : bank.behavioral_questions) n += q.trait == t ? 1 : 0;
    if (n != kQuestionsPerTrait) {
      throw BankError("trait " + std::string(to_string(t)) + " has " + std::to_string(n) +
                      " behavioral questions, expected 3");
    }
  }

  TraitMap<std::optional<AdjectiveAnchors>> anchors;
  idx = 0;
  for (const auto& j : require_array(doc, "anchors", "bank")) {
    const std::string where = "anchors[" + std::to_string(idx++) + "]";
    AdjectiveAnchors a;
    a.trait = require_trait(j, where);
    if (anchors[a.trait]) throw BankError(where + ": duplicate anchors for " + std::string(to_string(a.trait)));
    const auto& levels = detail::require(j, "levels", where);
    if (!levels.is_object()) throw BankError(where + ": levels must be an object");
    for (const auto& [key, _] : levels.items()) {
      if (key.size() != 1 || key[0] < '1' || key[0] > '5') {
        throw BankError(where + ": unexpected anchor level '" + key + "'");
      }
    }
    for (std::size_t l = 0; l < kScalePoints; ++l) {
      const auto key = std::to_string(l + 1);
      if (!levels.contains(key) || !levels.at(key).is_array() || levels.at(key).empty()) {
        throw BankError("trait " + std::string(to_string(a.trait)) + " anchors miss level " + key);
      }
      for (const auto& adj : levels.at(key)) {
        if (!adj.is_string() || adj.get<std::string>().empty()) {
          throw BankError("trait " + std::string(to_string(a.trait)) + " level " + key + " has an empty adjective");
        }
        a.by_level[l].push_back(adj.get<std::string>());
      }
    }
    anchors[a.trait] = std::move(a);
  }
  for (auto t : kAllTraits) {
    if (!anchors[t]) throw BankError("trait " + std::string(to_string(t)) + " has no adjective anchors");
    bank.anchors.push_back(std::move(*anchors[t]));
  }

  TraitMap<std::optional<TraitMeta>> meta;
  idx = 0;
  for (const auto& j : require_array(doc, "meta", "bank")) {
    const std::string where = "meta[" + std::to_string(idx++) + "]";
    TraitMeta m;
    m.trait = require_trait(j, where);
    if (meta[m.trait]) throw BankError(where + ": duplicate meta for " + std::string(to_string(m.trait)));
    m.definition = require_text(j, "definition", where);
    m.p2_description = require_text(j, "p2_description", where);
    meta[m.trait] = std::move(m);
  }
  for (auto t : kAllTraits) {
    if (!meta[t]) throw BankError("trait " + std::string(to_string(t)) + " has no definition/P2 description");
    bank.meta.push_back(std::move(*meta[t]));
  }

  for (std::size_t i = 0; i < bank.items.size(); ++i) bank.item_index_.emplace(bank.items[i].id, i);
  bank.digest = sha256_hex(serialize_bank(bank));
  return bank;
}

inline ItemBank parse_bank(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw BankError(std::string("bank: malformed JSON: ") + e.what());
  }
  return bank_from_json(doc);
}

inline ItemBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BankError("cannot read bank file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw BankError("I/O error reading bank file '" + path.string() + "'");
  return parse_bank(buf.str());
}

}  // namespace pers16
