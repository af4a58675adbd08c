#pragma once

#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "pers16/analysis.hpp"
#include "pers16/gateway.hpp"
#include "pers16/item_bank.hpp"
#include "pers16/prompt_forge.hpp"
#include "pers16/records.hpp"
#include "pers16/scoring.hpp"

namespace pers16 {

inline constexpr std::string_view kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;

// Configuration or validation problem; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Manifest

struct RunManifest {
  std::string run_id;
  ModelSpec model;
  std::string bank_digest;
  std::string bank_version;
  PlanOptions grid;
  RetryPolicy policy;
  std::size_t job_count = 0;
  std::string created_at;
  std::string tool_version{kToolVersion};
};

inline PlanOptions normalized_grid(PlanOptions grid) {
  grid.targets = detail::resolve_targets(grid.targets);
  if (grid.kind == ConditionKind::SAC_INDUCED) {
    std::set<int> levels(grid.levels.begin(), grid.levels.end());
    if (levels.size() != grid.levels.size()) throw PlanError("duplicate level in level set");
    grid.levels.assign(levels.begin(), levels.end());
  } else {
    grid.levels.clear();
  }
  if (grid.kind == ConditionKind::MPI_NEUTRAL || grid.kind == ConditionKind::SAC_NEUTRAL) grid.targets.clear();
  return grid;
}

namespace detail {
// The part of the manifest that determines the plan and the answers; the
// run_id is a digest of exactly this.
inline json manifest_identity(const RunManifest& m) {
  json targets = json::array();
  for (auto t : m.grid.targets) targets.push_back(std::string(to_string(t)));
  json model = to_json(m.model);
  model.erase("ground_truth");
  // The synthetic respondent's answers depend on the file's content, not its path.
  if (!m.model.ground_truth.empty()) {
    std::ifstream in(m.model.ground_truth, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    model["ground_truth_sha256"] = sha256_hex(content);
  }
  return {{"model", model},
          {"bank", {{"digest", m.bank_digest}, {"version", m.bank_version}}},
          {"grid",
           {{"kind", std::string(to_string(m.grid.kind))},
            {"targets", targets},
            {"levels", m.grid.levels},
            {"repeats", m.grid.repeats}}},
          {"decoding", {{"temperature", m.model.temperature}, {"max_tokens", m.model.max_tokens}}},
          {"parser_policy",
           {{"letter", "trim, strip one trailing '.' or ')', uppercase, single A-E; else one standalone A-E token"},
            {"intensity", "trim, single digit 1-5; else one standalone 1-5 token; out-of-range is an error"},
            {"reask_on_ambiguous", m.policy.reask_on_ambiguous}}},
          {"job_order", "canonical"},
          {"message_layout", "single user message"}};
}
}  // namespace detail

inline RunManifest make_manifest(const ItemBank& bank, const ModelSpec& model, const PlanOptions& grid,
                                 const RetryPolicy& policy) {
  RunManifest m;
  m.model = model;
  m.bank_digest = bank.digest;
  m.bank_version = bank.version;
  m.grid = normalized_grid(grid);
  m.policy = policy;
  m.job_count = enumerate_plan(bank, m.grid).size();
  m.run_id = sha256_hex(detail::manifest_identity(m).dump()).substr(0, 16);
  m.created_at = utc_timestamp();
  return m;
}

inline json to_json(const RunManifest& m) {
  json j = detail::manifest_identity(m);
  j["run_id"] = m.run_id;
  j["tool_version"] = m.tool_version;
  j["created_at"] = m.created_at;
  j["job_count"] = m.job_count;
  j["retry"] = to_json(m.policy);
  if (!m.model.ground_truth.empty()) j["model"]["ground_truth"] = m.model.ground_truth;
  return j;
}

inline RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.model = model_spec_from_json(j.at("model"));
  m.bank_digest = j.at("bank").at("digest").get<std::string>();
  m.bank_version = j.at("bank").at("version").get<std::string>();
  const auto& g = j.at("grid");
  m.grid.kind = condition_kind_from_string(g.at("kind").get<std::string>());
  for (const auto& t : g.at("targets")) m.grid.targets.push_back(trait_from_string(t.get<std::string>()));
  m.grid.levels = g.at("levels").get<std::vector<int>>();
  m.grid.repeats = g.value("repeats", 1);
  m.policy.reask_on_ambiguous = j.at("parser_policy").value("reask_on_ambiguous", true);
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    m.policy.max_attempts = r.value("max_attempts", 3);
    m.policy.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", 500));
    m.policy.max_delay = std::chrono::milliseconds(r.value("max_delay_ms", 8000));
    m.policy.requests_per_second = r.value("requests_per_second", 0.0);
  }
  m.job_count = j.value("job_count", std::size_t{0});
  m.created_at = j.value("created_at", std::string{});
  m.tool_version = j.value("tool_version", std::string{});
  return m;
}

inline RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest '" + path.string() + "'");
  return manifest_from_json(json::parse(in));
}

// Re-enumerates the plan a manifest describes; refuses a different bank.
inline std::vector<PromptJob> plan_from_manifest(const RunManifest& m, const ItemBank& bank) {
  if (bank.digest != m.bank_digest) {
    throw ConfigError("bank digest " + bank.digest.substr(0, 12) + " does not match manifest digest " +
                      m.bank_digest.substr(0, 12));
  }
  return enumerate_plan(bank, m.grid);
}

// ---------------------------------------------------------------------------
// Scoring a run

// One TraitProfile per condition in the plan, in plan order. Jobs without a
// record or with an error record count as missing.
inline std::vector<TraitProfile> build_profiles(const ItemBank& bank, const std::vector<PromptJob>& plan,
                                                const std::vector<ResponseRecord>& records,
                                                const std::string& model_id, const std::string& run_id) {
  std::unordered_map<std::string, const ResponseRecord*> by_job;
  for (const auto& r : records) by_job[r.job_id] = &r;
  std::set<std::string> planned;
  for (const auto& j : plan) planned.insert(j.job_id);
  for (const auto& r : records) {
    if (!planned.count(r.job_id)) throw ConfigError("record " + r.job_id + " does not belong to this plan");
  }

  std::vector<Condition> conditions;
  std::map<Condition, TraitMap<std::vector<const PromptJob*>>> grouped;
  for (const auto& job : plan) {
    if (!grouped.count(job.condition)) conditions.push_back(job.condition);
    grouped[job.condition][job.observed_trait].push_back(&job);
  }

  std::vector<TraitProfile> out;
  for (const auto& c : conditions) {
    TraitProfile p;
    p.model_id = model_id;
    p.condition = c;
    p.bank_digest = bank.digest;
    p.manifest_ref = run_id;
    for (auto t : kAllTraits) {
      const auto& jobs = grouped[c][t];
      if (is_sac(c.kind)) {
        std::vector<SacResponse> responses;
        for (const auto* job : jobs) {
          SacResponse r{*job->factor, *job->question_index, std::nullopt};
          auto it = by_job.find(job->job_id);
          if (it != by_job.end() && it->second->parsed) r.digit = std::stoi(*it->second->parsed);
          responses.push_back(r);
        }
        p.scores[t] = sac_trait_score(t, responses);
      } else {
        std::vector<std::optional<int>> values;
        for (const auto* job : jobs) {
          const Item* item = bank.find_item(*job->item_id);
          auto it = by_job.find(job->job_id);
          if (it != by_job.end() && it->second->parsed) {
            values.push_back(key_score(it->second->parsed->at(0), item->key));
          } else {
            values.emplace_back(std::nullopt);
          }
        }
        p.scores[t] = trait_score(t, values);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report writing

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

inline std::string profile_csv(const TraitProfile& p, VarianceMode mode) {
  std::ostringstream os;
  os << "trait,mean,variance,n,n_missing\n";
  for (auto t : kAllTraits) {
    const auto& s = p.scores[t];
    os << to_string(t) << ',' << format_2dp(s.mean) << ',' << format_2dp(s.variance(mode)) << ',' << s.n << ','
       << s.n_missing << '\n';
  }
  return os.str();
}

inline json profiles_document(const std::vector<TraitProfile>& profiles, VarianceMode mode) {
  std::set<std::string> run_ids;
  json arr = json::array();
  for (const auto& p : profiles) {
    run_ids.insert(p.manifest_ref);
    arr.push_back(to_json(p));
  }
  return {{"run_ids", run_ids}, {"variance_mode", std::string(to_string(mode))}, {"profiles", arr}};
}

inline std::string profile_file_stem(const Condition& c) {
  std::string s(to_string(c.kind));
  if (c.induced_trait) s += "_" + std::string(to_string(*c.induced_trait));
  if (c.level) s += "_L" + std::to_string(*c.level);
  return s;
}

// Neutral runs write profile.csv/json; induced runs write one CSV per
// condition under profiles/ plus profiles.json.
inline void write_run_reports(const fs::path& out_dir, const std::vector<TraitProfile>& profiles, VarianceMode mode) {
  if (profiles.size() == 1 && !profiles.front().condition.induced_trait) {
    write_text(out_dir / "profile.csv", profile_csv(profiles.front(), mode));
    write_text(out_dir / "profile.json", profiles_document(profiles, mode).dump(2) + "\n");
    return;
  }
  for (const auto& p : profiles) {
    write_text(out_dir / "profiles" / (profile_file_stem(p.condition) + ".csv"), profile_csv(p, mode));
  }
  write_text(out_dir / "profiles.json", profiles_document(profiles, mode).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Runs

struct RunOptions {
  fs::path out_dir;
  std::size_t concurrency = 4;
  std::optional<fs::path> cache_dir;
  bool resume = false;
  VarianceMode variance_mode = VarianceMode::Population;
  RetryPolicy policy;
  const std::atomic<bool>* cancel = nullptr;
  // Overrides the backend built from the model spec (tests, embedding).
  Backend* backend = nullptr;
  // Run only the first `limit` jobs of the plan (smoke runs); the rest can
  // be completed later with resume.
  std::optional<std::size_t> limit;
};

// Record counts for a run directory; written for every run, complete or not.
// Ordered so the file does not depend on completion order.
inline json run_summary(const RunManifest& m, const std::vector<ResponseRecord>& records) {
  std::map<std::string, std::size_t> errors;
  std::map<std::string, std::size_t> backends;
  std::size_t ok = 0;
  for (const auto& r : records) {
    if (r.ok()) {
      ++ok;
    } else {
      ++errors[*r.error];
    }
    ++backends[r.backend_tag];
  }
  return {{"run_ids", json::array({m.run_id})},
          {"model_id", m.model.model_id},
          {"kind", std::string(to_string(m.grid.kind))},
          {"planned", m.job_count},
          {"recorded", records.size()},
          {"parsed", ok},
          {"errors", errors},
          {"backends", backends}};
}

struct RunResult {
  RunManifest manifest;
  BatchSummary summary;
  std::vector<TraitProfile> profiles;
  std::uint64_t backend_calls = 0;
  int exit_code = kExitOk;
};

inline RunResult execute_run(const ItemBank& bank, const ModelSpec& model, const PlanOptions& grid,
                             const RunOptions& opts) {
  model.validate();
  RunManifest manifest = make_manifest(bank, model, grid, opts.policy);
  fs::create_directories(opts.out_dir);
  const fs::path manifest_path = opts.out_dir / "manifest.json";
  const fs::path records_path = opts.out_dir / "records.jsonl";

  if (fs::exists(manifest_path)) {
    const RunManifest existing = load_manifest(manifest_path);
    if (existing.run_id != manifest.run_id) {
      throw ConfigError("output directory holds run " + existing.run_id + "; this configuration is run " +
                        manifest.run_id + " (use a distinct directory)");
    }
    manifest.created_at = existing.created_at;
  }
  if (fs::exists(records_path) && fs::file_size(records_path) > 0 && !opts.resume) {
    throw ConfigError("'" + records_path.string() + "' already has records; pass --resume to continue the run");
  }
  if (!fs::exists(manifest_path)) write_text(manifest_path, to_json(manifest).dump(2) + "\n");

  const auto plan = enumerate_plan(bank, manifest.grid);
  std::vector<PromptJob> batch = plan;
  if (opts.limit && *opts.limit < batch.size()) batch.resize(*opts.limit);
  std::unique_ptr<Backend> owned;
  Backend* backend = opts.backend;
  if (!backend) {
    owned = make_backend(model, bank);
    backend = owned.get();
  }
  if (backend->needs_credential()) {
    const char* secret = std::getenv(model.auth_env_var.c_str());
    if (!secret || !*secret) throw ConfigError("environment variable " + model.auth_env_var + " is not set");
  }
  std::unique_ptr<ResponseCache> cache;
  if (opts.cache_dir) cache = std::make_unique<ResponseCache>(*opts.cache_dir);
  Gateway gateway(*backend, opts.policy, bank.digest, cache.get());

  RunResult result;
  result.manifest = manifest;
  {
    JsonlRecordSink sink(records_path);
    result.summary = run_batch(batch, model, gateway, sink, {opts.concurrency, opts.cancel});
  }
  result.backend_calls = gateway.backend_calls();
  const auto records = read_records(records_path);
  write_text(opts.out_dir / "summary.json", run_summary(manifest, records).dump(2) + "\n");
  if (result.summary.not_run > 0) {
    result.exit_code = kExitPartial;
    return result;
  }
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.ok() ? 0 : 1;
  result.exit_code = failed > 0 ? kExitPartial : kExitOk;
  if (records.size() < plan.size()) return result;  // limited run: no profile yet
  try {
    result.profiles = build_profiles(bank, plan, records, model.model_id, manifest.run_id);
  } catch (const NoDataError&) {
    result.exit_code = kExitPartial;
    return result;
  }
  write_run_reports(opts.out_dir, result.profiles, opts.variance_mode);
  return result;
}

// Rebuilds the reports of an existing run directory from its records.
inline std::vector<TraitProfile> regenerate_reports(const ItemBank& bank, const fs::path& run_dir, VarianceMode mode) {
  const RunManifest manifest = load_manifest(run_dir / "manifest.json");
  const auto plan = plan_from_manifest(manifest, bank);
  const auto records = read_records(run_dir / "records.jsonl");
  auto profiles = build_profiles(bank, plan, records, manifest.model.model_id, manifest.run_id);
  write_run_reports(run_dir, profiles, mode);
  return profiles;
}

// ---------------------------------------------------------------------------
// Analysis over profile files

inline std::vector<TraitProfile> load_profiles(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read profile file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not JSON: " + e.what());
  }
  std::vector<TraitProfile> out;
  try {
    if (doc.contains("profiles")) {
      for (const auto& p : doc.at("profiles")) out.push_back(profile_from_json(p));
    } else {
      out.push_back(profile_from_json(doc));
    }
  } catch (const std::exception& e) {
    throw ConfigError("'" + path.string() + "': " + e.what());
  }
  return out;
}

enum class AnalysisKind { Distances, Sd, Deltas, CoMovers };

inline AnalysisKind analysis_kind_from_string(std::string_view s) {
  if (s == "distances") return AnalysisKind::Distances;
  if (s == "sd") return AnalysisKind::Sd;
  if (s == "deltas") return AnalysisKind::Deltas;
  if (s == "co-movers") return AnalysisKind::CoMovers;
  throw ConfigError("unknown analysis '" + std::string(s) + "' (distances|sd|deltas|co-movers)");
}

namespace detail {

inline std::set<std::string> run_ids_of(const std::vector<TraitProfile>& ps) {
  std::set<std::string> ids;
  for (const auto& p : ps) {
    if (!p.manifest_ref.empty()) ids.insert(p.manifest_ref);
  }
  return ids;
}

inline void require_same_bank(const std::vector<TraitProfile>& ps) {
  for (const auto& p : ps) {
    if (p.bank_digest != ps.front().bank_digest) {
      throw AnalysisError("inputs come from different banks (" + ps.front().bank_digest.substr(0, 12) + " vs " +
                          p.bank_digest.substr(0, 12) + ")");
    }
  }
}

inline std::vector<TraitProfile> neutral_profiles(const std::vector<TraitProfile>& ps) {
  std::vector<TraitProfile> out;
  for (const auto& p : ps) {
    if (!p.condition.induced_trait) out.push_back(p);
  }
  if (out.empty()) throw AnalysisError("no neutral profiles among the inputs");
  for (const auto& p : out) {
    if (p.condition.kind != out.front().condition.kind) {
      throw AnalysisError("neutral profiles mix condition kinds");
    }
  }
  return out;
}

inline std::vector<DeltaVector> all_deltas(const std::vector<TraitProfile>& ps) {
  std::vector<DeltaVector> out;
  for (const auto& induced : ps) {
    if (!induced.condition.induced_trait) continue;
    const TraitProfile* match = nullptr;
    const TraitProfile* wrong_family = nullptr;
    for (const auto& n : ps) {
      if (n.condition.induced_trait || n.model_id != induced.model_id) continue;
      if (n.condition.kind == neutral_family_of(induced.condition.kind)) {
        match = &n;
      } else {
        wrong_family = &n;
      }
    }
    if (!match && wrong_family) {
      // Raises the family-mismatch error.
      out.push_back(delta_profile(induced, *wrong_family));
    }
    if (!match) throw AnalysisError("no neutral profile for model " + induced.model_id);
    out.push_back(delta_profile(induced, *match));
  }
  if (out.empty()) throw AnalysisError("no induced profiles among the inputs");
  return out;
}

inline std::string level_text(const std::optional<int>& l) { return l ? std::to_string(*l) : ""; }

}  // namespace detail

// Writes the requested analysis into out_dir; returns the files written.
inline std::vector<fs::path> analyze(const std::vector<TraitProfile>& inputs, AnalysisKind kind, const fs::path& out_dir) {
  if (inputs.empty()) throw AnalysisError("no input profiles");
  detail::require_same_bank(inputs);
  const auto run_ids = detail::run_ids_of(inputs);
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_text(out_dir / name, content);
    written.push_back(out_dir / name);
  };

  switch (kind) {
    case AnalysisKind::Distances: {
      const auto ps = detail::neutral_profiles(inputs);
      std::ostringstream csv;
      csv << "model";
      for (const auto& p : ps) csv << ',' << csv_field(p.model_id);
      csv << '\n';
      json matrix = json::array();
      for (const auto& a : ps) {
        csv << csv_field(a.model_id);
        json row = json::array();
        for (const auto& b : ps) {
          const double d = euclidean_distance(a, b);
          csv << ',' << format_2dp(d);
          row.push_back(d);
        }
        csv << '\n';
        matrix.push_back(row);
      }
      json models = json::array();
      for (const auto& p : ps) models.push_back(p.model_id);
      emit("distances.csv", csv.str());
      emit("distances.json",
           json{{"run_ids", run_ids}, {"models", models}, {"matrix", matrix}}.dump(2) + "\n");
      break;
    }
    case AnalysisKind::Sd: {
      const auto ps = detail::neutral_profiles(inputs);
      const auto stats = cross_model_stats(ps);
      std::ostringstream csv;
      csv << "trait";
      for (const auto& p : ps) csv << ',' << csv_field(p.model_id);
      csv << ",sd_sample,sd_population\n";
      json rows = json::array();
      for (const auto& s : stats) {
        csv << to_string(s.trait);
        for (double m : s.per_model_means) csv << ',' << format_2dp(m);
        csv << ',' << format_2dp(s.sd_sample) << ',' << format_2dp(s.sd_population) << '\n';
        rows.push_back({{"trait", std::string(to_string(s.trait))},
                        {"per_model_means", s.per_model_means},
                        {"sd_sample", s.sd_sample},
                        {"sd_population", s.sd_population}});
      }
      json models = json::array();
      for (const auto& p : ps) models.push_back(p.model_id);
      emit("trait_sd.csv", csv.str());
      emit("trait_sd.json", json{{"run_ids", run_ids}, {"models", models}, {"traits", rows}}.dump(2) + "\n");
      break;
    }
    case AnalysisKind::Deltas: {
      const auto vectors = detail::all_deltas(inputs);
      std::ostringstream longf;
      longf << "model,family,target,level,observed,delta\n";
      for (const auto& v : vectors) {
        for (auto t : kAllTraits) {
          longf << csv_field(v.model_id) << ',' << to_string(v.family) << ',' << to_string(v.target_trait) << ','
                << detail::level_text(v.level) << ',' << to_string(t) << ',' << format_2dp(v.deltas[t]) << '\n';
        }
      }
      // Wide shape: the induced trait's own delta, one row per (model, level).
      std::map<std::pair<std::string, int>, TraitMap<std::optional<double>>> wide;
      for (const auto& v : vectors) wide[{v.model_id, v.level.value_or(0)}][v.target_trait] = v.deltas[v.target_trait];
      std::ostringstream widef;
      widef << "model,level";
      for (auto t : kAllTraits) widef << ',' << to_string(t);
      widef << '\n';
      json series = json::array();
      for (const auto& [key, row] : wide) {
        widef << csv_field(key.first) << ',' << (key.second ? std::to_string(key.second) : "");
        json bars = json::array();
        for (auto t : kAllTraits) {
          widef << ',' << (row[t] ? format_2dp(*row[t]) : "");
          if (row[t]) bars.push_back({{"trait", std::string(to_string(t))}, {"delta", *row[t]}});
        }
        widef << '\n';
        series.push_back({{"model_id", key.first},
                          {"level", key.second ? json(key.second) : json(nullptr)},
                          {"bars", bars}});
      }
      json vec_json = json::array();
      for (const auto& v : vectors) vec_json.push_back(to_json(v));
      emit("deltas.csv", longf.str());
      emit("deltas_wide.csv", widef.str());
      emit("deltas.json", json{{"run_ids", run_ids}, {"vectors", vec_json}}.dump(2) + "\n");
      emit("deltas_series.json", json{{"run_ids", run_ids}, {"series", series}}.dump(2) + "\n");
      break;
    }
    case AnalysisKind::CoMovers: {
      const auto vectors = detail::all_deltas(inputs);
      std::ostringstream csv;
      csv << "model,target,level,scope,first,first_delta,second,second_delta\n";
      json reports = json::array();
      auto row = [&](const std::string& model, const CoMoverReport& r, const char* scope) {
        csv << csv_field(model) << ',' << to_string(r.target_trait) << ',' << detail::level_text(r.level) << ','
            << scope << ',' << to_string(r.first.trait) << ',' << format_2dp(r.first.delta) << ','
            << to_string(r.second.trait) << ',' << format_2dp(r.second.delta) << '\n';
        json j = to_json(r);
        j["model_id"] = model;
        j["scope"] = scope;
        reports.push_back(j);
      };
      std::map<std::pair<std::string, TraitId>, std::vector<DeltaVector>> by_target;
      for (const auto& v : vectors) {
        row(v.model_id, co_movers(v), "per-level");
        by_target[{v.model_id, v.target_trait}].push_back(v);
      }
      json series = json::array();
      for (auto& [key, vs] : by_target) {
        std::stable_sort(vs.begin(), vs.end(),
                         [](const DeltaVector& a, const DeltaVector& b) { return a.level.value_or(0) < b.level.value_or(0); });
        const auto agg = aggregate_co_movers(vs);
        if (vs.size() > 1) row(key.first, agg, "aggregate");
        json levels = json::array();
        for (const auto& v : vs) levels.push_back(v.level ? json(*v.level) : json(nullptr));
        json lines = json::array();
        auto line = [&](TraitId t, const char* role) {
          json ys = json::array();
          for (const auto& v : vs) ys.push_back(v.deltas[t]);
          lines.push_back({{"trait", std::string(to_string(t))}, {"role", role}, {"deltas", ys}});
        };
        line(key.second, "target");
        line(agg.first.trait, "first");
        line(agg.second.trait, "second");
        series.push_back({{"model_id", key.first},
                          {"target_trait", std::string(to_string(key.second))},
                          {"levels", levels},
                          {"lines", lines}});
      }
      emit("co_movers.csv", csv.str());
      emit("co_movers.json", json{{"run_ids", run_ids}, {"reports", reports}}.dump(2) + "\n");
      emit("co_movers_series.json", json{{"run_ids", run_ids}, {"series", series}}.dump(2) + "\n");
      break;
    }
  }
  return written;
}

}  // namespace pers16
