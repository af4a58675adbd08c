// pers16: profile and induce 16PF traits in chat models, then analyze.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <iostream>
#include <sstream>

#include "pers16/orchestrator.hpp"

namespace {

std::atomic<bool> g_cancel{false};

extern "C" void on_sigint(int) { g_cancel.store(true); }

struct Globals {
  std::string bank_path = "data/reference_bank.json";
  std::string model_config;
  std::string model_id;
  std::size_t concurrency = 4;
  std::optional<double> temperature;
  std::string cache_dir;
  bool resume = false;
  std::string levels = "1,3,5";
  std::string targets;
  std::string variance_mode = "population";
  std::string out_dir;
  int max_attempts = 3;
  double rps = 0.0;
  int repeats = 1;
  std::size_t limit = 0;
};

std::vector<int> parse_levels(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw pers16::ConfigError("bad level '" + tok + "'");
    }
  }
  return out;
}

std::vector<pers16::TraitId> parse_targets(const std::string& s) {
  std::vector<pers16::TraitId> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    auto t = pers16::parse_trait(tok);
    if (!t) throw pers16::ConfigError("unknown trait '" + tok + "'");
    out.push_back(*t);
  }
  return out;
}

pers16::ModelSpec select_model(const Globals& g) {
  if (g.model_config.empty()) throw pers16::ConfigError("--model-config is required");
  auto specs = pers16::load_model_config(g.model_config);
  if (specs.empty()) throw pers16::ConfigError("model config lists no models");
  pers16::ModelSpec spec;
  if (g.model_id.empty()) {
    if (specs.size() > 1) throw pers16::ConfigError("model config lists several models; pick one with --model");
    spec = specs.front();
  } else {
    auto it = std::find_if(specs.begin(), specs.end(), [&](const auto& m) { return m.model_id == g.model_id; });
    if (it == specs.end()) throw pers16::ConfigError("model '" + g.model_id + "' is not in the config");
    spec = *it;
  }
  if (g.temperature) spec.temperature = *g.temperature;
  spec.validate();
  return spec;
}

int run_grid(const Globals& g, pers16::PlanOptions grid) {
  const auto bank = pers16::load_bank(g.bank_path);
  const auto spec = select_model(g);
  if (g.out_dir.empty()) throw pers16::ConfigError("--out is required");
  grid.repeats = g.repeats;
  pers16::RunOptions opts;
  opts.out_dir = g.out_dir;
  opts.concurrency = g.concurrency;
  if (!g.cache_dir.empty()) opts.cache_dir = g.cache_dir;
  opts.resume = g.resume;
  opts.variance_mode = pers16::variance_mode_from_string(g.variance_mode);
  opts.policy.max_attempts = g.max_attempts;
  opts.policy.requests_per_second = g.rps;
  opts.cancel = &g_cancel;
  if (g.limit > 0) opts.limit = g.limit;

  std::signal(SIGINT, on_sigint);
  const auto result = pers16::execute_run(bank, spec, grid, opts);
  std::cerr << "run " << result.manifest.run_id << ": " << result.summary.succeeded << " ok, " << result.summary.failed
            << " failed, " << result.summary.skipped << " resumed, " << result.summary.not_run << " not run\n";
  if (result.summary.not_run > 0) std::cerr << "interrupted; rerun with --resume to finish\n";
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"16PF personality profiling and SAC trait induction for chat models"};
  app.require_subcommand(1);
  // Global flags may follow the subcommand.
  app.fallthrough();
  Globals g;
  app.add_option("--bank", g.bank_path, "Item bank JSON")->capture_default_str();
  app.add_option("--model-config", g.model_config, "JSON list of model specs");
  app.add_option("--model", g.model_id, "model_id to use from the config");
  app.add_option("--concurrency", g.concurrency, "Requests in flight")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--temperature", g.temperature, "Override the model's sampling temperature");
  app.add_option("--cache-dir", g.cache_dir, "Response cache directory");
  app.add_flag("--resume", g.resume, "Continue a run whose out dir already has records");
  app.add_option("--levels", g.levels, "SAC intensity levels, comma separated")->capture_default_str();
  app.add_option("--targets", g.targets, "Induction targets, comma separated (default: all)");
  app.add_option("--variance-mode", g.variance_mode, "population|sample")->capture_default_str();
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--max-attempts", g.max_attempts, "Attempts per request")->capture_default_str();
  app.add_option("--rps", g.rps, "Request rate limit per second (0: none)");
  app.add_option("--repeats", g.repeats, "Samples per prompt")->capture_default_str();
  app.add_option("--limit", g.limit, "Run only the first N jobs of the plan (smoke test)");

  auto* profile = app.add_subcommand("profile", "Neutral inventory profile");
  auto* sac_neutral = app.add_subcommand("sac-neutral", "Neutral SAC intensity profile");
  auto* induce = app.add_subcommand("induce", "Trait induction runs");
  induce->require_subcommand(1);
  induce->fallthrough();
  auto* induce_p2 = induce->add_subcommand("p2", "Monologue-prefixed inventory per target");
  auto* induce_sac = induce->add_subcommand("sac", "Graded SAC induction per target and level");

  auto* analyze = app.add_subcommand("analyze", "Distances, SDs, deltas, co-movers over profile files");
  std::string analysis;
  std::vector<std::string> inputs;
  analyze->add_option("--analysis", analysis, "distances|sd|deltas|co-movers")->required();
  analyze->add_option("inputs", inputs, "profile.json / profiles.json files")->required();

  auto* report = app.add_subcommand("report", "Rebuild a run's reports from its records");
  std::string run_dir;
  report->add_option("run_dir", run_dir, "Run output directory")->required();

  auto* plan = app.add_subcommand("plan", "Write a plan as JSONL without running it");
  std::string plan_kind;
  plan->add_option("kind", plan_kind, "MPI_NEUTRAL|P2_INDUCED|SAC_NEUTRAL|SAC_INDUCED")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pers16::kExitConfig;
  }

  try {
    if (*profile) return run_grid(g, {pers16::ConditionKind::MPI_NEUTRAL, {}, {}, 1});
    if (*sac_neutral) return run_grid(g, {pers16::ConditionKind::SAC_NEUTRAL, {}, {}, 1});
    if (*induce_p2) return run_grid(g, {pers16::ConditionKind::P2_INDUCED, parse_targets(g.targets), {}, 1});
    if (*induce_sac) {
      return run_grid(g, {pers16::ConditionKind::SAC_INDUCED, parse_targets(g.targets), parse_levels(g.levels), 1});
    }
    if (*analyze) {
      if (g.out_dir.empty()) throw pers16::ConfigError("--out is required");
      std::vector<pers16::TraitProfile> profiles;
      for (const auto& path : inputs) {
        auto ps = pers16::load_profiles(path);
        profiles.insert(profiles.end(), ps.begin(), ps.end());
      }
      for (const auto& f : pers16::analyze(profiles, pers16::analysis_kind_from_string(analysis), g.out_dir)) {
        std::cout << f.string() << '\n';
      }
      return pers16::kExitOk;
    }
    if (*report) {
      const auto bank = pers16::load_bank(g.bank_path);
      pers16::regenerate_reports(bank, run_dir, pers16::variance_mode_from_string(g.variance_mode));
      return pers16::kExitOk;
    }
    if (*plan) {
      const auto bank = pers16::load_bank(g.bank_path);
      pers16::PlanOptions opts{pers16::condition_kind_from_string(plan_kind), parse_targets(g.targets),
                               parse_levels(g.levels), g.repeats};
      const auto jobs = pers16::enumerate_plan(bank, opts);
      pers16::write_plan_jsonl(std::cout, jobs);
      return pers16::kExitOk;
    }
  } catch (const pers16::RetriesExhaustedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pers16::kExitPartial;
  } catch (const pers16::SinkError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pers16::kExitPartial;
  } catch (const std::exception& e) {
    // Bank, config, plan, and analysis validation failures.
    std::cerr << "error: " << e.what() << '\n';
    return pers16::kExitConfig;
  }
  return pers16::kExitOk;
}
