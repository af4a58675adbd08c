#include <gtest/gtest.h>

#include <fstream>

#include "pers16/orchestrator.hpp"
#include "test_support.hpp"

using namespace pers16;
using pers16::testing::fixture_dir;
using pers16::testing::read_file;
using pers16::testing::reference_bank;
using pers16::testing::TempDir;

namespace {

// Writes a ground-truth file and returns a synthetic model spec pointing at it.
ModelSpec synthetic_model(const TempDir& dir, const GroundTruth& gt, const std::string& id = "synthetic") {
  const auto path = dir / (id + "_gt.json");
  std::ofstream(path) << to_json(gt).dump();
  ModelSpec m;
  m.model_id = id;
  m.endpoint = "synthetic://local";
  m.request_style = "synthetic";
  m.ground_truth = path.string();
  return m;
}

// Raises the cancel flag once `after` requests have been answered.
class CancellingBackend : public Backend {
 public:
  CancellingBackend(const ItemBank& bank, GroundTruth gt, std::atomic<bool>& cancel, int after)
      : inner_(bank, std::move(gt)), cancel_(cancel), after_(after) {}
  std::string send(const ChatRequest& req) override {
    if (++calls_ >= after_) cancel_.store(true);
    return inner_.send(req);
  }
  std::string tag() const override { return "synthetic"; }

 private:
  SyntheticBackend inner_;
  std::atomic<bool>& cancel_;
  int after_;
  std::atomic<int> calls_{0};
};

RunOptions options(const std::filesystem::path& out) {
  RunOptions o;
  o.out_dir = out;
  o.concurrency = 4;
  o.policy.base_delay = std::chrono::milliseconds(1);
  return o;
}

}  // namespace

TEST(Orchestrator, ProfileRecoversConstantTheta) {
  TempDir dir;
  GroundTruth gt;
  gt.theta = TraitMap<double>{4.0};
  const auto result = execute_run(reference_bank(), synthetic_model(dir, gt), {ConditionKind::MPI_NEUTRAL},
                                  options(dir / "run"));
  EXPECT_EQ(result.exit_code, kExitOk);
  EXPECT_EQ(result.summary.succeeded, 163u);
  ASSERT_EQ(result.profiles.size(), 1u);
  const auto csv = read_file(dir / "run" / "profile.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "trait,mean,variance,n,n_missing");
  EXPECT_NE(csv.find("\nWARMTH,4.00,0.00,10,0\n"), std::string::npos);
  EXPECT_NE(csv.find("\nINTELLECT,4.00,0.00,13,0\n"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 17);
  const auto doc = json::parse(read_file(dir / "run" / "profile.json"));
  EXPECT_EQ(doc["run_ids"][0], result.manifest.run_id);
}

TEST(Orchestrator, ManifestReproducesPlan) {
  TempDir dir;
  GroundTruth gt;
  const auto model = synthetic_model(dir, gt);
  PlanOptions grid{ConditionKind::SAC_INDUCED, {TraitId::ANXIETY, TraitId::WARMTH}, {5, 1}};
  const auto m = make_manifest(reference_bank(), model, grid, {});
  const auto back = manifest_from_json(to_json(m));
  EXPECT_EQ(back.run_id, m.run_id);
  EXPECT_EQ(plan_from_manifest(back, reference_bank()), enumerate_plan(reference_bank(), grid));
  EXPECT_EQ(sha256_hex(detail::manifest_identity(back).dump()).substr(0, 16), m.run_id);

  auto other = m;
  other.bank_digest = "0000";
  EXPECT_THROW(plan_from_manifest(other, reference_bank()), ConfigError);

  auto warmer = model;
  warmer.temperature = 0.7;
  EXPECT_NE(make_manifest(reference_bank(), warmer, grid, {}).run_id, m.run_id);
}

TEST(Orchestrator, ExistingRecordsRequireResume) {
  TempDir dir;
  GroundTruth gt;
  const auto model = synthetic_model(dir, gt);
  execute_run(reference_bank(), model, {ConditionKind::SAC_NEUTRAL}, options(dir / "run"));
  EXPECT_THROW(execute_run(reference_bank(), model, {ConditionKind::SAC_NEUTRAL}, options(dir / "run")), ConfigError);
  auto resume = options(dir / "run");
  resume.resume = true;
  const auto again = execute_run(reference_bank(), model, {ConditionKind::SAC_NEUTRAL}, resume);
  EXPECT_EQ(again.summary.skipped, 240u);
  EXPECT_EQ(again.backend_calls, 0u);
  // A different configuration cannot reuse the directory.
  EXPECT_THROW(execute_run(reference_bank(), model, {ConditionKind::MPI_NEUTRAL}, resume), ConfigError);
}

TEST(Orchestrator, InterruptedRunResumesToIdenticalReports) {
  TempDir dir;
  GroundTruth gt;
  gt.theta[TraitId::WARMTH] = 5;
  gt.theta[TraitId::ANXIETY] = 1;
  gt.coupling[index_of(TraitId::WARMTH)][index_of(TraitId::DISTRUST)] = -1.0;
  const auto model = synthetic_model(dir, gt);
  const PlanOptions grid{ConditionKind::SAC_INDUCED, {TraitId::WARMTH}, {1, 3, 5}};
  const auto& bank = reference_bank();

  const auto straight = execute_run(bank, model, grid, options(dir / "straight"));
  ASSERT_EQ(straight.exit_code, kExitOk);

  std::atomic<bool> cancel{false};
  CancellingBackend killer(bank, gt, cancel, 360);
  auto interrupted = options(dir / "resumed");
  interrupted.backend = &killer;
  interrupted.cancel = &cancel;
  const auto half = execute_run(bank, model, grid, interrupted);
  EXPECT_EQ(half.exit_code, kExitPartial);
  EXPECT_GT(half.summary.not_run, 0u);
  EXPECT_FALSE(std::filesystem::exists(dir / "resumed" / "profiles.json"));
  {
    // Simulate a write cut off mid-line.
    std::ofstream out(dir / "resumed" / "records.jsonl", std::ios::app);
    out << R"({"job_id":"trunc)";
  }

  auto resume = options(dir / "resumed");
  resume.resume = true;
  const auto rest = execute_run(bank, model, grid, resume);
  EXPECT_EQ(rest.exit_code, kExitOk);
  EXPECT_EQ(rest.summary.skipped + rest.summary.succeeded, 720u);
  EXPECT_EQ(rest.summary.skipped, half.summary.succeeded);

  for (const std::string f : {"profiles.json", "summary.json", "profiles/SAC_INDUCED_WARMTH_L5.csv",
                              "profiles/SAC_INDUCED_WARMTH_L1.csv", "profiles/SAC_INDUCED_WARMTH_L3.csv"}) {
    EXPECT_EQ(read_file(dir / "straight" / f), read_file(dir / "resumed" / f)) << f;
  }
  EXPECT_EQ(read_records(dir / "resumed" / "records.jsonl").size(), 720u);
}

TEST(Orchestrator, CacheWarmedRerunMakesNoBackendCalls) {
  TempDir dir;
  GroundTruth gt;
  const auto model = synthetic_model(dir, gt);
  auto a = options(dir / "a");
  a.cache_dir = dir / "cache";
  const auto first = execute_run(reference_bank(), model, {ConditionKind::MPI_NEUTRAL}, a);
  EXPECT_EQ(first.backend_calls, 163u);
  auto b = options(dir / "b");
  b.cache_dir = dir / "cache";
  const auto second = execute_run(reference_bank(), model, {ConditionKind::MPI_NEUTRAL}, b);
  EXPECT_EQ(second.backend_calls, 0u);
  EXPECT_EQ(read_file(dir / "a" / "profile.csv"), read_file(dir / "b" / "profile.csv"));
}

TEST(Orchestrator, LimitedRunWritesRecordsAndSummaryOnly) {
  TempDir dir;
  GroundTruth gt;
  auto o = options(dir / "smoke");
  o.limit = 10;
  const auto r = execute_run(reference_bank(), synthetic_model(dir, gt), {ConditionKind::MPI_NEUTRAL}, o);
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_EQ(read_records(dir / "smoke" / "records.jsonl").size(), 10u);
  const auto summary = json::parse(read_file(dir / "smoke" / "summary.json"));
  EXPECT_EQ(summary["recorded"], 10);
  EXPECT_EQ(summary["planned"], 163);
  EXPECT_FALSE(std::filesystem::exists(dir / "smoke" / "profile.csv"));
}

TEST(Orchestrator, RegenerateReportsMatchesRun) {
  TempDir dir;
  GroundTruth gt;
  gt.theta[TraitId::RESERVE] = 2;
  execute_run(reference_bank(), synthetic_model(dir, gt), {ConditionKind::P2_INDUCED, {TraitId::RESERVE}},
              options(dir / "run"));
  const auto before = read_file(dir / "run" / "profiles.json");
  std::filesystem::remove(dir / "run" / "profiles.json");
  regenerate_reports(reference_bank(), dir / "run", VarianceMode::Population);
  EXPECT_EQ(read_file(dir / "run" / "profiles.json"), before);
}

TEST(Analyze, DistancesFromPublishedFixture) {
  TempDir dir;
  std::vector<TraitProfile> ps;
  for (const std::string slug : {"gpt-4o", "claude", "gemini"}) {
    auto p = load_profiles(fixture_dir() / "published" / (slug + ".json"));
    ps.insert(ps.end(), p.begin(), p.end());
  }
  analyze(ps, AnalysisKind::Distances, dir.path());
  const auto csv = read_file(dir / "distances.csv");
  EXPECT_EQ(csv,
            "model,GPT-4o,Claude 3.7 Sonnet,Gemini 2.5 Flash\n"
            "GPT-4o,0.00,2.24,1.50\n"
            "Claude 3.7 Sonnet,2.24,0.00,2.33\n"
            "Gemini 2.5 Flash,1.50,2.33,0.00\n");
  const auto doc = json::parse(read_file(dir / "distances.json"));
  EXPECT_EQ(doc["run_ids"], json::array({"published-fixture"}));
  EXPECT_NEAR(doc["matrix"][0][1].get<double>(), 2.25, 0.01);

  analyze(ps, AnalysisKind::Sd, dir.path());
  const auto sd = read_file(dir / "trait_sd.csv");
  EXPECT_NE(sd.find("\nWARMTH,4.60,4.90,4.70,0.15,0.12\n"), std::string::npos) << sd;
  EXPECT_NE(sd.find("\nINTELLECT,4.62,4.15,4.38,0.23,0.19\n"), std::string::npos) << sd;
}

TEST(Analyze, RejectsMixedBanksAndFamilies) {
  TempDir dir;
  const TraitMap<double> m{3.0};
  using pers16::testing::make_profile;
  const std::vector<TraitProfile> banks = {make_profile("a", Condition::mpi_neutral(), m, "bank1"),
                                           make_profile("b", Condition::mpi_neutral(), m, "bank2")};
  EXPECT_THROW(analyze(banks, AnalysisKind::Distances, dir.path()), AnalysisError);
  const std::vector<TraitProfile> families = {make_profile("a", Condition::mpi_neutral(), m),
                                              make_profile("a", Condition::sac_induced(TraitId::WARMTH, 5), m)};
  EXPECT_THROW(analyze(families, AnalysisKind::Deltas, dir.path()), AnalysisError);
}

TEST(Analyze, CoMoverReportsFromSyntheticRuns) {
  TempDir dir;
  GroundTruth gt;
  gt.coupling[index_of(TraitId::WARMTH)][index_of(TraitId::DISTRUST)] = -2.0;
  gt.coupling[index_of(TraitId::WARMTH)][index_of(TraitId::RESERVE)] = -1.0;
  const auto model = synthetic_model(dir, gt);
  const auto neutral = execute_run(reference_bank(), model, {ConditionKind::SAC_NEUTRAL}, options(dir / "n"));
  const auto induced =
      execute_run(reference_bank(), model, {ConditionKind::SAC_INDUCED, {TraitId::WARMTH}, {1, 3, 5}}, options(dir / "i"));
  std::vector<TraitProfile> ps = neutral.profiles;
  ps.insert(ps.end(), induced.profiles.begin(), induced.profiles.end());
  analyze(ps, AnalysisKind::CoMovers, dir / "out");
  const auto csv = read_file(dir / "out" / "co_movers.csv");
  EXPECT_NE(csv.find("synthetic,WARMTH,5,per-level,DISTRUST,-2.00,RESERVE,-1.00\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("synthetic,WARMTH,1,per-level,DISTRUST,2.00,RESERVE,1.00\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("synthetic,WARMTH,,aggregate,DISTRUST,2.00,RESERVE,1.00\n"), std::string::npos) << csv;
  const auto series = json::parse(read_file(dir / "out" / "co_movers_series.json"));
  EXPECT_EQ(series["series"][0]["levels"], json::array({1, 3, 5}));
  EXPECT_EQ(series["series"][0]["lines"][0]["role"], "target");

  analyze(ps, AnalysisKind::Deltas, dir / "out");
  const auto wide = read_file(dir / "out" / "deltas_wide.csv");
  EXPECT_NE(wide.find("\nsynthetic,5,2.00,"), std::string::npos) << wide;
}
