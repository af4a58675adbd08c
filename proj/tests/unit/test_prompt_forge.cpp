#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "pers16/prompt_forge.hpp"
#include "test_support.hpp"

using namespace pers16;
using pers16::testing::fixture_dir;
using pers16::testing::read_file;
using pers16::testing::reference_bank;

namespace {
std::string golden(const std::string& name) { return read_file(fixture_dir() / "golden" / "v1" / name); }

const Item& first_warmth_item() { return *reference_bank().find_item("WRM01"); }
}  // namespace

TEST(PromptForge, MpiPromptMatchesGolden) {
  EXPECT_EQ(build_mpi_prompt(first_warmth_item()), golden("mpi_WRM01.txt"));
}

TEST(PromptForge, P2PromptMatchesGolden) {
  const auto& bank = reference_bank();
  EXPECT_EQ(build_p2_prompt(bank.meta_for(TraitId::COMPLEXITY), first_warmth_item()),
            golden("p2_COMPLEXITY_WRM01.txt"));
}

TEST(PromptForge, SacNeutralPromptMatchesGolden) {
  const auto& bank = reference_bank();
  const auto q = bank.questions_for(TraitId::WARMTH)[0];
  EXPECT_EQ(build_sac_neutral_prompt(TraitId::WARMTH, bank.meta_for(TraitId::WARMTH), bank.factor(FactorId::FREQUENCY), q),
            golden("sac_neutral_WARMTH_FREQUENCY_q0.txt"));
}

TEST(PromptForge, SacInducedPromptMatchesGolden) {
  const auto& bank = reference_bank();
  const auto q = bank.questions_for(TraitId::WARMTH)[0];
  const auto text = build_sac_induced_prompt(TraitId::WARMTH, 5, bank.anchors_for(TraitId::WARMTH), TraitId::WARMTH,
                                             bank.factor(FactorId::FREQUENCY), q, bank.meta_for(TraitId::WARMTH));
  EXPECT_EQ(text, golden("sac_induced_WARMTH_L5_WARMTH_FREQUENCY_q0.txt"));
  EXPECT_NE(text.find("How often do you cheer people up?"), std::string::npos);
  EXPECT_NE(text.find("5: extremely warm, deeply empathetic, overwhelmingly supportive"), std::string::npos);
}

TEST(PromptForge, CompositeQuestion) {
  const auto& bank = reference_bank();
  EXPECT_EQ(composite_question(bank.factor(FactorId::FREQUENCY), bank.questions_for(TraitId::WARMTH)[0]),
            "How often do you cheer people up?");
}

TEST(PromptForge, InducedPromptRejectsForeignQuestion) {
  const auto& bank = reference_bank();
  const auto q = bank.questions_for(TraitId::ANXIETY)[0];
  EXPECT_THROW(build_sac_induced_prompt(TraitId::WARMTH, 5, bank.anchors_for(TraitId::WARMTH), TraitId::WARMTH,
                                        bank.factor(FactorId::FREQUENCY), q, bank.meta_for(TraitId::WARMTH)),
               PlanError);
  EXPECT_THROW(build_sac_induced_prompt(TraitId::WARMTH, 6, bank.anchors_for(TraitId::WARMTH), TraitId::WARMTH,
                                        bank.factor(FactorId::FREQUENCY), bank.questions_for(TraitId::WARMTH)[0],
                                        bank.meta_for(TraitId::WARMTH)),
               PlanError);
}

TEST(Plan, Cardinalities) {
  const auto& bank = reference_bank();
  EXPECT_EQ(enumerate_plan(bank, {ConditionKind::MPI_NEUTRAL}).size(), 163u);
  EXPECT_EQ(enumerate_plan(bank, {ConditionKind::P2_INDUCED}).size(), 2608u);
  EXPECT_EQ(enumerate_plan(bank, {ConditionKind::SAC_NEUTRAL}).size(), 240u);
  EXPECT_EQ(enumerate_plan(bank, {ConditionKind::SAC_INDUCED}).size(), 11520u);
  EXPECT_EQ(enumerate_plan(bank, {ConditionKind::SAC_INDUCED, {TraitId::WARMTH}, {5}}).size(), 240u);
  EXPECT_EQ(enumerate_plan(bank, {ConditionKind::MPI_NEUTRAL, {}, {}, 3}).size(), 489u);
}

TEST(Plan, JobIdsUniqueAndDeterministic) {
  const auto& bank = reference_bank();
  for (auto kind : {ConditionKind::MPI_NEUTRAL, ConditionKind::P2_INDUCED, ConditionKind::SAC_NEUTRAL,
                    ConditionKind::SAC_INDUCED}) {
    const auto a = enumerate_plan(bank, {kind});
    const auto b = enumerate_plan(bank, {kind});
    ASSERT_EQ(a, b);
    std::set<std::string> ids;
    for (const auto& j : a) ids.insert(j.job_id);
    EXPECT_EQ(ids.size(), a.size()) << to_string(kind);
  }
}

TEST(Plan, JobIdDependsOnBankDigest) {
  const auto& bank = reference_bank();
  const Condition c = Condition::mpi_neutral();
  EXPECT_NE(make_job_id(bank.digest, c, TraitId::WARMTH, "WRM01", std::nullopt, std::nullopt, 0),
            make_job_id("other", c, TraitId::WARMTH, "WRM01", std::nullopt, std::nullopt, 0));
  EXPECT_NE(make_job_id(bank.digest, c, TraitId::WARMTH, "WRM01", std::nullopt, std::nullopt, 0),
            make_job_id(bank.digest, c, TraitId::WARMTH, "WRM01", std::nullopt, std::nullopt, 1));
}

TEST(Plan, CanonicalOrder) {
  const auto& bank = reference_bank();
  const auto jobs = enumerate_plan(bank, {ConditionKind::SAC_INDUCED, {TraitId::ANXIETY, TraitId::WARMTH}, {5, 1}});
  ASSERT_EQ(jobs.size(), 2u * 2u * 240u);
  // Targets in canonical trait order, then ascending levels.
  EXPECT_EQ(jobs.front().condition, Condition::sac_induced(TraitId::WARMTH, 1));
  EXPECT_EQ(jobs[240].condition, Condition::sac_induced(TraitId::WARMTH, 5));
  EXPECT_EQ(jobs[480].condition, Condition::sac_induced(TraitId::ANXIETY, 1));
  // Within a condition: observed trait, factor, question.
  EXPECT_EQ(jobs[0].observed_trait, TraitId::WARMTH);
  EXPECT_EQ(jobs[0].factor, FactorId::FREQUENCY);
  EXPECT_EQ(jobs[1].question_index, 1);
  EXPECT_EQ(jobs[3].factor, FactorId::DEPTH);
  EXPECT_EQ(jobs[15].observed_trait, TraitId::INTELLECT);

  const auto mpi = enumerate_plan(bank, {ConditionKind::MPI_NEUTRAL});
  std::size_t k = 0;
  for (auto t : kAllTraits) {
    for (const auto& item : items_for_trait(bank, t)) EXPECT_EQ(mpi[k++].item_id, item.id);
  }
}

TEST(Plan, AnswerSpacesFollowKind) {
  const auto& bank = reference_bank();
  for (const auto& j : enumerate_plan(bank, {ConditionKind::P2_INDUCED, {TraitId::RESERVE}})) {
    EXPECT_EQ(j.expected_answer_space, AnswerSpace::LETTER_A_E);
  }
  for (const auto& j : enumerate_plan(bank, {ConditionKind::SAC_NEUTRAL})) {
    EXPECT_EQ(j.expected_answer_space, AnswerSpace::DIGIT_1_5);
  }
}

TEST(Plan, RejectsBadGrids) {
  const auto& bank = reference_bank();
  EXPECT_THROW(enumerate_plan(bank, {ConditionKind::SAC_INDUCED, {}, {}}), PlanError);
  EXPECT_THROW(enumerate_plan(bank, {ConditionKind::SAC_INDUCED, {}, {0, 3}}), PlanError);
  EXPECT_THROW(enumerate_plan(bank, {ConditionKind::SAC_INDUCED, {}, {3, 3}}), PlanError);
  EXPECT_THROW(enumerate_plan(bank, {ConditionKind::P2_INDUCED, {TraitId::WARMTH, TraitId::WARMTH}}), PlanError);
  EXPECT_THROW(enumerate_plan(bank, {ConditionKind::MPI_NEUTRAL, {}, {}, 0}), PlanError);
}

TEST(Plan, ConditionValidation) {
  EXPECT_NO_THROW(Condition::sac_induced(TraitId::WARMTH, 3).validate());
  EXPECT_THROW((Condition{ConditionKind::SAC_INDUCED, TraitId::WARMTH, std::nullopt}).validate(), PlanError);
  EXPECT_THROW((Condition{ConditionKind::MPI_NEUTRAL, TraitId::WARMTH, std::nullopt}).validate(), PlanError);
  EXPECT_THROW((Condition{ConditionKind::P2_INDUCED, TraitId::WARMTH, 3}).validate(), PlanError);
  EXPECT_EQ(Condition::sac_induced(TraitId::WARMTH, 5).label(), "SAC_INDUCED/WARMTH/L5");
  const auto c = Condition::p2(TraitId::RESERVE);
  EXPECT_EQ(condition_from_json(to_json(c)), c);
}

TEST(Plan, JsonlExportHasOneLinePerJob) {
  const auto jobs = enumerate_plan(reference_bank(), {ConditionKind::SAC_NEUTRAL});
  std::ostringstream os;
  write_plan_jsonl(os, jobs);
  std::istringstream is(os.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    const auto j = json::parse(line);
    EXPECT_EQ(j.at("job_id"), jobs[n].job_id);
    ++n;
  }
  EXPECT_EQ(n, jobs.size());
}
