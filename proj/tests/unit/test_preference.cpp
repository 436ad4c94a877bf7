#include <doctest.h>

#include <cmath>

#include "prof/error.hpp"
#include "prof/preference.hpp"
#include "prof/scripted.hpp"

using namespace prof;

namespace {

struct Rig {
  std::shared_ptr<PromptLibrary> prompts = std::make_shared<PromptLibrary>();
  BackendPtr backend = scripted::make_backend(prompts, scripted::Schedule{{{2.0, 0, 0}}});
  SimulatorHandle sim = make_simulator(backend, *prompts, "scripted");
  Judge judge{backend, prompts};
};

FeedbackText fb(std::string body) {
  FeedbackText f;
  f.body = std::move(body);
  f.origin = FeedbackOrigin::generated;
  return f;
}

EssayRecord essay(std::string id) {
  return EssayRecord{std::move(id), "Dear Senator. I think the proposal sounds helpful at first.", {"a", "b", "c"},
                     std::nullopt, std::nullopt};
}

}  // namespace

TEST_CASE("select_pair") {
  auto p = select_pair({64, 80, 56, 80, 70});
  REQUIRE(p);
  CHECK(p->first == 1);
  CHECK(p->second == 2);
  CHECK_FALSE(select_pair({70, 70, 70}));
  CHECK_FALSE(select_pair({NAN, 70}));
  p = select_pair({NAN, 50, 60, NAN});
  REQUIRE(p);
  CHECK(*p == std::make_pair<std::size_t, std::size_t>(2, 1));
  p = select_pair({50, 50, 40, 40});
  REQUIRE(p);
  CHECK(*p == std::make_pair<std::size_t, std::size_t>(0, 2));
}

TEST_CASE("candidate seeds are stable and non-negative") {
  CHECK(candidate_seed(7, 0) == candidate_seed(7, 0));
  CHECK(candidate_seed(7, 0) != candidate_seed(7, 1));
  for (std::size_t i = 0; i < 20; ++i) CHECK(candidate_seed(-3, i) >= 0);
}

TEST_CASE("toy policy sampling") {
  const auto g = GeneratorHandle::from_policy(uniform_policy({"A", "B", "C"}));
  const auto s = sample_feedback(*&g, "e1", "text", 6, 1.0, 11);
  REQUIRE(s.size() == 6);
  for (std::size_t i = 0; i < s.size(); ++i) {
    REQUIRE(s[i].feedback);
    CHECK(s[i].feedback->origin == FeedbackOrigin::generated);
    CHECK(s[i].feedback->source_model == "toy_policy@v0");
    bool earlier = false;
    for (std::size_t j = 0; j < i; ++j) earlier |= s[j].feedback->body == s[i].feedback->body;
    CHECK(s[i].duplicate == earlier);
  }
  const auto again = sample_feedback(g, "e1", "text", 6, 1.0, 11);
  for (std::size_t i = 0; i < 6; ++i) CHECK(again[i].template_id == s[i].template_id);
  CHECK_THROWS_AS(sample_feedback(g, "e1", "text", 1, 1.0, 11), PreconditionError);
  CHECK(greedy_feedback(g, "e1", "text").body == "A");
}

TEST_CASE("backend generator sampling") {
  Rig rig;
  const auto g = GeneratorHandle::from_backend(rig.backend, rig.prompts);
  const auto s = sample_feedback(g, "e1", "Some essay text.", 3, 1.0, 5);
  for (const auto& x : s) {
    REQUIRE(x.feedback);
    CHECK(x.feedback->source_model == "scripted_mock:mock");
    CHECK_FALSE(x.template_id);
  }
  CHECK(s[2].feedback->generation_params->seed == 7);
  GeneratorHandle neither;
  CHECK_THROWS_AS(validate(neither), ConfigError);
}

TEST_CASE("build_pair picks the best and worst revisions") {
  Rig rig;
  const std::vector<FeedbackText> cands{
      fb("Nice."),
      fb("APPEND: A price floor creates a surplus and unemployment."),
      fb("APPEND: A price floor creates a surplus, and the article calls it not economical, for example."),
  };
  const auto out = build_pair(essay("e1"), cands, rig.sim, rig.judge, 3, BuildOptions{0.85, 2, 2});
  REQUIRE(out.pair);
  CHECK(out.pair->chosen.body == cands[2].body);
  CHECK(out.pair->rejected.body == cands[0].body);
  CHECK(out.pair->iteration == 2);
  CHECK(out.pair->candidate_scores.size() == 3);
  CHECK(out.pair->chosen_score > out.pair->rejected_score);
  REQUIRE(out.revisions.size() == 3);
  CHECK(out.revisions[1].seed == candidate_seed(3, 1));
}

TEST_CASE("ties and failures skip the essay") {
  Rig rig;
  const auto tie = build_pair(essay("e1"), {fb("Nice."), fb("Good.")}, rig.sim, rig.judge, 0, {});
  CHECK_FALSE(tie.pair);
  CHECK(tie.skip_reason == "all candidate scores are equal");

  auto prompts = std::make_shared<PromptLibrary>();
  auto empty_sim = std::make_shared<Backend>(BackendConfig{});
  MockRoute blank;
  blank.role = Role::simulator;
  blank.responses = {"   "};
  empty_sim->add_route(blank);
  const auto sim = make_simulator(empty_sim, *prompts, "blank");
  const auto failed = build_pair(essay("e1"), {fb("x"), fb("y")}, sim, rig.judge, 0, {});
  CHECK_FALSE(failed.pair);
  CHECK(failed.skip_reason == "fewer than two candidates survived");
  CHECK_FALSE(failed.revisions[0].error.empty());
  CHECK(to_json_row(failed.revisions[0])["score"].is_null());
  CHECK_THROWS_AS(build_pair(essay("e1"), {fb("x")}, rig.sim, rig.judge, 0, {}), PreconditionError);
}

TEST_CASE("build_pairs keeps input order under concurrency") {
  Rig rig;
  std::vector<EssayRecord> essays;
  std::vector<std::vector<FeedbackText>> cands;
  for (int i = 0; i < 8; ++i) {
    essays.push_back(essay("e" + std::to_string(i)));
    cands.push_back({fb("Nice."), fb("APPEND: There is a surplus.")});
  }
  const auto serial = build_pairs(essays, cands, rig.sim, rig.judge, 1, BuildOptions{0.85, 1, 1});
  const auto wide = build_pairs(essays, cands, rig.sim, rig.judge, 1, BuildOptions{0.85, 1, 8});
  REQUIRE(serial.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    REQUIRE(wide[i].pair);
    CHECK(wide[i].pair->essay_id == essays[i].essay_id);
    CHECK(nlohmann::json(*wide[i].pair) == nlohmann::json(*serial[i].pair));
  }
}
