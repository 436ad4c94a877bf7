#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "prof/error.hpp"
#include "prof/eval.hpp"
#include "prof/scripted.hpp"

using namespace prof;

namespace {

// Simulator echoes the essay; the judge gives 3s to essays mentioning ALPHA and 4s otherwise.
struct EchoRig {
  std::shared_ptr<PromptLibrary> prompts = std::make_shared<PromptLibrary>();
  BackendPtr backend = std::make_shared<Backend>(BackendConfig{});
  SimulatorHandle sim;
  std::shared_ptr<Judge> judge;

  EchoRig() {
    MockRoute revise;
    revise.role = Role::simulator;
    revise.responder = [p = prompts](const GenerationRequest& g) { return p->get("revise").extract(g.prompt)->at("essay"); };
    MockRoute rubric;
    rubric.role = Role::judge;
    rubric.pattern = "ESSAY:";
    rubric.responder = [](const GenerationRequest& g) {
      const char* v = g.prompt.find("ALPHA") != std::string::npos ? "3" : "4";
      std::string out;
      for (auto a : kAspects) out += aspect_label(a) + ": " + v + "\n";
      return out;
    };
    backend->add_route(revise);
    backend->add_route(rubric);
    sim = make_simulator(backend, *prompts, "echo");
    judge = std::make_shared<Judge>(backend, prompts);
  }
};

EssayRecord essay(std::string id, std::string text) {
  return EssayRecord{std::move(id), std::move(text), {"a", "b", "c"}, std::nullopt, std::nullopt};
}

FeedbackSegment seg(SegmentCategory c, std::optional<Scope> scope = std::nullopt, std::optional<bool> consistent = std::nullopt) {
  return FeedbackSegment{"s", c, scope, consistent};
}

}  // namespace

TEST_CASE("row arithmetic") {
  const std::vector<double> cells{70.6, 80.0, 78.6, 60.0};
  CHECK(row_average(cells) == doctest::Approx(72.3));
  const auto row = make_row("m", cells);
  CHECK(row.cells.size() == 4);
  CHECK(*row.avg == doctest::Approx(72.3));
  CHECK_THROWS_AS(row_average(std::vector<double>{}), EmptyScores);
  CHECK_THROWS_AS(row_average(std::vector<double>{1.0, NAN}), NonFiniteInput);

  Table t{"extrinsic", {"0.7", "1.0"}, {make_row("a", {50, 70})}, "abc"};
  CHECK(averages_consistent(t));
  t.rows[0].avg = 61.0;
  CHECK_FALSE(averages_consistent(t));
}

TEST_CASE("table rendering") {
  TableRow partial = make_row("b", {50, 70});
  partial.cells[1].valid = false;
  partial.cells[1].value.reset();
  partial.avg.reset();
  const Table t{"extrinsic", {"0.7", "1.0"}, {make_row("a", {50, 70}), partial}, "h"};
  const auto md = to_markdown(t);
  CHECK(md.find("| Approach | 0.7 | 1.0 | Avg |") != std::string::npos);
  CHECK(md.find("| a | 50.0 | 70.0 | 60.0 |") != std::string::npos);
  CHECK(md.find("| b | 50.0 | n/a | n/a |") != std::string::npos);
  const auto csv = to_csv(t);
  CHECK(csv.rfind("label,0.7,1.0,avg\n", 0) == 0);
  CHECK(csv.find("b,50.000000,,\n") != std::string::npos);
  nlohmann::json j = t;
  const auto back = j.get<Table>();
  CHECK(back.rows.size() == 2);
  CHECK_FALSE(back.rows[1].cells[1].valid);
  CHECK(to_markdown(back) == md);
}

TEST_CASE("extrinsic cell is the mean over essays") {
  EchoRig rig;
  const auto gen = GeneratorHandle::from_policy(uniform_policy({"Nice."}));
  const std::vector<EssayRecord> test{essay("x", "ALPHA essay."), essay("y", "Plain essay.")};
  const auto r = extrinsic_eval(gen, "initial", rig.sim, *rig.judge, test, {0.7, 1.0}, {0, 1});
  REQUIRE(r.row.cells.size() == 2);
  CHECK(*r.row.cells[0].value == doctest::Approx(70.0));
  CHECK(r.row.cells[0].attempted == 4);
  CHECK(r.row.cells[0].succeeded == 4);
  CHECK(*r.row.avg == doctest::Approx(70.0));
  CHECK(r.provenance.size() == 8);

  const auto table = extrinsic_table({r}, "h");
  CHECK(table.columns == std::vector<std::string>{"0.7", "1.0"});
  CHECK(averages_consistent(table));
}

TEST_CASE("extrinsic cells below the completeness threshold are invalid") {
  EchoRig rig;
  MockRoute empty;
  empty.role = Role::simulator;
  empty.pattern = "BROKEN";
  empty.responses = {" "};
  auto backend = std::make_shared<Backend>(BackendConfig{});
  backend->add_route(empty);
  backend->add_route(MockRoute{Role::simulator, ".*", 0.0, 2.0, {}, [p = rig.prompts](const GenerationRequest& g) {
                                 return p->get("revise").extract(g.prompt)->at("essay");
                               }});
  const auto sim = make_simulator(backend, *rig.prompts, "partial");
  const auto gen = GeneratorHandle::from_policy(uniform_policy({"Nice."}));
  const std::vector<EssayRecord> test{essay("x", "BROKEN essay."), essay("y", "Plain essay.")};
  const auto r = extrinsic_eval(gen, "m", sim, *rig.judge, test, {0.7}, {0});
  CHECK_FALSE(r.row.cells[0].valid);
  CHECK(r.row.cells[0].succeeded == 1);
  CHECK_FALSE(r.row.avg);
}

TEST_CASE("intrinsic scores scale by twenty") {
  auto prompts = std::make_shared<PromptLibrary>();
  auto backend = scripted::make_backend(prompts, scripted::default_schedule());
  Judge judge(backend, prompts);
  const auto gen = GeneratorHandle::from_policy(
      uniform_policy({"Understanding 1: Good terms, but missing a source? Critical Thinking 1: great."}));
  const auto r = intrinsic_eval(gen, "m", judge, {essay("x", "Essay one."), essay("y", "Essay two.")});
  REQUIRE(r.row.cells.size() == 4);
  // RGQ 2 headings, EAL 1 question, DM 1 problem word, MSSC good + great
  CHECK(*r.row.cells[0].value == doctest::Approx(40.0));
  CHECK(*r.row.cells[1].value == doctest::Approx(20.0));
  CHECK(*r.row.cells[2].value == doctest::Approx(20.0));
  CHECK(*r.row.cells[3].value == doctest::Approx(40.0));
  CHECK(r.records.size() == 2);
  CHECK(intrinsic_table({r}, "h").columns == kPedagogicalColumns);
}

TEST_CASE("segment summaries") {
  const std::vector<std::vector<FeedbackSegment>> fb{
      {seg(SegmentCategory::praise), seg(SegmentCategory::praise), seg(SegmentCategory::solution, Scope::local, true),
       seg(SegmentCategory::solution, Scope::local, true), seg(SegmentCategory::problem, Scope::global, false)},
      {seg(SegmentCategory::praise), seg(SegmentCategory::praise), seg(SegmentCategory::solution, Scope::local, true),
       seg(SegmentCategory::solution, std::nullopt, std::nullopt), seg(SegmentCategory::problem, std::nullopt, std::nullopt)},
  };
  const auto s = summarize_segments(2, fb);
  CHECK(s.iteration == 2);
  CHECK(s.feedback_count == 2);
  CHECK(s.mean_praise == 2);
  CHECK(s.mean_solution == 2);
  CHECK(s.mean_problem == 1);
  CHECK(*s.local_fraction == doctest::Approx(0.75));
  CHECK(*s.consistent_fraction == doctest::Approx(0.75));

  const auto none = summarize_segments(1, {{seg(SegmentCategory::praise)}});
  CHECK_FALSE(none.local_fraction);
  CHECK_FALSE(none.consistent_fraction);
  CHECK(nlohmann::json(none)["local_fraction"].is_null());
}

TEST_CASE("segment evolution needs samples") {
  auto prompts = std::make_shared<PromptLibrary>();
  Judge judge(scripted::make_backend(prompts, scripted::default_schedule()), prompts);
  const auto dir = std::filesystem::temp_directory_path() / "prof_seg_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "t" / "iter_1");
  CHECK_THROWS_AS(segment_evolution(RunLayout(dir, "t"), judge), MissingFile);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pearson and mse") {
  const std::vector<double> a{1, 2, 3}, b{3, 2, 1}, c{1, 2, 4};
  CHECK(pearson(a, a) == doctest::Approx(1.0));
  CHECK(pearson(a, b) == doctest::Approx(-1.0));
  CHECK(pearson(a, c) == doctest::Approx(0.9820).epsilon(1e-4));
  const std::vector<double> scaled{-1, -3, -5};
  CHECK(pearson(scaled, c) == doctest::Approx(-pearson(a, c)));
  CHECK_THROWS_AS(pearson(a, std::vector<double>{1, 2}), LengthMismatch);
  CHECK_THROWS_AS(pearson(a, std::vector<double>{2, 2, 2}), ZeroVariance);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), PreconditionError);

  CHECK(mse(a, a) == 0.0);
  CHECK(mse(std::vector<double>{0, 1}, std::vector<double>{1, 1}) == 0.5);
  CHECK_THROWS_AS(mse(a, std::vector<double>{1}), LengthMismatch);
}
