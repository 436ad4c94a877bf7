#include <doctest.h>

#include <filesystem>

#include "prof/error.hpp"
#include "prof/loop.hpp"
#include "prof/scripted.hpp"
#include "prof/util.hpp"

using namespace prof;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = PROF_SOURCE_DIR;

struct Rig {
  std::shared_ptr<PromptLibrary> prompts = std::make_shared<PromptLibrary>();
  BackendPtr backend = scripted::make_backend(prompts, scripted::default_schedule());
  SimulatorHandle sim = make_simulator(backend, *prompts, "scripted");
  Judge judge{backend, prompts};
  std::vector<EssayRecord> train;
  ToyPolicy policy = load_policy(kSource / "data/demo_policy.json");

  Rig() {
    auto all = load_dataset(kSource / "data/demo_essays.jsonl");
    train.assign(all.begin(), all.begin() + 6);
  }
};

RunManifest manifest(int iterations = 2) {
  RunManifest m;
  m.run_id = "t";
  m.iteration_count = iterations;
  m.k_samples = 4;
  m.seed = 7;
  return m;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("prof_loop_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("loop writes every iteration artifact") {
  Rig rig;
  const RunLayout layout(scratch("full"), "t");
  const auto r = prof_loop(rig.train, GeneratorHandle::from_policy(rig.policy), rig.sim, rig.judge, manifest(), layout,
                           LoopOptions{std::nullopt, 2});
  REQUIRE(r.iterations.size() == 2);
  CHECK_FALSE(r.awaiting_external_model);
  for (int t = 1; t <= 2; ++t) {
    CHECK(fs::exists(layout.samples(t)));
    CHECK(fs::exists(layout.revisions(t)));
    CHECK(fs::exists(layout.prefs(t)));
    CHECK(fs::exists(layout.done_marker(t)));
    CHECK(load_policy(layout.policy(t)).version == rig.policy.version + t);
    CHECK(r.iterations[t - 1].pairs > 0);
  }
  CHECK(layout.last_completed_iteration() == 2);
  CHECK(read_jsonl_rows(layout.samples(1)).size() == rig.train.size() * 4);
  const auto m = read_manifest(layout);
  REQUIRE(m);
  CHECK_FALSE(m->created_at.empty());
  fs::remove_all(layout.root().parent_path());
}

TEST_CASE("resume reproduces an uninterrupted run") {
  Rig rig;
  const auto gen = GeneratorHandle::from_policy(rig.policy);
  const RunLayout a(scratch("a"), "t");
  const RunLayout b(scratch("b"), "t");
  prof_loop(rig.train, gen, rig.sim, rig.judge, manifest(3), a);
  prof_loop(rig.train, gen, rig.sim, rig.judge, manifest(3), b, LoopOptions{1, 4});
  CHECK(b.last_completed_iteration() == 1);
  const auto resumed = prof_loop(rig.train, gen, rig.sim, rig.judge, manifest(3), b);
  CHECK(resumed.iterations[0].resumed);
  CHECK_FALSE(resumed.iterations[1].resumed);
  for (int t = 1; t <= 3; ++t) {
    CHECK(read_file(a.prefs(t)) == read_file(b.prefs(t)));
    CHECK(read_file(a.policy(t)) == read_file(b.policy(t)));
  }
  fs::remove_all(a.root().parent_path());
  fs::remove_all(b.root().parent_path());
}

TEST_CASE("a changed manifest is refused") {
  Rig rig;
  const RunLayout layout(scratch("mismatch"), "t");
  prof_loop(rig.train, GeneratorHandle::from_policy(rig.policy), rig.sim, rig.judge, manifest(1), layout);
  auto changed = manifest(1);
  changed.beta = 0.3;
  CHECK_THROWS_AS(prof_loop(rig.train, GeneratorHandle::from_policy(rig.policy), rig.sim, rig.judge, changed, layout),
                  ConfigError);
  fs::remove_all(layout.root().parent_path());
}

TEST_CASE("zero pairs is an error after diagnostics are written") {
  Rig rig;
  const RunLayout layout(scratch("ties"), "t");
  const auto flat = GeneratorHandle::from_policy(uniform_policy({"Nice work.", "Good letter."}));
  CHECK_THROWS_AS(prof_loop(rig.train, flat, rig.sim, rig.judge, manifest(1), layout), DataError);
  CHECK(fs::exists(layout.samples(1)));
  CHECK(fs::exists(layout.revisions(1)));
  CHECK_FALSE(fs::exists(layout.done_marker(1)));
  fs::remove_all(layout.root().parent_path());
}

TEST_CASE("a backend generator exports pairs and halts") {
  Rig rig;
  const RunLayout layout(scratch("external"), "t");
  auto generator = std::make_shared<Backend>(BackendConfig{});
  MockRoute route;
  route.role = Role::generator;
  route.responses = {"Nice letter.", "APPEND: A price floor causes a surplus.", "Good start.",
                     "APPEND: For example, unemployment rises."};
  generator->add_route(route);
  const auto gen = GeneratorHandle::from_backend(generator, rig.prompts);
  const auto r = prof_loop(rig.train, gen, rig.sim, rig.judge, manifest(3), layout);
  CHECK(r.awaiting_external_model);
  CHECK(r.iterations.size() == 1);
  const auto rows = read_jsonl_rows(layout.iteration(1) / "export.jsonl");
  REQUIRE_FALSE(rows.empty());
  for (const char* key : {"prompt", "chosen", "rejected", "essay_id", "iteration"}) CHECK(rows[0].contains(key));
  CHECK(read_json_file(layout.manifest()).contains("external_trainer"));
  fs::remove_all(layout.root().parent_path());
}

TEST_CASE("export rows") {
  PreferencePair p;
  p.essay_id = "e";
  p.prompt_context = "Essay body.";
  p.chosen.body = "A";
  p.rejected.body = "B";
  const auto plain = export_prefs({p});
  CHECK(plain[0]["prompt"] == "Essay body.");
  const PromptTemplate t("g", "Write feedback for:\n{{essay}}");
  CHECK(export_prefs({p}, &t)[0]["prompt"] == "Write feedback for:\nEssay body.");
}
