#include "prof/loop.hpp"

#include <filesystem>

#include <spdlog/spdlog.h>

#include "prof/dpo.hpp"
#include "prof/error.hpp"
#include "prof/policy.hpp"
#include "prof/util.hpp"

namespace prof {

using json = nlohmann::json;

std::vector<json> export_prefs(const std::vector<PreferencePair>& pairs, const PromptTemplate* prompt) {
  std::vector<json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    rows.push_back({{"prompt", prompt ? prompt->render({{"essay", p.prompt_context}}) : p.prompt_context},
                    {"chosen", p.chosen.body},
                    {"rejected", p.rejected.body},
                    {"essay_id", p.essay_id},
                    {"iteration", p.iteration}});
  }
  return rows;
}

namespace {

void prepare_manifest(const RunLayout& layout, const RunManifest& manifest) {
  validate(manifest);
  if (const auto existing = read_manifest(layout)) {
    if (manifest_hash(*existing) != manifest_hash(manifest)) {
      throw ConfigError("run '" + layout.run_id() + "' already exists with a different manifest");
    }
    return;
  }
  std::filesystem::create_directories(layout.root());
  RunManifest stamped = manifest;
  if (stamped.created_at.empty()) stamped.created_at = utc_timestamp();
  write_manifest(layout, stamped);
}

GeneratorHandle generator_for(int t, const GeneratorHandle& generator0, const RunLayout& layout) {
  if (t == 1) return generator0;
  const auto previous = layout.policy(t - 1);
  if (std::filesystem::exists(previous)) return GeneratorHandle::from_policy(load_policy(previous));
  if (generator0.kind == GeneratorHandle::Kind::backend) return generator0;
  throw InternalError("iteration " + std::to_string(t - 1) + " is complete but has no policy.json");
}

void record_external_halt(const RunLayout& layout, int t) {
  json m = read_json_file(layout.manifest());
  m["external_trainer"] = {{"halted_after_iteration", t},
                           {"export", std::filesystem::relative(layout.iteration(t) / "export.jsonl", layout.root()).string()}};
  write_json_file(layout.manifest(), m);
}

IterationSummary run_iteration(int t, const std::vector<EssayRecord>& train, const GeneratorHandle& generator,
                               const SimulatorHandle& simulator, const Judge& judge, const RunManifest& manifest,
                               const RunLayout& layout, const LoopOptions& options) {
  IterationSummary summary;
  summary.iteration = t;
  const std::int64_t seed = manifest.seed + t;
  std::filesystem::create_directories(layout.iteration(t));

  // 1. sample K feedback per essay from M_t
  std::vector<std::vector<FeedbackSample>> samples(train.size());
  parallel_for(train.size(), options.max_concurrency, [&](std::size_t e) {
    samples[e] = sample_feedback(generator, train[e].essay_id, train[e].initial, manifest.k_samples,
                                 manifest.generator_temperature, seed);
  });

  std::vector<json> sample_rows;
  std::vector<EssayRecord> eligible;
  std::vector<std::vector<FeedbackText>> candidates;
  for (std::size_t e = 0; e < train.size(); ++e) {
    std::vector<FeedbackText> ok;
    for (std::size_t i = 0; i < samples[e].size(); ++i) {
      const auto& s = samples[e][i];
      json row{{"essay_id", train[e].essay_id}, {"candidate", i}, {"duplicate", s.duplicate}};
      row["template_id"] = s.template_id ? json(*s.template_id) : json(nullptr);
      row["feedback"] = s.feedback ? json(*s.feedback) : json(nullptr);
      if (!s.error.empty()) row["error"] = s.error;
      sample_rows.push_back(std::move(row));
      ++summary.samples;
      if (s.feedback) {
        ok.push_back(*s.feedback);
      } else {
        ++summary.failed_samples;
      }
    }
    if (ok.size() < 2) {
      spdlog::warn("iteration {}: essay {} has fewer than two usable samples", t, train[e].essay_id);
      ++summary.skipped;
      continue;
    }
    eligible.push_back(train[e]);
    candidates.push_back(std::move(ok));
  }
  write_jsonl_rows(sample_rows, layout.samples(t));

  // 2. revise, score and pair
  BuildOptions build;
  build.sim_temperature = manifest.sim_temperature;
  build.iteration = t;
  build.max_concurrency = options.max_concurrency;
  const auto outcomes = build_pairs(eligible, candidates, simulator, judge, seed, build);
  std::vector<json> revision_rows;
  std::vector<PreferencePair> pairs;
  for (const auto& o : outcomes) {
    for (const auto& r : o.revisions) revision_rows.push_back(to_json_row(r));
    if (o.pair) {
      pairs.push_back(*o.pair);
    } else {
      ++summary.skipped;
    }
  }
  write_jsonl_rows(revision_rows, layout.revisions(t));
  write_jsonl(pairs, layout.prefs(t));
  summary.pairs = pairs.size();
  if (pairs.empty()) {
    throw DataError("iteration " + std::to_string(t) + " built zero preference pairs (" +
                    std::to_string(summary.skipped) + " essays skipped); see " + layout.revisions(t).string());
  }

  // 3. obtain M_{t+1}
  if (generator.kind == GeneratorHandle::Kind::toy_policy) {
    DPOConfig cfg;
    cfg.beta = manifest.beta;
    cfg.learning_rate = manifest.learning_rate;
    cfg.epochs = manifest.epochs;
    cfg.loss_form = manifest.loss_form;
    TrainReport report;
    const ToyPolicy next = train_dpo(*generator.policy, pairs, cfg, &report);
    save_policy(next, layout.policy(t));
    write_json_file(layout.iteration(t) / "train.json", {{"loss_before", report.loss_before},
                                                         {"loss_after", report.loss_after},
                                                         {"epoch_losses", report.epoch_losses},
                                                         {"pairs", pairs.size()}});
    summary.loss_before = report.loss_before;
    summary.loss_after = report.loss_after;
  } else {
    write_jsonl_rows(export_prefs(pairs, &generator.prompts->get("generate_feedback")),
                     layout.iteration(t) / "export.jsonl");
  }
  write_file_atomic(layout.done_marker(t), "");
  return summary;
}

}  // namespace

LoopResult prof_loop(const std::vector<EssayRecord>& train, const GeneratorHandle& generator0,
                     const SimulatorHandle& simulator, const Judge& judge, const RunManifest& manifest,
                     const RunLayout& layout, const LoopOptions& options) {
  validate(generator0);
  validate(simulator);
  if (train.empty()) throw PreconditionError("training set is empty");
  prepare_manifest(layout, manifest);

  LoopResult result;
  const int done = layout.last_completed_iteration();
  const int last = options.stop_after ? std::min(*options.stop_after, manifest.iteration_count) : manifest.iteration_count;
  for (int t = 1; t <= last; ++t) {
    if (t <= done) {
      IterationSummary s;
      s.iteration = t;
      s.resumed = true;
      result.iterations.push_back(s);
      continue;
    }
    const GeneratorHandle generator = generator_for(t, generator0, layout);
    spdlog::info("iteration {} starting ({} essays, K={})", t, train.size(), manifest.k_samples);
    auto summary = run_iteration(t, train, generator, simulator, judge, manifest, layout, options);
    spdlog::info("iteration {} done: {} pairs, {} skipped", t, summary.pairs, summary.skipped);
    result.iterations.push_back(summary);
    if (generator.kind == GeneratorHandle::Kind::backend) {
      record_external_halt(layout, t);
      result.awaiting_external_model = true;
      spdlog::info("iteration {} exported; awaiting an external model for the next iteration", t);
      break;
    }
  }
  return result;
}

}  // namespace prof
