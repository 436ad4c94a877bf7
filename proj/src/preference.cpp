#include "prof/preference.hpp"

#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "prof/error.hpp"
#include "prof/util.hpp"

namespace prof {

using json = nlohmann::json;

GeneratorHandle GeneratorHandle::from_backend(BackendPtr backend, std::shared_ptr<const PromptLibrary> prompts) {
  GeneratorHandle g;
  g.kind = Kind::backend;
  g.backend = std::move(backend);
  g.prompts = std::move(prompts);
  validate(g);
  return g;
}

GeneratorHandle GeneratorHandle::from_policy(ToyPolicy policy) {
  validate(policy);
  GeneratorHandle g;
  g.kind = Kind::toy_policy;
  g.policy = std::make_shared<const ToyPolicy>(std::move(policy));
  return g;
}

void validate(const GeneratorHandle& g) {
  const bool has_backend = static_cast<bool>(g.backend);
  const bool has_policy = static_cast<bool>(g.policy);
  if (has_backend == has_policy) throw ConfigError("generator needs exactly one of backend or policy");
  if (g.kind == GeneratorHandle::Kind::backend && (!has_backend || !g.prompts)) {
    throw ConfigError("backend generator needs a backend and prompts");
  }
  if (g.kind == GeneratorHandle::Kind::toy_policy && !has_policy) throw ConfigError("toy generator needs a policy");
}

namespace {

std::string source_label(const GeneratorHandle& g) {
  if (g.kind == GeneratorHandle::Kind::toy_policy) return "toy_policy@v" + std::to_string(g.policy->version);
  return backend_identity(g.backend->config());
}

FeedbackText generated(std::string body, const GeneratorHandle& g, double temperature, std::int64_t seed) {
  FeedbackText f;
  f.body = std::move(body);
  f.origin = FeedbackOrigin::generated;
  f.source_model = source_label(g);
  f.generation_params = GenerationParams{temperature, seed};
  return f;
}

}  // namespace

std::vector<FeedbackSample> sample_feedback(const GeneratorHandle& generator, const std::string& essay_key,
                                            const std::string& essay, int k, double temperature, std::int64_t seed) {
  validate(generator);
  if (k < 2) throw PreconditionError("sample_feedback needs k >= 2, got " + std::to_string(k));
  std::vector<FeedbackSample> out(static_cast<std::size_t>(k));
  if (generator.kind == GeneratorHandle::Kind::toy_policy) {
    const auto& policy = *generator.policy;
    const auto ids = sample_templates(policy, essay_key, out.size(), temperature,
                                      static_cast<std::uint64_t>(seed) ^ fnv1a64(essay_key));
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i].feedback = generated(policy.templates[ids[i]], generator, temperature, seed);
      out[i].template_id = ids[i];
    }
  } else {
    const auto prompt = generator.prompts->get("generate_feedback").render({{"essay", essay}});
    std::vector<GenerationRequest> requests;
    for (std::size_t i = 0; i < out.size(); ++i) {
      requests.push_back({Role::generator, prompt, temperature, seed + static_cast<std::int64_t>(i)});
    }
    const auto results = generator.backend->batch_generate(requests);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!results[i].ok()) {
        out[i].error = results[i].error_message();
        continue;
      }
      std::string body = trim(results[i].value());
      if (body.empty()) {
        out[i].error = "generator returned empty feedback";
        continue;
      }
      out[i].feedback = generated(std::move(body), generator, temperature, requests[i].seed);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i].feedback) continue;
    for (std::size_t j = 0; j < i; ++j) {
      if (out[j].feedback && out[j].feedback->body == out[i].feedback->body) {
        out[i].duplicate = true;
        break;
      }
    }
  }
  return out;
}

FeedbackText greedy_feedback(const GeneratorHandle& generator, const std::string& essay_key, const std::string& essay) {
  validate(generator);
  if (generator.kind == GeneratorHandle::Kind::toy_policy) {
    return generated(generator.policy->templates[greedy_template(*generator.policy, essay_key)], generator, 0.0, 0);
  }
  const auto prompt = generator.prompts->get("generate_feedback").render({{"essay", essay}});
  std::string body = trim(generator.backend->generate({Role::generator, prompt, 0.0, 0}));
  if (body.empty()) throw MalformedResponse("generator returned empty feedback");
  return generated(std::move(body), generator, 0.0, 0);
}

std::optional<std::pair<std::size_t, std::size_t>> select_pair(const std::vector<double>& scores) {
  std::optional<std::size_t> best, worst;
  std::size_t finite = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) continue;
    ++finite;
    if (!best || scores[i] > scores[*best]) best = i;
    if (!worst || scores[i] < scores[*worst]) worst = i;
  }
  if (finite < 2 || !(scores[*best] > scores[*worst])) return std::nullopt;
  return std::make_pair(*best, *worst);
}

json to_json_row(const RevisionRecord& r) {
  json j{{"essay_id", r.essay_id}, {"candidate", r.candidate}, {"feedback", r.feedback},
         {"temperature", r.temperature}, {"seed", r.seed}};
  j["revised"] = r.revised ? json(*r.revised) : json(nullptr);
  j["score"] = r.score ? json(*r.score) : json(nullptr);
  j["aspects"] = r.aspects ? json(*r.aspects) : json(nullptr);
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

std::int64_t candidate_seed(std::int64_t seed, std::size_t candidate) {
  return static_cast<std::int64_t>(mix_seed(static_cast<std::uint64_t>(seed), candidate) >> 1);
}

namespace {

RevisionRecord revise_and_score(const EssayRecord& essay, const FeedbackText& feedback, std::size_t candidate,
                                const SimulatorHandle& simulator, const Judge& judge, std::int64_t seed,
                                double sim_temperature) {
  RevisionRecord rec;
  rec.essay_id = essay.essay_id;
  rec.candidate = candidate;
  rec.feedback = feedback.body;
  rec.temperature = sim_temperature;
  rec.seed = candidate_seed(seed, candidate);
  try {
    rec.revised = revise(simulator, essay.initial, feedback, sim_temperature, rec.seed);
    rec.aspects = judge.score_essay(*rec.revised, rec.seed);
    rec.score = rec.aspects->normalized();
  } catch (const Error& e) {
    rec.error = e.what();
    rec.score.reset();
    spdlog::warn("candidate {} of essay {} failed: {}", candidate, essay.essay_id, e.what());
  }
  return rec;
}

PairOutcome select_outcome(const EssayRecord& essay, const std::vector<FeedbackText>& candidates,
                           std::vector<RevisionRecord> revisions, int iteration) {
  PairOutcome out;
  std::vector<double> scores;
  for (const auto& r : revisions) scores.push_back(r.score.value_or(std::numeric_limits<double>::quiet_NaN()));
  out.revisions = std::move(revisions);
  const std::size_t survivors = static_cast<std::size_t>(std::count_if(scores.begin(), scores.end(), [](double s) { return std::isfinite(s); }));
  const auto sel = select_pair(scores);
  if (!sel) {
    out.skip_reason = survivors < 2 ? "fewer than two candidates survived" : "all candidate scores are equal";
    spdlog::info("essay {} skipped: {}", essay.essay_id, out.skip_reason);
    return out;
  }
  PreferencePair p;
  p.essay_id = essay.essay_id;
  p.prompt_context = essay.initial;
  p.chosen = candidates[sel->first];
  p.rejected = candidates[sel->second];
  p.chosen_score = scores[sel->first];
  p.rejected_score = scores[sel->second];
  p.iteration = iteration;
  p.candidate_scores = scores;
  out.pair = std::move(p);
  return out;
}

}  // namespace

PairOutcome build_pair(const EssayRecord& essay, const std::vector<FeedbackText>& candidates,
                       const SimulatorHandle& simulator, const Judge& judge, std::int64_t seed,
                       const BuildOptions& options) {
  return build_pairs({essay}, {candidates}, simulator, judge, seed, options).front();
}

std::vector<PairOutcome> build_pairs(const std::vector<EssayRecord>& essays,
                                     const std::vector<std::vector<FeedbackText>>& candidates,
                                     const SimulatorHandle& simulator, const Judge& judge, std::int64_t seed,
                                     const BuildOptions& options) {
  if (essays.size() != candidates.size()) throw LengthMismatch(essays.size(), candidates.size());
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  std::vector<std::vector<RevisionRecord>> revisions(essays.size());
  for (std::size_t e = 0; e < essays.size(); ++e) {
    if (candidates[e].size() < 2) throw PreconditionError("essay " + essays[e].essay_id + " needs at least 2 candidates");
    revisions[e].resize(candidates[e].size());
    for (std::size_t c = 0; c < candidates[e].size(); ++c) jobs.emplace_back(e, c);
  }
  parallel_for(jobs.size(), options.max_concurrency, [&](std::size_t j) {
    const auto [e, c] = jobs[j];
    revisions[e][c] = revise_and_score(essays[e], candidates[e][c], c, simulator, judge, seed, options.sim_temperature);
  });
  std::vector<PairOutcome> out;
  out.reserve(essays.size());
  for (std::size_t e = 0; e < essays.size(); ++e) {
    out.push_back(select_outcome(essays[e], candidates[e], std::move(revisions[e]), options.iteration));
  }
  return out;
}

}  // namespace prof
