#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "prof/backend.hpp"
#include "prof/data.hpp"
#include "prof/judge.hpp"
#include "prof/policy.hpp"
#include "prof/prompt.hpp"
#include "prof/simulator.hpp"

namespace prof {

/// The feedback generator M_t: either a backend endpoint or a toy policy.
struct GeneratorHandle {
  enum class Kind { backend, toy_policy };

  Kind kind = Kind::toy_policy;
  BackendPtr backend;
  std::shared_ptr<const PromptLibrary> prompts;  // backend only
  std::shared_ptr<const ToyPolicy> policy;

  static GeneratorHandle from_backend(BackendPtr backend, std::shared_ptr<const PromptLibrary> prompts);
  static GeneratorHandle from_policy(ToyPolicy policy);
};

/// Exactly one of backend / policy populated. Throws ConfigError.
void validate(const GeneratorHandle& generator);

struct FeedbackSample {
  std::optional<FeedbackText> feedback;  // empty when generation failed
  std::string error;
  bool duplicate = false;  // same body as an earlier sample
  std::optional<std::size_t> template_id;
};

/// K samples with origin generated. The toy policy draws from one stream
/// seeded with seed ^ fnv1a64(essay_key); a backend gets one request per
/// sample with seeds seed, seed+1, ... Throws PreconditionError when k < 2.
std::vector<FeedbackSample> sample_feedback(const GeneratorHandle& generator, const std::string& essay_key,
                                            const std::string& essay, int k, double temperature, std::int64_t seed);

/// One deterministic feedback: argmax template, or temperature 0 for a backend.
FeedbackText greedy_feedback(const GeneratorHandle& generator, const std::string& essay_key, const std::string& essay);

/// Indices of (argmax, argmin) over the finite scores, earliest index on
/// ties. nullopt when fewer than two scores are finite or all are equal.
std::optional<std::pair<std::size_t, std::size_t>> select_pair(const std::vector<double>& scores);

struct RevisionRecord {
  std::string essay_id;
  std::size_t candidate = 0;
  std::string feedback;
  double temperature = 0;
  std::int64_t seed = 0;
  std::optional<std::string> revised;
  std::optional<AspectScores> aspects;
  std::optional<double> score;  // 0..100
  std::string error;
};

nlohmann::json to_json_row(const RevisionRecord& r);

struct PairOutcome {
  std::optional<PreferencePair> pair;
  std::vector<RevisionRecord> revisions;
  std::string skip_reason;  // set when no pair
};

struct BuildOptions {
  double sim_temperature = 0.85;
  int iteration = 1;
  std::size_t max_concurrency = 4;
};

/// Revises the essay under each candidate, scores every revision with the
/// rubric judge and pairs the best against the worst. Failed candidates are
/// dropped; the essay is skipped when fewer than two survive or all tie.
PairOutcome build_pair(const EssayRecord& essay, const std::vector<FeedbackText>& candidates,
                       const SimulatorHandle& simulator, const Judge& judge, std::int64_t seed,
                       const BuildOptions& options);

/// Per-essay candidates aligned with `essays`; outcomes keep input order.
std::vector<PairOutcome> build_pairs(const std::vector<EssayRecord>& essays,
                                     const std::vector<std::vector<FeedbackText>>& candidates,
                                     const SimulatorHandle& simulator, const Judge& judge, std::int64_t seed,
                                     const BuildOptions& options);

/// Simulator/judge seed for candidate i; shared by every essay.
std::int64_t candidate_seed(std::int64_t seed, std::size_t candidate);

}  // namespace prof
