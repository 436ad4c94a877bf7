#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prof/backend.hpp"
#include "prof/data.hpp"
#include "prof/prompt.hpp"

namespace prof {

/// A student simulator: any backend answering the revise prompt.
struct SimulatorHandle {
  BackendPtr backend;
  PromptTemplate revise_prompt;
  std::string label;  // e.g. which model family it wraps
};

/// Template must have {{essay}} and {{feedback}}. Throws ConfigError.
void validate(const SimulatorHandle& simulator);

SimulatorHandle make_simulator(BackendPtr backend, const PromptLibrary& prompts, std::string label);

/// Merges three peer reviews into one holistic feedback (origin combined).
/// Throws PreconditionError unless exactly three are given.
FeedbackText combine_feedback(const std::vector<FeedbackText>& feedback, Backend& backend, const PromptLibrary& prompts,
                              std::int64_t seed);

/// y ~ S(.|x, f). Throws EmptyRevision on blank output.
std::string revise(const SimulatorHandle& simulator, const std::string& essay, const FeedbackText& feedback,
                   double temperature, std::int64_t seed);

}  // namespace prof
