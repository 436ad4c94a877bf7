#include "prof/simulator.hpp"

#include "prof/error.hpp"
#include "prof/util.hpp"

namespace prof {

void validate(const SimulatorHandle& simulator) {
  if (!simulator.backend) throw ConfigError("simulator '" + simulator.label + "' has no backend");
  for (const char* key : {"essay", "feedback"}) {
    if (!simulator.revise_prompt.has_placeholder(key)) {
      throw ConfigError(std::string("revise prompt lacks the {{") + key + "}} placeholder");
    }
  }
}

SimulatorHandle make_simulator(BackendPtr backend, const PromptLibrary& prompts, std::string label) {
  SimulatorHandle handle{std::move(backend), prompts.get("revise"), std::move(label)};
  validate(handle);
  return handle;
}

FeedbackText combine_feedback(const std::vector<FeedbackText>& feedback, Backend& backend, const PromptLibrary& prompts,
                              std::int64_t seed) {
  if (feedback.size() != 3) {
    throw PreconditionError("combine_feedback needs exactly 3 feedback, got " + std::to_string(feedback.size()));
  }
  const auto prompt = prompts.get("combine").render(
      {{"review_1", feedback[0].body}, {"review_2", feedback[1].body}, {"review_3", feedback[2].body}});
  std::string body = trim(backend.generate({Role::combiner, prompt, 0.0, seed}));
  if (body.empty()) throw MalformedResponse("combiner returned empty text");
  FeedbackText out;
  out.body = std::move(body);
  out.origin = FeedbackOrigin::combined;
  out.source_model = backend_identity(backend.config());
  return out;
}

std::string revise(const SimulatorHandle& simulator, const std::string& essay, const FeedbackText& feedback,
                   double temperature, std::int64_t seed) {
  validate(simulator);
  const auto prompt = simulator.revise_prompt.render({{"essay", essay}, {"feedback", feedback.body}});
  std::string text = simulator.backend->generate({Role::simulator, prompt, temperature, seed});
  if (trim(text).empty()) throw EmptyRevision();
  return text;
}

}  // namespace prof
