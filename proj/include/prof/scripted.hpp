#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "prof/backend.hpp"
#include "prof/prompt.hpp"

// Deterministic stand-ins for the simulator, combiner, generator and judges.
// They answer the bundled prompts by reading back the rendered fields, so a
// whole run can execute offline and reproducibly.
namespace prof::scripted {

// ---------------------------------------------------------------- directives

enum class DirectiveKind { append, delete_sentence, replace };

/// Feedback lines of the form
///   APPEND: <sentence>
///   DELETE_SENTENCE: <1-based index>
///   REPLACE: <old> -> <new>
struct Directive {
  DirectiveKind kind = DirectiveKind::append;
  std::string text;          // appended sentence
  std::size_t index = 0;     // sentence to delete
  std::string old_text;      // replace source
  std::string new_text;      // replace target
  std::string source_line;   // the directive as written
};

std::vector<Directive> parse_directives(std::string_view feedback);
std::optional<Directive> parse_directive(std::string_view line);

// ---------------------------------------------------------------- schedule

struct ScheduleBucket {
  double max_temperature = 2.0;
  int unfaithful_edits = 0;    // filler sentences inserted that no directive asked for
  int ignored_directives = 0;  // directives silently skipped
};

/// Buckets sorted by max_temperature; a request uses the first bucket whose
/// max_temperature is >= its temperature.
struct Schedule {
  std::vector<ScheduleBucket> buckets;

  std::size_t bucket_index(double temperature) const;
  const ScheduleBucket& bucket_for(double temperature) const;
};

/// {"buckets": [{"max_temperature": .., "unfaithful_edits": .., "ignored_directives": ..}]}
Schedule schedule_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Schedule& s);
/// One bucket per default temperature, more unfaithful edits when hotter.
Schedule default_schedule();

/// Deterministic revision: applies REPLACE, DELETE_SENTENCE, inserts the
/// bucket's filler sentences at seeded positions, then APPENDs. Ignored
/// directives are chosen by a seed that does not depend on the feedback text.
/// Returns the essay unchanged when nothing applies.
std::string revise(const std::string& essay, const std::string& feedback, double temperature, std::int64_t seed,
                   const Schedule& schedule);

/// Sentences the scripted simulator may insert unprompted. None contains a
/// rubric keyword.
const std::vector<std::string>& filler_sentences();

// ---------------------------------------------------------------- judges

/// Rubric aspect score = clamp(2 + distinct keyword hits, 1, 5); conciseness
/// comes from word count instead.
std::array<int, 6> aspect_scores(std::string_view essay);
const std::vector<std::string>& aspect_keywords(std::size_t aspect_index);

std::string rubric_response(std::string_view essay);
std::string pedagogical_response(std::string_view feedback);
std::string segments_response(std::string_view feedback);
std::string scope_response(std::string_view segment);
std::string consistency_response(std::string_view segment);
std::string suggestions_response(std::string_view feedback);
/// Verdict per listed suggestion plus the count of new sentences that no
/// APPEND or REPLACE accounts for.
std::string faithfulness_response(std::string_view suggestions, std::string_view initial, std::string_view revised);
std::string combine_response(std::string_view r1, std::string_view r2, std::string_view r3);
std::string generator_response(std::string_view essay, std::int64_t seed);

// ---------------------------------------------------------------- wiring

/// Adds responder routes for every role, answering the bundled prompts.
void install_routes(Backend& backend, std::shared_ptr<const PromptLibrary> prompts, Schedule schedule);

/// A scripted_mock backend named `name` with every route installed.
BackendPtr make_backend(std::shared_ptr<const PromptLibrary> prompts, Schedule schedule, std::string name = "mock",
                        std::optional<std::filesystem::path> cache_dir = std::nullopt);

}  // namespace prof::scripted
