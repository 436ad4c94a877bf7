#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "prof/backend.hpp"
#include "prof/prompt.hpp"

namespace prof {

enum class Aspect { concepts_accuracy, linking_concepts, conciseness, interpreting_sources, case_study_analysis, audience_alignment };

inline constexpr std::array<Aspect, 6> kAspects = {Aspect::concepts_accuracy,    Aspect::linking_concepts,
                                                   Aspect::conciseness,          Aspect::interpreting_sources,
                                                   Aspect::case_study_analysis, Aspect::audience_alignment};

std::string aspect_name(Aspect a);   // "concepts_accuracy"
std::string aspect_label(Aspect a);  // "Concepts & Accuracy", as the rubric prompt asks for it

struct AspectScores {
  std::array<int, 6> scores{};  // indexed like kAspects, each 1..5
  std::string raw_judge_text;

  int at(Aspect a) const { return scores[static_cast<std::size_t>(a)]; }
  /// 0..100 via normalize_scores.
  double normalized() const;
};

struct PedagogicalScores {
  int rgq = 0;
  int eal = 0;
  int dm = 0;
  int mssc = 0;
  std::string raw_judge_text;

  std::array<int, 4> values() const { return {rgq, eal, dm, mssc}; }
};

enum class SegmentCategory { praise, solution, problem };
enum class Scope { local, global };

std::string to_string(SegmentCategory c);
std::string to_string(Scope s);

struct FeedbackSegment {
  std::string span;
  SegmentCategory category = SegmentCategory::praise;
  // Only set for solution and problem segments.
  std::optional<Scope> scope;
  std::optional<bool> consistent;
};

struct FaithfulnessSubCounts {
  double ignored = 0;
  double misinterpreted = 0;
  double inadequate = 0;
  double unfaithful = 0;
  bool operator==(const FaithfulnessSubCounts&) const = default;
};

struct FaithfulnessSummary {
  double faithful = 0;    // F
  double unfaithful = 0;  // U
  std::optional<FaithfulnessSubCounts> sub_counts;
  std::optional<double> suggestions;
  bool operator==(const FaithfulnessSummary&) const = default;
};

void to_json(nlohmann::json& j, const AspectScores& s);
void to_json(nlohmann::json& j, const PedagogicalScores& s);
void to_json(nlohmann::json& j, const FeedbackSegment& s);
void from_json(const nlohmann::json& j, FeedbackSegment& s);
void to_json(nlohmann::json& j, const FaithfulnessSummary& s);
void from_json(const nlohmann::json& j, FaithfulnessSummary& s);

// ---------------------------------------------------------------- pure helpers

/// 100 * mean(scores) / scale_max. Throws EmptyScores, OutOfRange.
double normalize_scores(std::span<const int> scores, int scale_max);
double normalize_scores(std::span<const double> scores, double scale_max);

/// log10(F / U). Throws DegenerateCounts when either count is zero.
double gamma(double faithful, double unfaithful);

/// Label-line parsers. A line "<Label>: <n>" or "<Label>: ... (<n> Points)"
/// sets that dimension; the last occurrence wins and unknown labels are
/// skipped. Returns nullopt unless every dimension was found in range.
std::optional<AspectScores> parse_aspect_scores(std::string_view text);
std::optional<PedagogicalScores> parse_pedagogical_scores(std::string_view text);

struct RawSegment {
  std::string span;
  bool praise = false;
  bool problem = false;
  bool solution = false;
};

std::optional<std::vector<RawSegment>> parse_segments(std::string_view text);

/// Solution wins over problem, problem over praise.
SegmentCategory categorize(const RawSegment& raw);

/// Checks annotation rows: faithful + ignored + misinterpreted + inadequate
/// must equal suggestions when both are present, and U equals the unfaithful
/// sub-count.
void validate(const FaithfulnessSummary& summary, const std::string& essay_id = {});

struct AnnotationRecord {
  std::string essay_id;
  FaithfulnessSummary summary;
};

/// JSONL {essay_id, suggestions, faithful, ignored, misinterpreted, inadequate, unfaithful}.
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path);
nlohmann::json annotation_to_json(const AnnotationRecord& record);

/// Per-sample averages of F, U and the sub-counts.
FaithfulnessSummary mean_summary(std::span<const FaithfulnessSummary> summaries);

// ---------------------------------------------------------------- LM judge

/// Appended to a prompt when its first answer could not be parsed.
inline constexpr std::string_view kRepromptNote =
    "\n\nYour previous reply did not follow the required output format. Answer again and end with the exact lines requested.\n";

/// Removes kRepromptNote if present.
std::string_view strip_reprompt(std::string_view prompt);

class Judge {
 public:
  Judge(BackendPtr backend, std::shared_ptr<const PromptLibrary> prompts);

  AspectScores score_essay(const std::string& essay, std::int64_t seed) const;
  PedagogicalScores pedagogical_eval(const std::string& feedback, const std::string& essay, std::int64_t seed) const;
  std::vector<FeedbackSegment> segment_feedback(const std::string& feedback, std::int64_t seed) const;
  FaithfulnessSummary classify_faithfulness(const std::string& initial, const std::string& feedback,
                                            const std::string& revised, std::int64_t seed) const;

  const BackendPtr& backend() const { return backend_; }

 private:
  BackendPtr backend_;
  std::shared_ptr<const PromptLibrary> prompts_;
};

}  // namespace prof
