#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace prof {

using json = nlohmann::json;

enum class Split { train, test };

/// One assignment datapoint: initial essay, its peer feedback, and the
/// student's own revision when available.
struct EssayRecord {
  std::string essay_id;
  std::string initial;
  std::vector<std::string> peer_feedback;
  std::optional<std::string> revised;
  std::optional<Split> split;

  bool operator==(const EssayRecord&) const = default;
};

enum class FeedbackOrigin { human_peer, combined, generated };

struct GenerationParams {
  double temperature = 1.0;
  std::int64_t seed = 0;

  bool operator==(const GenerationParams&) const = default;
};

struct FeedbackText {
  std::string body;
  FeedbackOrigin origin = FeedbackOrigin::human_peer;
  std::optional<std::string> source_model;
  std::optional<GenerationParams> generation_params;

  bool operator==(const FeedbackText&) const = default;
};

/// Throws InvariantViolation when body is empty or generation_params is not
/// present exactly for generated feedback.
void validate(const FeedbackText& feedback);

enum class LossForm { log_ratio, literal_ratio };

struct RunManifest {
  std::string run_id;
  int iteration_count = 3;
  int k_samples = 5;
  double beta = 0.1;
  std::vector<double> temperatures{0.7, 0.85, 1.0};
  std::vector<std::int64_t> seeds{0, 1, 2, 3, 4};
  std::map<std::string, std::string> backend_configs;
  std::string created_at;

  // Loop knobs beyond the core fields.
  double sim_temperature = 0.85;
  double generator_temperature = 1.0;
  double learning_rate = 0.5;
  int epochs = 5;
  LossForm loss_form = LossForm::log_ratio;
  std::int64_t seed = 0;

  bool operator==(const RunManifest&) const = default;
};

void validate(const RunManifest& manifest);

/// Hash of the manifest content that produced an artifact. created_at is
/// excluded so a resumed run keeps the same identity.
std::string manifest_hash(const RunManifest& manifest);

struct PreferencePair {
  std::string essay_id;
  std::string prompt_context;
  FeedbackText chosen;
  FeedbackText rejected;
  double chosen_score = 0.0;
  double rejected_score = 0.0;
  int iteration = 1;
  std::vector<double> candidate_scores;

  bool operator==(const PreferencePair&) const = default;
};

void to_json(json& j, const Split& s);
void from_json(const json& j, Split& s);
void to_json(json& j, const FeedbackOrigin& o);
void from_json(const json& j, FeedbackOrigin& o);
void to_json(json& j, const LossForm& f);
void from_json(const json& j, LossForm& f);
void to_json(json& j, const EssayRecord& r);
void from_json(const json& j, EssayRecord& r);
void to_json(json& j, const GenerationParams& p);
void from_json(const json& j, GenerationParams& p);
void to_json(json& j, const FeedbackText& f);
void from_json(const json& j, FeedbackText& f);
void to_json(json& j, const RunManifest& m);
void from_json(const json& j, RunManifest& m);
void to_json(json& j, const PreferencePair& p);
void from_json(const json& j, PreferencePair& p);

// ---------------------------------------------------------------- JSONL

/// One compact JSON object per line, newline-terminated.
std::string to_jsonl(const std::vector<json>& rows);
void write_jsonl_rows(const std::vector<json>& rows, const std::filesystem::path& path);
std::vector<json> read_jsonl_rows(const std::filesystem::path& path);

template <typename T>
void write_jsonl(const std::vector<T>& items, const std::filesystem::path& path) {
  std::vector<json> rows;
  rows.reserve(items.size());
  for (const auto& item : items) rows.emplace_back(item);
  write_jsonl_rows(rows, path);
}

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path);

// ---------------------------------------------------------------- dataset

struct LoadOptions {
  std::size_t expected_feedback_count = 3;
  bool lenient = false;
};

struct LoadReport {
  std::size_t accepted = 0;
  // One message per skipped line; only filled in lenient mode.
  std::vector<std::string> rejected;
};

/// Loads and validates essays.jsonl. Strict mode throws on the first bad
/// line; lenient mode skips it and records the reason in `report`.
std::vector<EssayRecord> load_dataset(const std::filesystem::path& path, const LoadOptions& options = {},
                                      LoadReport* report = nullptr);

/// First train_count records become train, the rest test. Input order is kept.
std::pair<std::vector<EssayRecord>, std::vector<EssayRecord>> split_dataset(const std::vector<EssayRecord>& records,
                                                                            std::size_t train_count);

}  // namespace prof

#include "prof/detail/jsonl_impl.hpp"
