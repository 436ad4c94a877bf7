#pragma once

#include <filesystem>
#include <optional>

#include "prof/data.hpp"

namespace prof {

// runs/<run_id>/manifest.json
// runs/<run_id>/iter_<t>/{samples,revisions,prefs}.jsonl, policy.json
// runs/<run_id>/eval/
class RunLayout {
 public:
  RunLayout(std::filesystem::path runs_root, std::string run_id)
      : root_(std::move(runs_root) / run_id), run_id_(std::move(run_id)) {}
  explicit RunLayout(std::filesystem::path run_dir)
      : root_(std::move(run_dir)), run_id_(root_.filename().string()) {}

  const std::filesystem::path& root() const { return root_; }
  const std::string& run_id() const { return run_id_; }

  std::filesystem::path manifest() const { return root_ / "manifest.json"; }
  std::filesystem::path iteration(int t) const { return root_ / ("iter_" + std::to_string(t)); }
  std::filesystem::path samples(int t) const { return iteration(t) / "samples.jsonl"; }
  std::filesystem::path revisions(int t) const { return iteration(t) / "revisions.jsonl"; }
  std::filesystem::path prefs(int t) const { return iteration(t) / "prefs.jsonl"; }
  std::filesystem::path policy(int t) const { return iteration(t) / "policy.json"; }
  // Written last; an iteration counts as complete only when this exists.
  std::filesystem::path done_marker(int t) const { return iteration(t) / "DONE"; }
  std::filesystem::path eval_dir() const { return root_ / "eval"; }
  std::filesystem::path data_dir() const { return root_ / "data"; }
  std::filesystem::path analysis_dir() const { return root_ / "analysis"; }

  /// Highest t such that iterations 1..t are all complete; 0 if none.
  int last_completed_iteration() const;

 private:
  std::filesystem::path root_;
  std::string run_id_;
};

void write_manifest(const RunLayout& layout, const RunManifest& manifest);
std::optional<RunManifest> read_manifest(const RunLayout& layout);

void write_json_file(const std::filesystem::path& path, const json& value);
json read_json_file(const std::filesystem::path& path);

}  // namespace prof
