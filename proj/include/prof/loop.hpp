#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prof/data.hpp"
#include "prof/judge.hpp"
#include "prof/preference.hpp"
#include "prof/run_dir.hpp"
#include "prof/simulator.hpp"

namespace prof {

struct LoopOptions {
  // Stop after this iteration even if more are configured; used to
  // simulate an interrupted run.
  std::optional<int> stop_after;
  std::size_t max_concurrency = 4;
};

struct IterationSummary {
  int iteration = 0;
  std::size_t samples = 0;
  std::size_t failed_samples = 0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;
  std::optional<double> loss_before;
  std::optional<double> loss_after;
  bool resumed = false;  // already complete on disk
};

struct LoopResult {
  std::vector<IterationSummary> iterations;
  // Backend generators stop after exporting pairs; a new endpoint must be
  // supplied for the next model.
  bool awaiting_external_model = false;
};

/// Rows {prompt, chosen, rejected, essay_id, iteration} for external DPO trainers.
/// When `prompt` is given the essay is rendered into it; otherwise the prompt
/// is the essay text.
std::vector<nlohmann::json> export_prefs(const std::vector<PreferencePair>& pairs,
                                         const PromptTemplate* prompt = nullptr);

/// Runs iterations 1..manifest.iteration_count over `train`, skipping those
/// already marked complete under `layout`. A manifest already on disk must
/// hash identically (ConfigError otherwise). Throws DataError when an
/// iteration builds zero pairs, after writing its diagnostics.
LoopResult prof_loop(const std::vector<EssayRecord>& train, const GeneratorHandle& generator0,
                     const SimulatorHandle& simulator, const Judge& judge, const RunManifest& manifest,
                     const RunLayout& layout, const LoopOptions& options = {});

}  // namespace prof
