#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prof/data.hpp"
#include "prof/judge.hpp"
#include "prof/preference.hpp"
#include "prof/run_dir.hpp"
#include "prof/simulator.hpp"

namespace prof {

// ---------------------------------------------------------------- tables

struct TableCell {
  std::optional<double> value;  // empty when invalid
  std::size_t attempted = 0;
  std::size_t succeeded = 0;
  bool valid = true;
};

struct TableRow {
  std::string label;
  std::vector<TableCell> cells;
  std::optional<double> avg;  // empty when any cell is invalid
};

struct Table {
  std::string kind;  // "extrinsic" | "intrinsic"
  std::vector<std::string> columns;
  std::vector<TableRow> rows;
  std::string manifest_hash;
};

/// Mean of the cells. Throws EmptyScores.
double row_average(std::span<const double> cells);

/// Row from already-aggregated cell values.
TableRow make_row(std::string label, const std::vector<double>& cells);

/// True when every valid row's avg equals the mean of its cells within tol.
bool averages_consistent(const Table& table, double tol = 1e-9);

void to_json(nlohmann::json& j, const Table& t);
void from_json(const nlohmann::json& j, Table& t);
std::string to_csv(const Table& table);
/// One decimal, an "Avg" column at the end; invalid cells print as "n/a".
std::string to_markdown(const Table& table);

// ---------------------------------------------------------------- extrinsic / intrinsic

struct EvalOptions {
  double completeness_threshold = 0.95;
  std::size_t max_concurrency = 4;
  std::string manifest_hash;
};

struct ExtrinsicResult {
  TableRow row;
  std::vector<double> temperatures;
  std::vector<RevisionRecord> provenance;  // every revision with its raw judge text
};

/// One greedy feedback per essay, then one revision per (temperature, seed),
/// scored 0..100. A cell is the mean of its successful runs over
/// essays x seeds and is invalid below the completeness threshold.
ExtrinsicResult extrinsic_eval(const GeneratorHandle& generator, const std::string& label,
                               const SimulatorHandle& simulator, const Judge& judge,
                               const std::vector<EssayRecord>& testset, const std::vector<double>& temperatures,
                               const std::vector<std::int64_t>& seeds, const EvalOptions& options = {});

struct PedagogicalRecord {
  std::string essay_id;
  std::string feedback;
  std::optional<PedagogicalScores> scores;
  std::string error;
};

struct IntrinsicResult {
  TableRow row;  // RGQ, EAL, DM, MSSC on 0..100
  std::vector<PedagogicalRecord> records;
};

/// Per-dimension mean over the testset times 20.
IntrinsicResult intrinsic_eval(const GeneratorHandle& generator, const std::string& label, const Judge& judge,
                               const std::vector<EssayRecord>& testset, const EvalOptions& options = {});

inline const std::vector<std::string> kPedagogicalColumns = {"RGQ", "EAL", "DM", "MSSC"};

nlohmann::json to_json_row(const PedagogicalRecord& r);

Table extrinsic_table(const std::vector<ExtrinsicResult>& results, const std::string& manifest_hash);
Table intrinsic_table(const std::vector<IntrinsicResult>& results, const std::string& manifest_hash);

// ---------------------------------------------------------------- segments

struct IterationSegments {
  int iteration = 0;
  std::size_t feedback_count = 0;
  double mean_praise = 0;
  double mean_solution = 0;
  double mean_problem = 0;
  // Over solution + problem segments; empty when there are none.
  std::optional<double> local_fraction;
  std::optional<double> consistent_fraction;
};

struct SegmentEvolution {
  std::vector<IterationSegments> iterations;
};

/// Aggregates already classified feedback (one segment list per feedback).
IterationSegments summarize_segments(int iteration, const std::vector<std::vector<FeedbackSegment>>& feedback);

/// Classifies every generated sample of every iteration directory present.
/// Throws MissingFile when an iteration lacks samples.jsonl.
SegmentEvolution segment_evolution(const RunLayout& layout, const Judge& judge, std::size_t max_concurrency = 4);

void to_json(nlohmann::json& j, const IterationSegments& s);
void to_json(nlohmann::json& j, const SegmentEvolution& s);
std::string to_csv(const SegmentEvolution& s);

// ---------------------------------------------------------------- statistics

/// Product-moment correlation. Throws LengthMismatch, PreconditionError
/// (fewer than two points), ZeroVariance.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Mean squared difference. Throws LengthMismatch, PreconditionError when empty.
double mse(std::span<const double> xs, std::span<const double> ys);

}  // namespace prof
