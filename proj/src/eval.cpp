#include "prof/eval.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "prof/error.hpp"
#include "prof/util.hpp"

namespace prof {

using json = nlohmann::json;

// ---------------------------------------------------------------- tables

double row_average(std::span<const double> cells) {
  if (cells.empty()) throw EmptyScores();
  double sum = 0;
  for (double c : cells) {
    if (!std::isfinite(c)) throw NonFiniteInput("table cell is not finite");
    sum += c;
  }
  return sum / static_cast<double>(cells.size());
}

TableRow make_row(std::string label, const std::vector<double>& cells) {
  TableRow row;
  row.label = std::move(label);
  for (double c : cells) row.cells.push_back({c, 0, 0, true});
  row.avg = row_average(cells);
  return row;
}

namespace {

std::optional<double> valid_average(const TableRow& row) {
  std::vector<double> values;
  for (const auto& c : row.cells) {
    if (!c.valid || !c.value) return std::nullopt;
    values.push_back(*c.value);
  }
  if (values.empty()) return std::nullopt;
  return row_average(values);
}

}  // namespace

bool averages_consistent(const Table& table, double tol) {
  for (const auto& row : table.rows) {
    const auto expect = valid_average(row);
    if (expect.has_value() != row.avg.has_value()) return false;
    if (expect && std::abs(*expect - *row.avg) > tol) return false;
  }
  return true;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_double(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void to_json(json& j, const Table& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json cells = json::array();
    for (const auto& c : r.cells) {
      cells.push_back({{"value", optional_json(c.value)},
                       {"attempted", c.attempted},
                       {"succeeded", c.succeeded},
                       {"valid", c.valid}});
    }
    rows.push_back({{"label", r.label}, {"cells", cells}, {"avg", optional_json(r.avg)}});
  }
  j = json{{"kind", t.kind}, {"columns", t.columns}, {"rows", rows}, {"manifest_hash", t.manifest_hash}};
}

void from_json(const json& j, Table& t) {
  t.kind = j.at("kind").get<std::string>();
  t.columns = j.at("columns").get<std::vector<std::string>>();
  t.manifest_hash = j.value("manifest_hash", std::string{});
  t.rows.clear();
  for (const auto& r : j.at("rows")) {
    TableRow row;
    row.label = r.at("label").get<std::string>();
    for (const auto& c : r.at("cells")) {
      TableCell cell;
      cell.value = optional_double(c, "value");
      cell.attempted = c.value("attempted", std::size_t{0});
      cell.succeeded = c.value("succeeded", std::size_t{0});
      cell.valid = c.value("valid", cell.value.has_value());
      row.cells.push_back(cell);
    }
    row.avg = optional_double(r, "avg");
    if (row.cells.size() != t.columns.size()) throw SerializationError("table row '" + row.label + "' has wrong width");
    t.rows.push_back(std::move(row));
  }
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string cell_text(const std::optional<double>& v, int digits) {
  return v ? fmt::format("{:.{}f}", *v, digits) : std::string("n/a");
}

}  // namespace

std::string to_csv(const Table& table) {
  std::ostringstream out;
  out << "label";
  for (const auto& c : table.columns) out << ',' << csv_field(c);
  out << ",avg\n";
  for (const auto& r : table.rows) {
    out << csv_field(r.label);
    for (const auto& c : r.cells) out << ',' << (c.valid && c.value ? fmt::format("{:.6f}", *c.value) : "");
    out << ',' << (r.avg ? fmt::format("{:.6f}", *r.avg) : "") << '\n';
  }
  return out.str();
}

std::string to_markdown(const Table& table) {
  std::ostringstream out;
  out << "| Approach |";
  for (const auto& c : table.columns) out << ' ' << c << " |";
  out << " Avg |\n|---|";
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << "---:|";
  out << "---:|\n";
  for (const auto& r : table.rows) {
    out << "| " << r.label << " |";
    for (const auto& c : r.cells) out << ' ' << cell_text(c.valid ? c.value : std::nullopt, 1) << " |";
    out << ' ' << cell_text(r.avg, 1) << " |\n";
  }
  if (!table.manifest_hash.empty()) out << "\nmanifest " << table.manifest_hash << "\n";
  return out.str();
}

// ---------------------------------------------------------------- extrinsic

namespace {

TableCell finish_cell(std::vector<double> scores, std::size_t attempted, double threshold) {
  TableCell cell;
  cell.attempted = attempted;
  cell.succeeded = scores.size();
  cell.valid = attempted > 0 && static_cast<double>(scores.size()) >= threshold * static_cast<double>(attempted);
  if (cell.valid) cell.value = row_average(scores);
  return cell;
}

}  // namespace

ExtrinsicResult extrinsic_eval(const GeneratorHandle& generator, const std::string& label,
                               const SimulatorHandle& simulator, const Judge& judge,
                               const std::vector<EssayRecord>& testset, const std::vector<double>& temperatures,
                               const std::vector<std::int64_t>& seeds, const EvalOptions& options) {
  if (testset.empty()) throw PreconditionError("extrinsic evaluation needs a non-empty testset");
  if (temperatures.empty() || seeds.empty()) throw PreconditionError("extrinsic evaluation needs temperatures and seeds");

  std::vector<std::optional<FeedbackText>> feedback(testset.size());
  std::vector<std::string> feedback_errors(testset.size());
  parallel_for(testset.size(), options.max_concurrency, [&](std::size_t e) {
    try {
      feedback[e] = greedy_feedback(generator, testset[e].essay_id, testset[e].initial);
    } catch (const Error& ex) {
      feedback_errors[e] = ex.what();
    }
  });

  const std::size_t per_essay = temperatures.size() * seeds.size();
  std::vector<RevisionRecord> runs(testset.size() * per_essay);
  parallel_for(runs.size(), options.max_concurrency, [&](std::size_t j) {
    const std::size_t e = j / per_essay;
    const std::size_t ti = (j % per_essay) / seeds.size();
    const std::size_t si = j % seeds.size();
    RevisionRecord& rec = runs[j];
    rec.essay_id = testset[e].essay_id;
    rec.candidate = si;
    rec.temperature = temperatures[ti];
    rec.seed = seeds[si];
    if (!feedback[e]) {
      rec.error = "no feedback: " + feedback_errors[e];
      return;
    }
    rec.feedback = feedback[e]->body;
    try {
      rec.revised = revise(simulator, testset[e].initial, *feedback[e], rec.temperature, rec.seed);
      rec.aspects = judge.score_essay(*rec.revised, rec.seed);
      rec.score = rec.aspects->normalized();
    } catch (const Error& ex) {
      rec.error = ex.what();
      spdlog::warn("extrinsic run {} t={} seed={} failed: {}", rec.essay_id, rec.temperature, rec.seed, ex.what());
    }
  });

  ExtrinsicResult result;
  result.temperatures = temperatures;
  result.row.label = label;
  for (std::size_t ti = 0; ti < temperatures.size(); ++ti) {
    std::vector<double> scores;
    for (std::size_t e = 0; e < testset.size(); ++e) {
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        const auto& rec = runs[e * per_essay + ti * seeds.size() + si];
        if (rec.score) scores.push_back(*rec.score);
      }
    }
    result.row.cells.push_back(finish_cell(std::move(scores), testset.size() * seeds.size(), options.completeness_threshold));
  }
  result.row.avg = valid_average(result.row);
  result.provenance = std::move(runs);
  return result;
}

// ---------------------------------------------------------------- intrinsic

IntrinsicResult intrinsic_eval(const GeneratorHandle& generator, const std::string& label, const Judge& judge,
                               const std::vector<EssayRecord>& testset, const EvalOptions& options) {
  if (testset.empty()) throw PreconditionError("intrinsic evaluation needs a non-empty testset");
  IntrinsicResult result;
  result.records.resize(testset.size());
  parallel_for(testset.size(), options.max_concurrency, [&](std::size_t e) {
    auto& rec = result.records[e];
    rec.essay_id = testset[e].essay_id;
    try {
      const auto fb = greedy_feedback(generator, testset[e].essay_id, testset[e].initial);
      rec.feedback = fb.body;
      rec.scores = judge.pedagogical_eval(fb.body, testset[e].initial, static_cast<std::int64_t>(e));
    } catch (const Error& ex) {
      rec.error = ex.what();
      spdlog::warn("intrinsic eval of {} failed: {}", rec.essay_id, ex.what());
    }
  });
  result.row.label = label;
  for (std::size_t d = 0; d < kPedagogicalColumns.size(); ++d) {
    std::vector<double> values;
    for (const auto& rec : result.records) {
      if (rec.scores) values.push_back(static_cast<double>(rec.scores->values()[d]) * 20.0);
    }
    result.row.cells.push_back(finish_cell(std::move(values), testset.size(), options.completeness_threshold));
  }
  result.row.avg = valid_average(result.row);
  return result;
}

json to_json_row(const PedagogicalRecord& r) {
  json j{{"essay_id", r.essay_id}, {"feedback", r.feedback}};
  j["scores"] = r.scores ? json(*r.scores) : json(nullptr);
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

Table extrinsic_table(const std::vector<ExtrinsicResult>& results, const std::string& manifest_hash) {
  Table t;
  t.kind = "extrinsic";
  t.manifest_hash = manifest_hash;
  if (!results.empty()) {
    for (double temp : results.front().temperatures) {
      std::string col = fmt::format("{}", temp);
      if (col.find_first_of(".e") == std::string::npos) col += ".0";
      t.columns.push_back(col);
    }
  }
  for (const auto& r : results) {
    if (r.temperatures != results.front().temperatures) throw PreconditionError("rows use different temperatures");
    t.rows.push_back(r.row);
  }
  return t;
}

Table intrinsic_table(const std::vector<IntrinsicResult>& results, const std::string& manifest_hash) {
  Table t;
  t.kind = "intrinsic";
  t.manifest_hash = manifest_hash;
  t.columns = kPedagogicalColumns;
  for (const auto& r : results) t.rows.push_back(r.row);
  return t;
}

// ---------------------------------------------------------------- segments

IterationSegments summarize_segments(int iteration, const std::vector<std::vector<FeedbackSegment>>& feedback) {
  IterationSegments s;
  s.iteration = iteration;
  s.feedback_count = feedback.size();
  std::size_t praise = 0, solution = 0, problem = 0, scoped = 0, local = 0, judged = 0, consistent = 0;
  for (const auto& segments : feedback) {
    for (const auto& seg : segments) {
      switch (seg.category) {
        case SegmentCategory::praise: ++praise; continue;
        case SegmentCategory::solution: ++solution; break;
        case SegmentCategory::problem: ++problem; break;
      }
      if (seg.scope) {
        ++scoped;
        if (*seg.scope == Scope::local) ++local;
      }
      if (seg.consistent) {
        ++judged;
        if (*seg.consistent) ++consistent;
      }
    }
  }
  if (!feedback.empty()) {
    const double n = static_cast<double>(feedback.size());
    s.mean_praise = static_cast<double>(praise) / n;
    s.mean_solution = static_cast<double>(solution) / n;
    s.mean_problem = static_cast<double>(problem) / n;
  }
  if (scoped > 0) s.local_fraction = static_cast<double>(local) / static_cast<double>(scoped);
  if (judged > 0) s.consistent_fraction = static_cast<double>(consistent) / static_cast<double>(judged);
  return s;
}

SegmentEvolution segment_evolution(const RunLayout& layout, const Judge& judge, std::size_t max_concurrency) {
  SegmentEvolution evo;
  for (int t = 1; std::filesystem::exists(layout.iteration(t)); ++t) {
    if (!std::filesystem::exists(layout.samples(t))) throw MissingFile(layout.samples(t).string());
    std::vector<std::string> bodies;
    for (const auto& row : read_jsonl_rows(layout.samples(t))) {
      if (row.contains("feedback") && !row.at("feedback").is_null()) {
        bodies.push_back(row.at("feedback").at("body").get<std::string>());
      }
    }
    std::vector<std::vector<FeedbackSegment>> segments(bodies.size());
    std::vector<char> ok(bodies.size(), 0);
    parallel_for(bodies.size(), max_concurrency, [&](std::size_t i) {
      try {
        segments[i] = judge.segment_feedback(bodies[i], static_cast<std::int64_t>(i));
        ok[i] = 1;
      } catch (const Error& ex) {
        spdlog::warn("iteration {} sample {}: segmentation failed: {}", t, i, ex.what());
      }
    });
    std::vector<std::vector<FeedbackSegment>> kept;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
      if (ok[i]) kept.push_back(std::move(segments[i]));
    }
    evo.iterations.push_back(summarize_segments(t, kept));
  }
  if (evo.iterations.empty()) throw MissingFile(layout.samples(1).string());
  return evo;
}

void to_json(json& j, const IterationSegments& s) {
  j = json{{"iteration", s.iteration},         {"feedback_count", s.feedback_count},
           {"mean_praise", s.mean_praise},     {"mean_solution", s.mean_solution},
           {"mean_problem", s.mean_problem},   {"local_fraction", optional_json(s.local_fraction)},
           {"consistent_fraction", optional_json(s.consistent_fraction)}};
}

void to_json(json& j, const SegmentEvolution& s) { j = json{{"iterations", s.iterations}}; }

std::string to_csv(const SegmentEvolution& s) {
  std::ostringstream out;
  out << "iteration,feedback_count,mean_praise,mean_solution,mean_problem,local_fraction,consistent_fraction\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string(); };
  for (const auto& it : s.iterations) {
    out << fmt::format("{},{},{:.6f},{:.6f},{:.6f},{},{}\n", it.iteration, it.feedback_count, it.mean_praise,
                       it.mean_solution, it.mean_problem, opt(it.local_fraction), opt(it.consistent_fraction));
  }
  return out.str();
}

// ---------------------------------------------------------------- statistics

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw LengthMismatch(xs.size(), ys.size());
  if (xs.size() < 2) throw PreconditionError("pearson needs at least two points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ZeroVariance();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double mse(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw LengthMismatch(xs.size(), ys.size());
  if (xs.empty()) throw PreconditionError("mse needs at least one point");
  double sum = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sum += (xs[i] - ys[i]) * (xs[i] - ys[i]);
  return sum / static_cast<double>(xs.size());
}

}  // namespace prof
