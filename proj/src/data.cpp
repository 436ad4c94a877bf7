#include "prof/data.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "prof/error.hpp"
#include "prof/util.hpp"

namespace prof {

namespace {

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const Split& s) { j = s == Split::train ? "train" : "test"; }

void from_json(const json& j, Split& s) {
  const auto v = j.get<std::string>();
  if (v == "train") s = Split::train;
  else if (v == "test") s = Split::test;
  else throw SerializationError("unknown split '" + v + "'");
}

void to_json(json& j, const FeedbackOrigin& o) {
  switch (o) {
    case FeedbackOrigin::human_peer: j = "human_peer"; break;
    case FeedbackOrigin::combined: j = "combined"; break;
    case FeedbackOrigin::generated: j = "generated"; break;
  }
}

void from_json(const json& j, FeedbackOrigin& o) {
  const auto v = j.get<std::string>();
  if (v == "human_peer") o = FeedbackOrigin::human_peer;
  else if (v == "combined") o = FeedbackOrigin::combined;
  else if (v == "generated") o = FeedbackOrigin::generated;
  else throw SerializationError("unknown feedback origin '" + v + "'");
}

void to_json(json& j, const LossForm& f) { j = f == LossForm::log_ratio ? "log_ratio" : "literal_ratio"; }

void from_json(const json& j, LossForm& f) {
  const auto v = j.get<std::string>();
  if (v == "log_ratio") f = LossForm::log_ratio;
  else if (v == "literal_ratio") f = LossForm::literal_ratio;
  else throw SerializationError("unknown loss form '" + v + "'");
}

void to_json(json& j, const EssayRecord& r) {
  j = json{{"essay_id", r.essay_id}, {"initial", r.initial}, {"peer_feedback", r.peer_feedback}};
  if (r.revised) j["revised"] = *r.revised;
  if (r.split) j["split"] = *r.split;
}

void from_json(const json& j, EssayRecord& r) {
  r.essay_id = j.at("essay_id").get<std::string>();
  r.initial = j.at("initial").get<std::string>();
  r.peer_feedback = j.at("peer_feedback").get<std::vector<std::string>>();
  r.revised = optional_field<std::string>(j, "revised");
  r.split = optional_field<Split>(j, "split");
}

void to_json(json& j, const GenerationParams& p) { j = json{{"temperature", p.temperature}, {"seed", p.seed}}; }

void from_json(const json& j, GenerationParams& p) {
  p.temperature = j.at("temperature").get<double>();
  p.seed = j.at("seed").get<std::int64_t>();
}

void to_json(json& j, const FeedbackText& f) {
  j = json{{"body", f.body}, {"origin", f.origin}};
  if (f.source_model) j["source_model"] = *f.source_model;
  if (f.generation_params) j["generation_params"] = *f.generation_params;
}

void from_json(const json& j, FeedbackText& f) {
  f.body = j.at("body").get<std::string>();
  f.origin = j.at("origin").get<FeedbackOrigin>();
  f.source_model = optional_field<std::string>(j, "source_model");
  f.generation_params = optional_field<GenerationParams>(j, "generation_params");
}

void validate(const FeedbackText& feedback) {
  if (feedback.body.empty()) throw InvariantViolation("feedback", "body is empty");
  const bool generated = feedback.origin == FeedbackOrigin::generated;
  if (generated != feedback.generation_params.has_value()) {
    throw InvariantViolation("feedback", "generation_params must be present iff origin is generated");
  }
  if (feedback.generation_params) {
    const double t = feedback.generation_params->temperature;
    if (!(t >= 0.0 && t <= 2.0)) throw InvariantViolation("feedback", "temperature outside [0, 2]");
  }
}

void to_json(json& j, const RunManifest& m) {
  j = json{{"run_id", m.run_id},
           {"iteration_count", m.iteration_count},
           {"k_samples", m.k_samples},
           {"beta", m.beta},
           {"temperatures", m.temperatures},
           {"seeds", m.seeds},
           {"backend_configs", m.backend_configs},
           {"created_at", m.created_at},
           {"sim_temperature", m.sim_temperature},
           {"generator_temperature", m.generator_temperature},
           {"learning_rate", m.learning_rate},
           {"epochs", m.epochs},
           {"loss_form", m.loss_form},
           {"seed", m.seed}};
}

void from_json(const json& j, RunManifest& m) {
  RunManifest d;
  m.run_id = j.at("run_id").get<std::string>();
  m.iteration_count = j.value("iteration_count", d.iteration_count);
  m.k_samples = j.value("k_samples", d.k_samples);
  m.beta = j.value("beta", d.beta);
  m.temperatures = j.value("temperatures", d.temperatures);
  m.seeds = j.value("seeds", d.seeds);
  m.backend_configs = j.value("backend_configs", d.backend_configs);
  m.created_at = j.value("created_at", std::string{});
  m.sim_temperature = j.value("sim_temperature", d.sim_temperature);
  m.generator_temperature = j.value("generator_temperature", d.generator_temperature);
  m.learning_rate = j.value("learning_rate", d.learning_rate);
  m.epochs = j.value("epochs", d.epochs);
  m.loss_form = j.value("loss_form", d.loss_form);
  m.seed = j.value("seed", d.seed);
}

void validate(const RunManifest& m) {
  if (m.run_id.empty()) throw ConfigError("manifest run_id is empty");
  if (m.iteration_count < 1) throw ConfigError("iteration_count must be >= 1");
  if (m.k_samples < 2) throw ConfigError("k_samples must be >= 2 to form a preference pair");
  if (!(m.beta > 0.0) || !std::isfinite(m.beta)) throw ConfigError("beta must be > 0");
  if (!(m.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (m.epochs < 1) throw ConfigError("epochs must be >= 1");
  auto in_range = [](double t) { return t >= 0.0 && t <= 2.0; };
  for (double t : m.temperatures) {
    if (!in_range(t)) throw ConfigError("temperature " + std::to_string(t) + " outside [0, 2]");
  }
  if (!in_range(m.sim_temperature) || !in_range(m.generator_temperature)) {
    throw ConfigError("loop temperatures must lie in [0, 2]");
  }
}

std::string manifest_hash(const RunManifest& manifest) {
  json j = manifest;
  j.erase("created_at");
  return sha256_hex(j.dump());
}

void to_json(json& j, const PreferencePair& p) {
  // prompt/chosen/rejected as plain strings follow the usual preference-tuning
  // dataset layout; generation metadata rides alongside.
  j = json{{"essay_id", p.essay_id},
           {"prompt", p.prompt_context},
           {"chosen", p.chosen.body},
           {"rejected", p.rejected.body},
           {"chosen_score", p.chosen_score},
           {"rejected_score", p.rejected_score},
           {"iteration", p.iteration}};
  json scores = json::array();
  for (double v : p.candidate_scores) scores.push_back(std::isfinite(v) ? json(v) : json(nullptr));
  j["candidate_scores"] = std::move(scores);
  auto meta = [](const FeedbackText& f) {
    json m{{"origin", f.origin}};
    if (f.source_model) m["source_model"] = *f.source_model;
    if (f.generation_params) m["generation_params"] = *f.generation_params;
    return m;
  };
  j["chosen_meta"] = meta(p.chosen);
  j["rejected_meta"] = meta(p.rejected);
}

void from_json(const json& j, PreferencePair& p) {
  p.essay_id = j.at("essay_id").get<std::string>();
  p.prompt_context = j.at("prompt").get<std::string>();
  p.chosen_score = j.at("chosen_score").get<double>();
  p.rejected_score = j.at("rejected_score").get<double>();
  p.iteration = j.at("iteration").get<int>();
  p.candidate_scores.clear();
  if (j.contains("candidate_scores")) {
    // Failed candidates are written as null.
    for (const auto& v : j.at("candidate_scores")) {
      p.candidate_scores.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    }
  }
  auto load = [&](const char* body_key, const char* meta_key) {
    FeedbackText f;
    f.body = j.at(body_key).get<std::string>();
    f.origin = FeedbackOrigin::generated;
    if (j.contains(meta_key)) {
      const auto& m = j.at(meta_key);
      f.origin = m.value("origin", FeedbackOrigin::generated);
      f.source_model = optional_field<std::string>(m, "source_model");
      f.generation_params = optional_field<GenerationParams>(m, "generation_params");
    }
    return f;
  };
  p.chosen = load("chosen", "chosen_meta");
  p.rejected = load("rejected", "rejected_meta");
}

// ---------------------------------------------------------------- JSONL

std::string to_jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    try {
      out += row.dump();
    } catch (const json::exception& e) {
      throw SerializationError(e.what());
    }
    out += '\n';
  }
  return out;
}

void write_jsonl_rows(const std::vector<json>& rows, const std::filesystem::path& path) {
  write_file_atomic(path, to_jsonl(rows));
}

std::vector<json> read_jsonl_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw MalformedLine(line_no, e.what());
    }
  }
  return rows;
}

// ---------------------------------------------------------------- dataset

namespace {

EssayRecord parse_record(const std::string& line, std::size_t line_no, std::size_t expected_feedback) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw MalformedLine(line_no, e.what());
  }
  if (!j.is_object()) throw MalformedLine(line_no, "not a JSON object");
  for (const char* key : {"essay_id", "initial", "peer_feedback"}) {
    if (!j.contains(key)) throw MalformedLine(line_no, std::string("missing key '") + key + "'");
  }
  EssayRecord record;
  try {
    record = j.get<EssayRecord>();
  } catch (const json::exception& e) {
    throw MalformedLine(line_no, e.what());
  } catch (const SerializationError& e) {
    throw MalformedLine(line_no, e.what());
  }
  if (record.essay_id.empty()) throw MalformedLine(line_no, "essay_id is empty");
  if (trim(record.initial).empty()) throw InvariantViolation(record.essay_id, "initial essay is empty");
  if (record.peer_feedback.size() != expected_feedback) {
    throw InvariantViolation(record.essay_id, "expected " + std::to_string(expected_feedback) +
                                                  " peer feedback entries, found " +
                                                  std::to_string(record.peer_feedback.size()));
  }
  return record;
}

}  // namespace

std::vector<EssayRecord> load_dataset(const std::filesystem::path& path, const LoadOptions& options,
                                      LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(path.string());
  std::vector<EssayRecord> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      EssayRecord record = parse_record(line, line_no, options.expected_feedback_count);
      if (!seen.insert(record.essay_id).second) {
        throw InvariantViolation(record.essay_id, "duplicate essay_id");
      }
      records.push_back(std::move(record));
    } catch (const DataError& e) {
      if (!options.lenient) throw;
      if (report) report->rejected.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (report) report->accepted = records.size();
  return records;
}

std::pair<std::vector<EssayRecord>, std::vector<EssayRecord>> split_dataset(const std::vector<EssayRecord>& records,
                                                                            std::size_t train_count) {
  if (train_count > records.size()) {
    throw CountOutOfRange("train_count " + std::to_string(train_count) + " exceeds " +
                          std::to_string(records.size()) + " records");
  }
  std::vector<EssayRecord> train(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(train_count));
  std::vector<EssayRecord> test(records.begin() + static_cast<std::ptrdiff_t>(train_count), records.end());
  for (auto& r : train) r.split = Split::train;
  for (auto& r : test) r.split = Split::test;
  return {std::move(train), std::move(test)};
}

}  // namespace prof
