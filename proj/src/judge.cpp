#include "prof/judge.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>

#include <spdlog/spdlog.h>

#include "prof/data.hpp"
#include "prof/error.hpp"
#include "prof/util.hpp"

namespace prof {

using json = nlohmann::json;

std::string aspect_name(Aspect a) {
  switch (a) {
    case Aspect::concepts_accuracy: return "concepts_accuracy";
    case Aspect::linking_concepts: return "linking_concepts";
    case Aspect::conciseness: return "conciseness";
    case Aspect::interpreting_sources: return "interpreting_sources";
    case Aspect::case_study_analysis: return "case_study_analysis";
    case Aspect::audience_alignment: return "audience_alignment";
  }
  return "unknown";
}

std::string aspect_label(Aspect a) {
  switch (a) {
    case Aspect::concepts_accuracy: return "Concepts & Accuracy";
    case Aspect::linking_concepts: return "Linking Concepts";
    case Aspect::conciseness: return "Conciseness";
    case Aspect::interpreting_sources: return "Interpreting Sources";
    case Aspect::case_study_analysis: return "Analysis of Case Study";
    case Aspect::audience_alignment: return "Response Alignment With Audience";
  }
  return "unknown";
}

double AspectScores::normalized() const { return normalize_scores(std::span<const int>(scores), 5); }

std::string to_string(SegmentCategory c) {
  switch (c) {
    case SegmentCategory::praise: return "praise";
    case SegmentCategory::solution: return "solution";
    case SegmentCategory::problem: return "problem";
  }
  return "unknown";
}

std::string to_string(Scope s) { return s == Scope::local ? "local" : "global"; }

void to_json(json& j, const AspectScores& s) {
  j = json::object();
  for (auto a : kAspects) j[aspect_name(a)] = s.at(a);
  j["normalized"] = s.normalized();
  j["raw_judge_text"] = s.raw_judge_text;
}

void to_json(json& j, const PedagogicalScores& s) {
  j = json{{"rgq", s.rgq}, {"eal", s.eal}, {"dm", s.dm}, {"mssc", s.mssc}, {"raw_judge_text", s.raw_judge_text}};
}

void to_json(json& j, const FeedbackSegment& s) {
  j = json{{"span", s.span}, {"category", to_string(s.category)}};
  j["scope"] = s.scope ? json(to_string(*s.scope)) : json(nullptr);
  j["consistent"] = s.consistent ? json(*s.consistent) : json(nullptr);
}

void from_json(const json& j, FeedbackSegment& s) {
  s.span = j.at("span").get<std::string>();
  const auto cat = j.at("category").get<std::string>();
  if (cat == "praise") s.category = SegmentCategory::praise;
  else if (cat == "solution") s.category = SegmentCategory::solution;
  else if (cat == "problem") s.category = SegmentCategory::problem;
  else throw SerializationError("unknown segment category '" + cat + "'");
  s.scope.reset();
  s.consistent.reset();
  if (j.contains("scope") && !j.at("scope").is_null()) {
    s.scope = j.at("scope").get<std::string>() == "local" ? Scope::local : Scope::global;
  }
  if (j.contains("consistent") && !j.at("consistent").is_null()) s.consistent = j.at("consistent").get<bool>();
}

void to_json(json& j, const FaithfulnessSummary& s) {
  j = json{{"faithful", s.faithful}, {"unfaithful", s.unfaithful}};
  if (s.suggestions) j["suggestions"] = *s.suggestions;
  if (s.sub_counts) {
    j["sub_counts"] = json{{"ignored", s.sub_counts->ignored},
                           {"misinterpreted", s.sub_counts->misinterpreted},
                           {"inadequate", s.sub_counts->inadequate},
                           {"unfaithful", s.sub_counts->unfaithful}};
  }
}

void from_json(const json& j, FaithfulnessSummary& s) {
  s.faithful = j.at("faithful").get<double>();
  s.unfaithful = j.at("unfaithful").get<double>();
  s.suggestions.reset();
  s.sub_counts.reset();
  if (j.contains("suggestions")) s.suggestions = j.at("suggestions").get<double>();
  if (j.contains("sub_counts")) {
    const auto& c = j.at("sub_counts");
    s.sub_counts = FaithfulnessSubCounts{c.at("ignored").get<double>(), c.at("misinterpreted").get<double>(),
                                         c.at("inadequate").get<double>(), c.at("unfaithful").get<double>()};
  }
}

// ---------------------------------------------------------------- pure helpers

double normalize_scores(std::span<const int> scores, int scale_max) {
  std::vector<double> d(scores.begin(), scores.end());
  return normalize_scores(std::span<const double>(d), static_cast<double>(scale_max));
}

double normalize_scores(std::span<const double> scores, double scale_max) {
  if (scores.empty()) throw EmptyScores();
  if (!(scale_max > 0)) throw OutOfRange("scale_max must be positive");
  double sum = 0;
  for (double s : scores) {
    if (!std::isfinite(s)) throw NonFiniteInput("score is not finite");
    if (s < 0 || s > scale_max) throw OutOfRange("score " + std::to_string(s) + " outside [0, " + std::to_string(scale_max) + "]");
    sum += s;
  }
  return 100.0 * (sum / static_cast<double>(scores.size())) / scale_max;
}

double gamma(double faithful, double unfaithful) {
  if (!std::isfinite(faithful) || !std::isfinite(unfaithful)) throw NonFiniteInput("gamma needs finite counts");
  if (faithful < 0 || unfaithful < 0) throw OutOfRange("faithfulness counts must be non-negative");
  if (faithful == 0 || unfaithful == 0) throw DegenerateCounts(faithful, unfaithful);
  // Difference of logs keeps gamma(F,U) == -gamma(U,F) bit for bit.
  return std::log10(faithful) - std::log10(unfaithful);
}

namespace {

// Lowercases, drops markdown emphasis and collapses whitespace.
std::string normalize_label(std::string_view raw) {
  std::string out;
  for (char c : raw) {
    if (c == '*' || c == '#' || c == '_' || c == '`') continue;
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!out.empty() && out.back() != ' ') out += ' ';
      continue;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  while (!out.empty() && (out.front() == ' ' || out.front() == '-')) out.erase(out.begin());
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

// Bare integer after the colon, else the last "(n Points)".
std::optional<int> line_value(std::string_view rest) {
  static const std::regex kBare(R"(^\s*\**\s*(\d+)\s*(/\s*5)?\s*\.?\s*$)");
  static const std::regex kPoints(R"(\((\d+)\s*points?\))", std::regex::icase);
  const std::string s(rest);
  std::smatch m;
  if (std::regex_match(s, m, kBare)) return std::stoi(m[1].str());
  std::optional<int> last;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kPoints); it != std::sregex_iterator(); ++it) {
    last = std::stoi((*it)[1].str());
  }
  return last;
}

// Collects label -> value for known labels; later lines override earlier ones.
std::map<int, int> scan_labels(std::string_view text, const std::map<std::string, int>& labels, int lo, int hi) {
  std::map<int, int> found;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const auto it = labels.find(normalize_label(line.substr(0, colon)));
    if (it == labels.end()) continue;
    const auto v = line_value(line.substr(colon + 1));
    if (v && *v >= lo && *v <= hi) found[it->second] = *v;
  }
  return found;
}

}  // namespace

std::optional<AspectScores> parse_aspect_scores(std::string_view text) {
  static const std::map<std::string, int> kLabels = {
      {"concepts & accuracy", 0},  {"concepts and accuracy", 0}, {"concepts_accuracy", 0},
      {"linking concepts", 1},     {"linking_concepts", 1},      {"conciseness", 2},
      {"interpreting sources", 3}, {"interpreting_sources", 3},  {"analysis of case study", 4},
      {"case study analysis", 4},  {"case_study_analysis", 4},   {"response alignment with audience", 5},
      {"audience alignment", 5},   {"audience_alignment", 5}};
  const auto found = scan_labels(text, kLabels, 1, 5);
  if (found.size() != kAspects.size()) return std::nullopt;
  AspectScores out;
  for (const auto& [idx, v] : found) out.scores[static_cast<std::size_t>(idx)] = v;
  out.raw_judge_text = std::string(text);
  return out;
}

std::optional<PedagogicalScores> parse_pedagogical_scores(std::string_view text) {
  static const std::map<std::string, int> kLabels = {
      {"respects guided questions", 0},   {"respects guided question", 0},
      {"rgq", 0},                         {"encourages active learning", 1},
      {"eal", 1},                         {"deepens metacognition", 2},
      {"dm", 2},                          {"motivates and stimulates student curiosity", 3},
      {"motivates & stimulates student curiosity", 3}, {"mssc", 3}};
  const auto found = scan_labels(text, kLabels, 0, 5);
  if (found.size() != 4) return std::nullopt;
  PedagogicalScores out;
  out.rgq = found.at(0);
  out.eal = found.at(1);
  out.dm = found.at(2);
  out.mssc = found.at(3);
  out.raw_judge_text = std::string(text);
  return out;
}

std::optional<std::vector<RawSegment>> parse_segments(std::string_view text) {
  const auto open = text.find('[');
  const auto close = text.rfind(']');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  json parsed;
  try {
    parsed = json::parse(text.substr(open, close - open + 1));
  } catch (const json::exception&) {
    return std::nullopt;
  }
  if (!parsed.is_array()) return std::nullopt;
  std::vector<RawSegment> out;
  for (const auto& item : parsed) {
    if (!item.is_object() || !item.contains("segment") || !item.at("segment").is_string()) return std::nullopt;
    RawSegment seg;
    seg.span = item.at("segment").get<std::string>();
    auto flag = [&](const char* key) { return item.contains(key) && item.at(key).is_boolean() && item.at(key).get<bool>(); };
    seg.praise = flag("praise");
    seg.problem = flag("problem");
    seg.solution = flag("solution");
    out.push_back(std::move(seg));
  }
  return out;
}

SegmentCategory categorize(const RawSegment& raw) {
  if (raw.solution) return SegmentCategory::solution;
  if (raw.problem) return SegmentCategory::problem;
  return SegmentCategory::praise;
}

void validate(const FaithfulnessSummary& s, const std::string& essay_id) {
  auto bad = [&](const std::string& reason) { throw InvariantViolation(essay_id.empty() ? "<summary>" : essay_id, reason); };
  for (double v : {s.faithful, s.unfaithful}) {
    if (!std::isfinite(v) || v < 0) bad("counts must be finite and non-negative");
  }
  if (!s.sub_counts) return;
  const auto& c = *s.sub_counts;
  for (double v : {c.ignored, c.misinterpreted, c.inadequate, c.unfaithful}) {
    if (!std::isfinite(v) || v < 0) bad("sub-counts must be finite and non-negative");
  }
  if (std::abs(c.unfaithful - s.unfaithful) > 1e-9) bad("unfaithful sub-count differs from U");
  if (s.suggestions && std::abs(s.faithful + c.ignored + c.misinterpreted + c.inadequate - *s.suggestions) > 1e-9) {
    bad("faithful + ignored + misinterpreted + inadequate must equal suggestions");
  }
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& path) {
  std::vector<AnnotationRecord> out;
  std::size_t line_no = 0;
  for (const auto& row : read_jsonl_rows(path)) {
    ++line_no;
    try {
      AnnotationRecord rec;
      rec.essay_id = row.at("essay_id").get<std::string>();
      rec.summary.faithful = row.at("faithful").get<double>();
      rec.summary.unfaithful = row.at("unfaithful").get<double>();
      rec.summary.sub_counts = FaithfulnessSubCounts{row.value("ignored", 0.0), row.value("misinterpreted", 0.0),
                                                     row.value("inadequate", 0.0), rec.summary.unfaithful};
      if (row.contains("suggestions")) rec.summary.suggestions = row.at("suggestions").get<double>();
      validate(rec.summary, rec.essay_id);
      out.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw MalformedLine(line_no, e.what());
    }
  }
  return out;
}

json annotation_to_json(const AnnotationRecord& r) {
  json j{{"essay_id", r.essay_id}, {"faithful", r.summary.faithful}, {"unfaithful", r.summary.unfaithful}};
  if (r.summary.suggestions) j["suggestions"] = *r.summary.suggestions;
  if (r.summary.sub_counts) {
    j["ignored"] = r.summary.sub_counts->ignored;
    j["misinterpreted"] = r.summary.sub_counts->misinterpreted;
    j["inadequate"] = r.summary.sub_counts->inadequate;
  }
  return j;
}

FaithfulnessSummary mean_summary(std::span<const FaithfulnessSummary> summaries) {
  if (summaries.empty()) throw EmptyScores();
  const double n = static_cast<double>(summaries.size());
  FaithfulnessSummary out;
  bool all_sub = true, all_sugg = true;
  FaithfulnessSubCounts sub;
  double sugg = 0;
  for (const auto& s : summaries) {
    out.faithful += s.faithful;
    out.unfaithful += s.unfaithful;
    if (s.sub_counts) {
      sub.ignored += s.sub_counts->ignored;
      sub.misinterpreted += s.sub_counts->misinterpreted;
      sub.inadequate += s.sub_counts->inadequate;
      sub.unfaithful += s.sub_counts->unfaithful;
    } else {
      all_sub = false;
    }
    if (s.suggestions) sugg += *s.suggestions;
    else all_sugg = false;
  }
  out.faithful /= n;
  out.unfaithful /= n;
  if (all_sub) out.sub_counts = FaithfulnessSubCounts{sub.ignored / n, sub.misinterpreted / n, sub.inadequate / n, sub.unfaithful / n};
  if (all_sugg) out.suggestions = sugg / n;
  return out;
}

std::string_view strip_reprompt(std::string_view prompt) {
  if (prompt.size() >= kRepromptNote.size() && prompt.substr(prompt.size() - kRepromptNote.size()) == kRepromptNote) {
    prompt.remove_suffix(kRepromptNote.size());
  }
  return prompt;
}

// ---------------------------------------------------------------- LM judge

namespace {

template <typename Parse>
auto ask_parsed(const Judge& judge, const std::string& prompt, std::int64_t seed, const char* what, Parse parse) {
  GenerationRequest req{Role::judge, prompt, 0.0, seed};
  std::string raw = judge.backend()->generate(req);
  if (auto parsed = parse(std::string_view(raw))) return std::move(*parsed);
  spdlog::warn("judge output for {} could not be parsed; reprompting once", what);
  req.prompt = prompt + std::string(kRepromptNote);
  raw = judge.backend()->generate(req);
  if (auto parsed = parse(std::string_view(raw))) return std::move(*parsed);
  throw JudgeParseError(what, raw);
}

std::optional<Scope> parse_scope(std::string_view text) {
  static const std::regex re(R"(scope\s*:\s*\**\s*(local|global))", std::regex::icase);
  std::smatch m;
  const std::string s(text);
  if (!std::regex_search(s, m, re)) return std::nullopt;
  return to_lower(m[1].str()) == "local" ? Scope::local : Scope::global;
}

std::optional<bool> parse_consistent(std::string_view text) {
  static const std::regex re(R"(consistent\s*:\s*\**\s*(yes|no))", std::regex::icase);
  std::smatch m;
  const std::string s(text);
  if (!std::regex_search(s, m, re)) return std::nullopt;
  return to_lower(m[1].str()) == "yes";
}

std::optional<std::vector<std::string>> parse_suggestions(std::string_view text) {
  static const std::regex re(R"(^\s*[-*]?\s*suggestion\s*:\s*(.*?)\s*$)", std::regex::icase);
  std::vector<std::string> out;
  bool any = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string line(text.substr(pos, nl - pos));
    pos = nl + 1;
    std::smatch m;
    if (!std::regex_match(line, m, re)) continue;
    any = true;
    const std::string body = m[1].str();
    if (to_lower(body) == "none" || body.empty()) continue;
    out.push_back(body);
  }
  if (!any) return std::nullopt;
  return out;
}

struct Verdicts {
  std::vector<std::string> per_suggestion;
  int unfaithful = 0;
};

std::optional<Verdicts> parse_verdicts(std::string_view text, std::size_t n) {
  static const std::regex verdict(R"(^\s*[-*]?\s*suggestion\s+(\d+)\s*:\s*\**\s*(faithful|ignored|misinterpreted|inadequate)\b.*$)",
                                  std::regex::icase);
  static const std::regex unfaithful(R"(^\s*[-*]?\s*unfaithful\s*:\s*\**\s*(\d+)\s*\.?\s*$)", std::regex::icase);
  Verdicts v;
  v.per_suggestion.assign(n, "");
  std::optional<int> u;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string line(text.substr(pos, nl - pos));
    pos = nl + 1;
    std::smatch m;
    if (std::regex_match(line, m, verdict)) {
      const auto idx = std::stoul(m[1].str());
      if (idx >= 1 && idx <= n) v.per_suggestion[idx - 1] = to_lower(m[2].str());
    } else if (std::regex_match(line, m, unfaithful)) {
      u = std::stoi(m[1].str());
    }
  }
  if (!u) return std::nullopt;
  if (std::any_of(v.per_suggestion.begin(), v.per_suggestion.end(), [](const auto& s) { return s.empty(); })) {
    return std::nullopt;
  }
  v.unfaithful = *u;
  return v;
}

}  // namespace

Judge::Judge(BackendPtr backend, std::shared_ptr<const PromptLibrary> prompts)
    : backend_(std::move(backend)), prompts_(std::move(prompts)) {
  if (!backend_) throw ConfigError("judge needs a backend");
  if (!prompts_) throw ConfigError("judge needs a prompt library");
}

AspectScores Judge::score_essay(const std::string& essay, std::int64_t seed) const {
  const auto prompt = prompts_->get("grading_rubric").render({{"essay", essay}});
  return ask_parsed(*this, prompt, seed, "rubric aspect scores", parse_aspect_scores);
}

PedagogicalScores Judge::pedagogical_eval(const std::string& feedback, const std::string& essay, std::int64_t seed) const {
  const auto prompt = prompts_->get("pedagogical_eval").render({{"essay", essay}, {"feedback", feedback}});
  return ask_parsed(*this, prompt, seed, "pedagogical scores", parse_pedagogical_scores);
}

std::vector<FeedbackSegment> Judge::segment_feedback(const std::string& feedback, std::int64_t seed) const {
  const auto prompt = prompts_->get("segmenter").render({{"feedback", feedback}});
  const auto raw = ask_parsed(*this, prompt, seed, "feedback segments", parse_segments);
  std::vector<FeedbackSegment> out;
  out.reserve(raw.size());
  for (const auto& r : raw) {
    FeedbackSegment seg{r.span, categorize(r), std::nullopt, std::nullopt};
    if (seg.category != SegmentCategory::praise) {
      const std::map<std::string, std::string> values{{"feedback", feedback}, {"segment", r.span}};
      seg.scope = ask_parsed(*this, prompts_->get("segment_scope").render(values), seed, "segment scope", parse_scope);
      seg.consistent =
          ask_parsed(*this, prompts_->get("segment_consistency").render(values), seed, "segment consistency", parse_consistent);
    }
    out.push_back(std::move(seg));
  }
  return out;
}

FaithfulnessSummary Judge::classify_faithfulness(const std::string& initial, const std::string& feedback,
                                                 const std::string& revised, std::int64_t seed) const {
  const auto suggestions = ask_parsed(*this, prompts_->get("faithfulness_extract").render({{"feedback", feedback}}), seed,
                                      "suggestion list", parse_suggestions);
  FaithfulnessSummary out;
  out.suggestions = static_cast<double>(suggestions.size());
  FaithfulnessSubCounts sub;
  if (revised == initial) {
    sub.ignored = static_cast<double>(suggestions.size());
    out.sub_counts = sub;
    return out;
  }
  std::string listing;
  for (std::size_t i = 0; i < suggestions.size(); ++i) listing += std::to_string(i + 1) + ". " + suggestions[i] + "\n";
  if (listing.empty()) listing = "(none)\n";
  const auto prompt = prompts_->get("faithfulness").render({{"suggestions", listing}, {"initial", initial}, {"revised", revised}});
  const auto verdicts = ask_parsed(*this, prompt, seed, "faithfulness verdicts",
                                   [n = suggestions.size()](std::string_view t) { return parse_verdicts(t, n); });
  for (const auto& v : verdicts.per_suggestion) {
    if (v == "faithful") out.faithful += 1;
    else if (v == "ignored") sub.ignored += 1;
    else if (v == "misinterpreted") sub.misinterpreted += 1;
    else sub.inadequate += 1;
  }
  out.unfaithful = verdicts.unfaithful;
  sub.unfaithful = out.unfaithful;
  out.sub_counts = sub;
  return out;
}

}  // namespace prof
