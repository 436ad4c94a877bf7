#include "prof/scripted.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <regex>

#include "prof/diff.hpp"
#include "prof/error.hpp"
#include "prof/judge.hpp"
#include "prof/util.hpp"

namespace prof::scripted {

using json = nlohmann::json;

namespace {

std::vector<std::string> sentence_texts(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& span : diff::tokenize_sentences(text)) out.emplace_back(text.substr(span.chars.begin, span.chars.size()));
  return out;
}

bool contains_any(const std::string& lower, const std::vector<std::string>& needles) {
  return std::any_of(needles.begin(), needles.end(), [&](const auto& n) { return lower.find(n) != std::string::npos; });
}

std::size_t count_of(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + needle.size())) ++n;
  return n;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// First m entries of a seeded partial shuffle of 0..n-1.
std::vector<std::size_t> choose(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  m = std::min(m, n);
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  idx.resize(m);
  return idx;
}

const std::vector<std::string> kPraiseWords = {"good", "great", "nice", "well done", "liked", "strong", "clear"};
const std::vector<std::string> kProblemWords = {"missing", "unclear", "confusing", "error", "lacks", "does not", "doesn't",
                                                "forgot", "not cited"};
const std::vector<std::string> kSolutionWords = {"should", "could", "consider", "try", "add", "append", "replace",
                                                 "delete", "explain"};
const std::vector<std::string> kLocalWords = {"\"", "\xE2\x80\x9C", "sentence", "paragraph", "word", "phrase"};
const std::vector<std::string> kHedgeWords = {"maybe", "not sure", "i guess"};
const std::vector<std::string> kGuidedHeadings = {"understanding 1", "understanding 2", "critical thinking 1",
                                                  "critical thinking 2", "critical thinking 3",
                                                  "response alignment with audience"};

}  // namespace

// ---------------------------------------------------------------- directives

std::optional<Directive> parse_directive(std::string_view line) {
  static const std::regex re(R"(^\s*[-*]?\s*(APPEND|DELETE_SENTENCE|REPLACE)\s*:\s*(.*?)\s*$)");
  static const std::regex replace_re(R"(^(.*?)\s*->\s*(.*)$)");
  const std::string s(line);
  std::smatch m;
  if (!std::regex_match(s, m, re)) return std::nullopt;
  Directive d;
  d.source_line = trim(s);
  const std::string kind = m[1].str();
  const std::string arg = m[2].str();
  if (kind == "APPEND") {
    if (arg.empty()) return std::nullopt;
    d.kind = DirectiveKind::append;
    d.text = arg;
  } else if (kind == "DELETE_SENTENCE") {
    d.kind = DirectiveKind::delete_sentence;
    if (arg.empty() || !std::all_of(arg.begin(), arg.end(), [](unsigned char c) { return std::isdigit(c); })) return std::nullopt;
    d.index = std::stoul(arg);
    if (d.index == 0) return std::nullopt;
  } else {
    std::smatch r;
    if (!std::regex_match(arg, r, replace_re)) return std::nullopt;
    d.kind = DirectiveKind::replace;
    d.old_text = trim(r[1].str());
    d.new_text = trim(r[2].str());
    if (d.old_text.empty()) return std::nullopt;
  }
  return d;
}

std::vector<Directive> parse_directives(std::string_view feedback) {
  std::vector<Directive> out;
  std::size_t pos = 0;
  while (pos <= feedback.size()) {
    auto nl = feedback.find('\n', pos);
    if (nl == std::string_view::npos) nl = feedback.size();
    if (auto d = parse_directive(feedback.substr(pos, nl - pos))) out.push_back(std::move(*d));
    pos = nl + 1;
  }
  return out;
}

// ---------------------------------------------------------------- schedule

std::size_t Schedule::bucket_index(double temperature) const {
  if (buckets.empty()) throw ConfigError("scripted schedule has no buckets");
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (temperature <= buckets[i].max_temperature + 1e-12) return i;
  }
  return buckets.size() - 1;
}

const ScheduleBucket& Schedule::bucket_for(double temperature) const { return buckets[bucket_index(temperature)]; }

Schedule schedule_from_json(const json& j) {
  Schedule s;
  try {
    for (const auto& b : j.at("buckets")) {
      ScheduleBucket bucket;
      bucket.max_temperature = b.at("max_temperature").get<double>();
      bucket.unfaithful_edits = b.value("unfaithful_edits", 0);
      bucket.ignored_directives = b.value("ignored_directives", 0);
      if (bucket.unfaithful_edits < 0 || bucket.ignored_directives < 0) throw ConfigError("schedule counts must be >= 0");
      s.buckets.push_back(bucket);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad scripted schedule: ") + e.what());
  }
  if (s.buckets.empty()) throw ConfigError("scripted schedule has no buckets");
  std::sort(s.buckets.begin(), s.buckets.end(),
            [](const auto& a, const auto& b) { return a.max_temperature < b.max_temperature; });
  return s;
}

json to_json(const Schedule& s) {
  json buckets = json::array();
  for (const auto& b : s.buckets) {
    buckets.push_back({{"max_temperature", b.max_temperature},
                       {"unfaithful_edits", b.unfaithful_edits},
                       {"ignored_directives", b.ignored_directives}});
  }
  return json{{"buckets", buckets}};
}

Schedule default_schedule() { return Schedule{{{0.7, 0, 1}, {0.85, 1, 0}, {2.0, 2, 0}}}; }

const std::vector<std::string>& filler_sentences() {
  static const std::vector<std::string> kFillers = {
      "I wrote this letter on a rainy afternoon.",
      "My roommate also has opinions on this topic.",
      "This issue comes up often in conversations with my family.",
      "I hope this letter finds you well.",
      "Many people in my town talk about this every week.",
      "I have thought about this question for a long time.",
      "The debate has been in the news lately.",
      "I am writing as a concerned member of the community.",
      "Thank you for taking the time to read my thoughts.",
      "Friends of mine disagree with me on several points.",
      "It is a topic that matters to a lot of people.",
      "I first heard about this proposal last semester.",
  };
  return kFillers;
}

std::string revise(const std::string& essay, const std::string& feedback, double temperature, std::int64_t seed,
                   const Schedule& schedule) {
  const auto directives = parse_directives(feedback);
  const std::size_t bucket_idx = schedule.bucket_index(temperature);
  const auto& bucket = schedule.buckets[bucket_idx];
  std::mt19937_64 rng(mix_seed(mix_seed(static_cast<std::uint64_t>(seed), fnv1a64(essay)), bucket_idx));

  std::vector<bool> ignored(directives.size(), false);
  for (auto i : choose(rng, directives.size(), static_cast<std::size_t>(bucket.ignored_directives))) ignored[i] = true;

  std::vector<std::string> sentences = sentence_texts(essay);
  std::vector<bool> deleted(sentences.size(), false);
  std::vector<std::string> appended;
  bool changed = false;
  for (std::size_t i = 0; i < directives.size(); ++i) {
    if (ignored[i]) continue;
    const auto& d = directives[i];
    switch (d.kind) {
      case DirectiveKind::append:
        appended.push_back(d.text);
        changed = true;
        break;
      case DirectiveKind::delete_sentence:
        if (d.index <= sentences.size() && !deleted[d.index - 1]) {
          deleted[d.index - 1] = true;
          changed = true;
        }
        break;
      case DirectiveKind::replace:
        for (std::size_t s = 0; s < sentences.size(); ++s) {
          if (deleted[s]) continue;
          if (auto pos = sentences[s].find(d.old_text); pos != std::string::npos) {
            sentences[s].replace(pos, d.old_text.size(), d.new_text);
            changed = true;
            break;
          }
        }
        break;
    }
  }

  std::vector<std::string> kept;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    if (!deleted[s]) kept.push_back(sentences[s]);
  }
  const auto& fillers = filler_sentences();
  for (auto f : choose(rng, fillers.size(), static_cast<std::size_t>(bucket.unfaithful_edits))) {
    const auto pos = uniform_index(rng, kept.size() + 1);
    kept.insert(kept.begin() + static_cast<std::ptrdiff_t>(pos), fillers[f]);
    changed = true;
  }
  if (!changed) return essay;
  kept.insert(kept.end(), appended.begin(), appended.end());
  return join(kept, " ");
}

// ---------------------------------------------------------------- judges

const std::vector<std::string>& aspect_keywords(std::size_t aspect_index) {
  static const std::array<std::vector<std::string>, 6> kKeywords = {{
      {"price floor", "surplus", "equilibrium"},
      {"substitute", "labor market", "in turn"},
      {},
      {"according to", "the article", "works cited"},
      {"deadweight loss", "unemployment", "not economical"},
      {"for example", "imagine", "in simple terms"},
  }};
  return kKeywords.at(aspect_index);
}

std::array<int, 6> aspect_scores(std::string_view essay) {
  const std::string lower = to_lower(essay);
  std::array<int, 6> out{};
  for (std::size_t a = 0; a < 6; ++a) {
    if (a == static_cast<std::size_t>(Aspect::conciseness)) {
      const auto words = diff::tokenize_words(essay).size();
      out[a] = words < 500 ? 5 : words <= 510 ? 4 : 2;
      continue;
    }
    int hits = 0;
    for (const auto& k : aspect_keywords(a)) hits += lower.find(k) != std::string::npos ? 1 : 0;
    out[a] = std::clamp(2 + hits, 1, 5);
  }
  return out;
}

std::string rubric_response(std::string_view essay) {
  const auto scores = aspect_scores(essay);
  std::string out = "Scripted assessment based on rubric keywords.\n";
  for (std::size_t a = 0; a < 6; ++a) out += aspect_label(kAspects[a]) + ": " + std::to_string(scores[a]) + "\n";
  return out;
}

std::string pedagogical_response(std::string_view feedback) {
  const std::string lower = to_lower(feedback);
  int rgq = 0, dm = 0, mssc = 0;
  for (const auto& h : kGuidedHeadings) rgq += lower.find(h) != std::string::npos ? 1 : 0;
  for (const auto& w : kProblemWords) dm += static_cast<int>(count_of(lower, w));
  for (const auto& w : kPraiseWords) mssc += static_cast<int>(count_of(lower, w));
  const int eal = static_cast<int>(std::count(lower.begin(), lower.end(), '?'));
  auto cap = [](int v) { return std::min(v, 5); };
  return "Respects Guided Questions: " + std::to_string(cap(rgq)) + "\nEncourages Active Learning: " +
         std::to_string(cap(eal)) + "\nDeepens Metacognition: " + std::to_string(cap(dm)) +
         "\nMotivates and Stimulates Student Curiosity: " + std::to_string(cap(mssc)) + "\n";
}

std::string segments_response(std::string_view feedback) {
  json arr = json::array();
  for (const auto& s : sentence_texts(feedback)) {
    const std::string lower = to_lower(s);
    const bool problem = contains_any(lower, kProblemWords);
    const bool solution = contains_any(lower, kSolutionWords);
    const bool praise = contains_any(lower, kPraiseWords) || (!problem && !solution);
    arr.push_back({{"segment", s}, {"praise", praise}, {"problem", problem}, {"solution", solution}});
  }
  return arr.dump();
}

std::string scope_response(std::string_view segment) {
  return contains_any(to_lower(segment), kLocalWords) ? "Scope: local" : "Scope: global";
}

std::string consistency_response(std::string_view segment) {
  return contains_any(to_lower(segment), kHedgeWords) ? "Consistent: no" : "Consistent: yes";
}

std::string suggestions_response(std::string_view feedback) {
  std::string out;
  const auto directives = parse_directives(feedback);
  for (const auto& d : directives) out += "Suggestion: " + d.source_line + "\n";
  if (directives.empty()) {
    for (const auto& s : sentence_texts(feedback)) {
      if (contains_any(to_lower(s), kSolutionWords)) out += "Suggestion: " + s + "\n";
    }
  }
  return out.empty() ? "Suggestion: none\n" : out;
}

std::string faithfulness_response(std::string_view suggestions, std::string_view initial, std::string_view revised) {
  static const std::regex item(R"(^\s*(\d+)\.\s+(.*?)\s*$)");
  const std::string init(initial), rev(revised);
  std::vector<std::string> init_sentences = sentence_texts(initial);
  std::string out;
  std::vector<std::string> appended;
  std::vector<std::string> replacements;
  std::size_t pos = 0;
  while (pos <= suggestions.size()) {
    auto nl = suggestions.find('\n', pos);
    if (nl == std::string_view::npos) nl = suggestions.size();
    const std::string line(suggestions.substr(pos, nl - pos));
    pos = nl + 1;
    std::smatch m;
    if (!std::regex_match(line, m, item)) continue;
    std::string verdict = "ignored";
    if (auto d = parse_directive(m[2].str())) {
      switch (d->kind) {
        case DirectiveKind::append:
          appended.push_back(d->text);
          if (count_of(rev, d->text) > count_of(init, d->text)) verdict = "faithful";
          break;
        case DirectiveKind::delete_sentence:
          if (d->index <= init_sentences.size()) {
            const auto& target = init_sentences[d->index - 1];
            if (count_of(rev, target) < count_of(init, target)) verdict = "faithful";
          }
          break;
        case DirectiveKind::replace:
          if (!d->new_text.empty()) replacements.push_back(d->new_text);
          if (d->new_text.empty() ? count_of(rev, d->old_text) < count_of(init, d->old_text)
                                  : count_of(rev, d->new_text) > count_of(init, d->new_text)) {
            verdict = "faithful";
          }
          break;
      }
    }
    out += "Suggestion " + m[1].str() + ": " + verdict + "\n";
  }

  std::map<std::string, int> remaining;
  for (const auto& s : init_sentences) ++remaining[s];
  int unfaithful = 0;
  for (const auto& s : sentence_texts(revised)) {
    if (remaining[s] > 0) {
      --remaining[s];
      continue;
    }
    if (auto it = std::find(appended.begin(), appended.end(), s); it != appended.end()) {
      appended.erase(it);
      continue;
    }
    if (std::any_of(replacements.begin(), replacements.end(), [&](const auto& r) { return s.find(r) != std::string::npos; })) {
      continue;
    }
    ++unfaithful;
  }
  out += "Unfaithful: " + std::to_string(unfaithful) + "\n";
  return out;
}

std::string combine_response(std::string_view r1, std::string_view r2, std::string_view r3) {
  std::vector<std::string> headings;
  std::map<std::string, std::vector<std::string>> bodies;
  std::vector<std::string> loose;
  for (auto review : {r1, r2, r3}) {
    std::size_t pos = 0;
    while (pos <= review.size()) {
      auto nl = review.find('\n', pos);
      if (nl == std::string_view::npos) nl = review.size();
      const std::string line = trim(review.substr(pos, nl - pos));
      pos = nl + 1;
      if (line.empty()) continue;
      const auto colon = line.find(':');
      if (parse_directive(line) || colon == std::string::npos || colon > 60) {
        loose.push_back(line);
        continue;
      }
      const std::string heading = trim(std::string_view(line).substr(0, colon));
      if (!bodies.count(heading)) headings.push_back(heading);
      bodies[heading].push_back(trim(std::string_view(line).substr(colon + 1)));
    }
  }
  std::string out;
  for (const auto& h : headings) out += h + ": " + join(bodies[h], " ") + "\n";
  for (const auto& l : loose) out += l + "\n";
  return out;
}

std::string generator_response(std::string_view essay, std::int64_t seed) {
  static const std::array<std::string, 3> kBank = {
      "Understanding 1: Some central terms are missing.\nUnderstanding 2: Could you connect the markets more explicitly?\n"
      "Critical Thinking 1: Explain the effect of the policy on workers.\nCritical Thinking 2: Consider one more economic argument.\n"
      "Critical Thinking 3: Sources are not cited.\nResponse Alignment with Audience: The letter is clear overall.\n",
      "Understanding 1: Good coverage of the main ideas.\nUnderstanding 2: Try linking the labor and goods markets.\n"
      "Critical Thinking 1: What happens to prices after the policy?\nCritical Thinking 2: Add a supporting example.\n"
      "Critical Thinking 3: Add a works cited page.\nResponse Alignment with Audience: Some sentences are confusing.\n",
      "Understanding 1: The definitions are mostly correct.\nUnderstanding 2: Why do these markets interact?\n"
      "Critical Thinking 1: Discuss long term effects.\nCritical Thinking 2: Use surplus to justify your position.\n"
      "Critical Thinking 3: Citations look fine.\nResponse Alignment with Audience: Nice tone for the reader.\n",
  };
  const auto idx = mix_seed(fnv1a64(essay), static_cast<std::uint64_t>(seed)) % kBank.size();
  return kBank[idx];
}

// ---------------------------------------------------------------- wiring

void install_routes(Backend& backend, std::shared_ptr<const PromptLibrary> prompts, Schedule schedule) {
  if (!prompts) throw ConfigError("scripted routes need a prompt library");
  auto field = [](const std::map<std::string, std::string>& m, const char* k) -> const std::string& { return m.at(k); };

  MockRoute sim;
  sim.role = Role::simulator;
  sim.responder = [prompts, schedule](const GenerationRequest& r) {
    const auto values = prompts->get("revise").extract(r.prompt);
    if (!values) throw MalformedResponse("scripted simulator cannot read the revise prompt");
    return revise(values->at("essay"), values->at("feedback"), r.temperature, r.seed, schedule);
  };
  backend.add_route(std::move(sim));

  MockRoute comb;
  comb.role = Role::combiner;
  comb.responder = [prompts, field](const GenerationRequest& r) {
    const auto v = prompts->get("combine").extract(r.prompt);
    if (!v) throw MalformedResponse("scripted combiner cannot read the combine prompt");
    return combine_response(field(*v, "review_1"), field(*v, "review_2"), field(*v, "review_3"));
  };
  backend.add_route(std::move(comb));

  MockRoute gen;
  gen.role = Role::generator;
  gen.responder = [prompts](const GenerationRequest& r) {
    const auto v = prompts->get("generate_feedback").extract(r.prompt);
    if (!v) throw MalformedResponse("scripted generator cannot read the feedback prompt");
    return generator_response(v->at("essay"), r.seed);
  };
  backend.add_route(std::move(gen));

  MockRoute judge;
  judge.role = Role::judge;
  judge.responder = [prompts](const GenerationRequest& r) -> std::string {
    const std::string_view prompt = strip_reprompt(r.prompt);
    if (auto v = prompts->get("grading_rubric").extract(prompt)) return rubric_response(v->at("essay"));
    if (auto v = prompts->get("pedagogical_eval").extract(prompt)) return pedagogical_response(v->at("feedback"));
    if (auto v = prompts->get("segmenter").extract(prompt)) return segments_response(v->at("feedback"));
    if (auto v = prompts->get("segment_scope").extract(prompt)) return scope_response(v->at("segment"));
    if (auto v = prompts->get("segment_consistency").extract(prompt)) return consistency_response(v->at("segment"));
    if (auto v = prompts->get("faithfulness_extract").extract(prompt)) return suggestions_response(v->at("feedback"));
    if (auto v = prompts->get("faithfulness").extract(prompt)) {
      return faithfulness_response(v->at("suggestions"), v->at("initial"), v->at("revised"));
    }
    throw MalformedResponse("scripted judge does not recognise the prompt");
  };
  backend.add_route(std::move(judge));
}

BackendPtr make_backend(std::shared_ptr<const PromptLibrary> prompts, Schedule schedule, std::string name,
                        std::optional<std::filesystem::path> cache_dir) {
  BackendConfig cfg;
  cfg.kind = BackendKind::scripted_mock;
  cfg.name = std::move(name);
  cfg.cache_dir = std::move(cache_dir);
  auto backend = std::make_shared<Backend>(cfg);
  install_routes(*backend, std::move(prompts), std::move(schedule));
  return backend;
}

}  // namespace prof::scripted
