#include "prof/diff.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>

#include "prof/error.hpp"

namespace prof::diff {

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c) != 0; }

struct RawWord {
  Range chars;
};

std::vector<RawWord> raw_words(std::string_view text) {
  std::vector<RawWord> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) break;
    const std::size_t begin = i;
    while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
    out.push_back({{begin, i}});
  }
  return out;
}

// Closing quotes/brackets that may trail a sentence terminator, including the
// UTF-8 right quotation marks.
std::string_view strip_closers(std::string_view w) {
  for (;;) {
    if (!w.empty() && (w.back() == '"' || w.back() == '\'' || w.back() == ')' || w.back() == ']' || w.back() == '}')) {
      w.remove_suffix(1);
    } else if (w.size() >= 3 && w.substr(w.size() - 3) == "\xE2\x80\x9D") {
      w.remove_suffix(3);
    } else if (w.size() >= 3 && w.substr(w.size() - 3) == "\xE2\x80\x99") {
      w.remove_suffix(3);
    } else {
      return w;
    }
  }
}

std::string_view strip_openers(std::string_view w) {
  for (;;) {
    if (!w.empty() && (w.front() == '"' || w.front() == '\'' || w.front() == '(' || w.front() == '[' || w.front() == '{')) {
      w.remove_prefix(1);
    } else if (w.size() >= 3 && (w.substr(0, 3) == "\xE2\x80\x9C" || w.substr(0, 3) == "\xE2\x80\x98")) {
      w.remove_prefix(3);
    } else {
      return w;
    }
  }
}

bool is_abbreviation(std::string_view word) {
  static constexpr std::array<std::string_view, 8> kAbbreviations = {"dr.", "mr.", "ms.", "mrs.",
                                                                     "e.g.", "i.e.", "etc.", "u.s."};
  std::string lower(strip_closers(strip_openers(word)));
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) != kAbbreviations.end();
}

bool ends_with_terminator(std::string_view word) {
  const auto core = strip_closers(word);
  return !core.empty() && (core.back() == '.' || core.back() == '!' || core.back() == '?');
}

bool starts_with_capital(std::string_view word) {
  const auto core = strip_openers(word);
  return !core.empty() && core.front() >= 'A' && core.front() <= 'Z';
}

}  // namespace

std::vector<Token> tokenize_words(std::string_view text) {
  std::vector<Token> out;
  for (const auto& w : raw_words(text)) {
    const std::string_view word = text.substr(w.chars.begin, w.chars.size());
    std::size_t cut = word.size();
    while (cut > 0 && is_ascii_punct(static_cast<unsigned char>(word[cut - 1]))) --cut;
    if (cut == 0 || cut == word.size()) {
      out.push_back({std::string(word), w.chars});
      continue;
    }
    out.push_back({std::string(word.substr(0, cut)), {w.chars.begin, w.chars.begin + cut}});
    out.push_back({std::string(word.substr(cut)), {w.chars.begin + cut, w.chars.end}});
  }
  return out;
}

std::vector<std::string> word_texts(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_words(text)) out.push_back(std::move(t.text));
  return out;
}

std::vector<SentenceSpan> tokenize_sentences(std::string_view text) {
  const auto words = raw_words(text);
  std::vector<SentenceSpan> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::string_view word = text.substr(words[i].chars.begin, words[i].chars.size());
    if (!ends_with_terminator(word)) continue;
    const bool last = i + 1 == words.size();
    bool boundary = false;
    if (last) {
      boundary = true;
    } else if (!is_abbreviation(word)) {
      const std::string_view next = text.substr(words[i + 1].chars.begin, words[i + 1].chars.size());
      boundary = starts_with_capital(next);
    }
    if (boundary) {
      out.push_back({{words[start].chars.begin, words[i].chars.end}, true});
      start = i + 1;
    }
  }
  if (start < words.size()) {
    out.push_back({{words[start].chars.begin, words.back().chars.end}, false});
  }
  return out;
}

std::vector<MatchingBlock> matching_blocks(std::span<const std::string> a, std::span<const std::string> b) {
  // Intern tokens so the inner loop compares integers.
  std::unordered_map<std::string_view, int> ids;
  auto intern = [&](std::span<const std::string> seq) {
    std::vector<int> out;
    out.reserve(seq.size());
    for (const auto& s : seq) out.push_back(ids.emplace(s, static_cast<int>(ids.size())).first->second);
    return out;
  };
  const std::vector<int> ai = intern(a);
  const std::vector<int> bi = intern(b);

  std::vector<std::size_t> prev, cur;
  auto longest = [&](std::size_t alo, std::size_t ahi, std::size_t blo, std::size_t bhi) {
    MatchingBlock best{alo, blo, 0};
    const std::size_t width = bhi - blo;
    prev.assign(width + 1, 0);
    cur.assign(width + 1, 0);
    for (std::size_t i = alo; i < ahi; ++i) {
      for (std::size_t j = blo; j < bhi; ++j) {
        const std::size_t col = j - blo + 1;
        if (ai[i] == bi[j]) {
          const std::size_t k = prev[col - 1] + 1;
          cur[col] = k;
          // Strict '>' keeps the earliest end in a, then in b; equal-length
          // blocks ending earlier also start earlier.
          if (k > best.size) best = {i + 1 - k, j + 1 - k, k};
        } else {
          cur[col] = 0;
        }
      }
      std::swap(prev, cur);
    }
    return best;
  };

  std::vector<MatchingBlock> blocks;
  struct Region {
    std::size_t alo, ahi, blo, bhi;
  };
  std::vector<Region> pending{{0, a.size(), 0, b.size()}};
  while (!pending.empty()) {
    const Region r = pending.back();
    pending.pop_back();
    if (r.alo >= r.ahi || r.blo >= r.bhi) continue;
    const MatchingBlock m = longest(r.alo, r.ahi, r.blo, r.bhi);
    if (m.size == 0) continue;
    blocks.push_back(m);
    pending.push_back({r.alo, m.a, r.blo, m.b});
    pending.push_back({m.a + m.size, r.ahi, m.b + m.size, r.bhi});
  }
  std::sort(blocks.begin(), blocks.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
  return blocks;
}

std::vector<EditRun> diff_opcodes(std::span<const std::string> a, std::span<const std::string> b) {
  auto blocks = matching_blocks(a, b);
  blocks.push_back({a.size(), b.size(), 0});
  std::vector<EditRun> runs;
  std::size_t i = 0, j = 0;
  for (const auto& m : blocks) {
    if (i < m.a) runs.push_back({EditKind::deletion, {i, m.a}, {j, j}, m.a - i});
    if (j < m.b) runs.push_back({EditKind::insertion, {m.a, m.a}, {j, m.b}, m.b - j});
    i = m.a + m.size;
    j = m.b + m.size;
  }
  return runs;
}

std::vector<std::string> apply_edits(std::span<const std::string> a, std::span<const std::string> b,
                                     const std::vector<EditRun>& runs) {
  std::vector<std::string> out;
  std::size_t cursor = 0;
  for (const auto& run : runs) {
    if (run.a_span.begin < cursor || run.a_span.end > a.size() || run.b_span.end > b.size()) {
      throw InternalError("edit runs are out of order or out of bounds");
    }
    out.insert(out.end(), a.begin() + static_cast<std::ptrdiff_t>(cursor),
               a.begin() + static_cast<std::ptrdiff_t>(run.a_span.begin));
    cursor = run.a_span.begin;
    if (run.kind == EditKind::deletion) {
      cursor = run.a_span.end;
    } else {
      out.insert(out.end(), b.begin() + static_cast<std::ptrdiff_t>(run.b_span.begin),
                 b.begin() + static_cast<std::ptrdiff_t>(run.b_span.end));
    }
  }
  out.insert(out.end(), a.begin() + static_cast<std::ptrdiff_t>(cursor), a.end());
  return out;
}

void to_json(nlohmann::json& j, const ModificationSummary& s) {
  j = nlohmann::json{{"words_added", s.words_added},
                     {"words_deleted", s.words_deleted},
                     {"sentences_added", s.sentences_added},
                     {"sentences_deleted", s.sentences_deleted}};
}

void from_json(const nlohmann::json& j, ModificationSummary& s) {
  s.words_added = j.at("words_added").get<std::size_t>();
  s.words_deleted = j.at("words_deleted").get<std::size_t>();
  s.sentences_added = j.at("sentences_added").get<std::size_t>();
  s.sentences_deleted = j.at("sentences_deleted").get<std::size_t>();
}

namespace {

struct Side {
  std::vector<std::string> tokens;
  // Token range of each terminated sentence.
  std::vector<Range> sentences;
};

Side analyse(std::string_view text) {
  Side side;
  const auto tokens = tokenize_words(text);
  const auto spans = tokenize_sentences(text);
  side.tokens.reserve(tokens.size());
  for (const auto& t : tokens) side.tokens.push_back(t.text);
  std::size_t t = 0;
  for (const auto& span : spans) {
    while (t < tokens.size() && tokens[t].chars.begin < span.chars.begin) ++t;
    const std::size_t first = t;
    while (t < tokens.size() && tokens[t].chars.begin < span.chars.end) ++t;
    if (span.terminated && t > first) side.sentences.push_back({first, t});
  }
  return side;
}

// Returns (full sentences covered, tokens inside them).
std::pair<std::size_t, std::size_t> covered_sentences(const Side& side, Range run) {
  std::size_t count = 0, tokens = 0;
  for (const auto& s : side.sentences) {
    if (s.begin >= run.begin && s.end <= run.end) {
      ++count;
      tokens += s.size();
    }
  }
  return {count, tokens};
}

}  // namespace

ModificationSummary classify_modifications(std::string_view initial, std::string_view revised) {
  const Side a = analyse(initial);
  const Side b = analyse(revised);
  ModificationSummary summary;
  for (const auto& run : diff_opcodes(a.tokens, b.tokens)) {
    const bool added = run.kind == EditKind::insertion;
    const auto [sentences, sentence_tokens] =
        added ? covered_sentences(b, run.b_span) : covered_sentences(a, run.a_span);
    const std::size_t words = run.token_count - sentence_tokens;
    if (added) {
      summary.sentences_added += sentences;
      summary.words_added += words;
    } else {
      summary.sentences_deleted += sentences;
      summary.words_deleted += words;
    }
  }
  return summary;
}

}  // namespace prof::diff
