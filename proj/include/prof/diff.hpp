#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace prof::diff {

// Half-open index range.
struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool operator==(const Range&) const = default;
};

struct Token {
  std::string text;
  Range chars;  // byte offsets into the source text
};

/// Whitespace-delimited words with any trailing punctuation run split off as
/// its own token ("sat." -> "sat", ".").
std::vector<Token> tokenize_words(std::string_view text);
std::vector<std::string> word_texts(std::string_view text);

struct SentenceSpan {
  Range chars;
  // False for a trailing fragment that never reached . ! or ?
  bool terminated = false;
};

/// Rule-based splitter: a sentence ends at . ! ? (optionally followed by
/// closing quotes or brackets) when the next word starts with a capital letter
/// or the text ends, unless the word is a listed abbreviation. The spans
/// cover every non-whitespace character exactly once.
std::vector<SentenceSpan> tokenize_sentences(std::string_view text);

struct MatchingBlock {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t size = 0;
  bool operator==(const MatchingBlock&) const = default;
};

/// Ratcliff/Obershelp: take the longest common contiguous block (leftmost in
/// a, then leftmost in b on ties) and recurse on both flanks. Sorted by position.
std::vector<MatchingBlock> matching_blocks(std::span<const std::string> a, std::span<const std::string> b);

enum class EditKind { insertion, deletion };

struct EditRun {
  EditKind kind = EditKind::insertion;
  Range a_span;  // empty for insertions (points at the insertion position)
  Range b_span;  // empty for deletions
  std::size_t token_count = 0;
  bool operator==(const EditRun&) const = default;
};

/// Maximal contiguous insertions and deletions between the matching blocks,
/// ordered by position; a replaced region yields a deletion then an insertion.
std::vector<EditRun> diff_opcodes(std::span<const std::string> a, std::span<const std::string> b);

/// Applies runs to `a`, taking inserted tokens from `b`.
std::vector<std::string> apply_edits(std::span<const std::string> a, std::span<const std::string> b,
                                     const std::vector<EditRun>& runs);

struct ModificationSummary {
  std::size_t words_added = 0;
  std::size_t words_deleted = 0;
  std::size_t sentences_added = 0;
  std::size_t sentences_deleted = 0;
  bool operator==(const ModificationSummary&) const = default;
};

void to_json(nlohmann::json& j, const ModificationSummary& s);
void from_json(const nlohmann::json& j, ModificationSummary& s);

/// A run covering every token of one or more terminated sentences on its own
/// side counts those sentences; its remaining tokens count as words. Any other
/// run counts all of its tokens as words.
ModificationSummary classify_modifications(std::string_view initial, std::string_view revised);

}  // namespace prof::diff
