#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prof {

/// Text with {{name}} placeholders.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  PromptTemplate(std::string name, std::string text);

  const std::string& name() const { return name_; }
  const std::string& text() const { return text_; }
  std::vector<std::string> placeholders() const;
  bool has_placeholder(std::string_view key) const;

  /// Throws ConfigError when a placeholder has no value.
  std::string render(const std::map<std::string, std::string>& values) const;

  /// Inverse of render: recovers placeholder values from a rendered prompt,
  /// or nullopt if the prompt was not produced by this template. Values must
  /// not contain the literal text that follows their placeholder.
  std::optional<std::map<std::string, std::string>> extract(std::string_view prompt) const;

 private:
  struct Piece {
    bool placeholder = false;
    std::string text;  // literal text or placeholder name
  };

  std::string name_;
  std::string text_;
  std::vector<Piece> pieces_;
};

/// Prompt assets compiled into the binary, keyed by file name ("revise.txt").
const std::map<std::string, std::string>& bundled_prompt_assets();

/// Bundled prompts, optionally shadowed by same-named files in a directory.
class PromptLibrary {
 public:
  explicit PromptLibrary(std::optional<std::filesystem::path> override_dir = std::nullopt);

  /// Name without extension, e.g. "grading_rubric". Throws ConfigError.
  const PromptTemplate& get(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace prof
