#include "prof/prompt.hpp"

#include <algorithm>

#include "prof/error.hpp"
#include "prof/util.hpp"

namespace prof {

PromptTemplate::PromptTemplate(std::string name, std::string text) : name_(std::move(name)), text_(std::move(text)) {
  std::size_t pos = 0;
  while (pos < text_.size()) {
    const auto open = text_.find("{{", pos);
    if (open == std::string::npos) {
      pieces_.push_back({false, text_.substr(pos)});
      break;
    }
    const auto close = text_.find("}}", open + 2);
    if (close == std::string::npos) throw ConfigError("unterminated placeholder in prompt '" + name_ + "'");
    if (open > pos) pieces_.push_back({false, text_.substr(pos, open - pos)});
    const std::string key = trim(std::string_view(text_).substr(open + 2, close - open - 2));
    if (key.empty()) throw ConfigError("empty placeholder in prompt '" + name_ + "'");
    if (!pieces_.empty() && pieces_.back().placeholder) {
      throw ConfigError("adjacent placeholders in prompt '" + name_ + "' cannot be extracted");
    }
    pieces_.push_back({true, key});
    pos = close + 2;
  }
}

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> out;
  for (const auto& p : pieces_) {
    if (p.placeholder && std::find(out.begin(), out.end(), p.text) == out.end()) out.push_back(p.text);
  }
  return out;
}

bool PromptTemplate::has_placeholder(std::string_view key) const {
  return std::any_of(pieces_.begin(), pieces_.end(), [&](const Piece& p) { return p.placeholder && p.text == key; });
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  for (const auto& p : pieces_) {
    if (!p.placeholder) {
      out += p.text;
      continue;
    }
    const auto it = values.find(p.text);
    if (it == values.end()) throw ConfigError("prompt '" + name_ + "' needs a value for {{" + p.text + "}}");
    out += it->second;
  }
  return out;
}

std::optional<std::map<std::string, std::string>> PromptTemplate::extract(std::string_view prompt) const {
  std::map<std::string, std::string> values;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const auto& p = pieces_[i];
    if (!p.placeholder) {
      if (prompt.substr(pos, p.text.size()) != p.text) return std::nullopt;
      pos += p.text.size();
      continue;
    }
    std::size_t end = prompt.size();
    if (i + 1 < pieces_.size()) {
      const auto& next = pieces_[i + 1].text;
      // The trailing literal is anchored at the end; inner literals at their
      // first occurrence.
      end = i + 2 == pieces_.size() ? (prompt.size() >= next.size() && prompt.substr(prompt.size() - next.size()) == next
                                           ? prompt.size() - next.size()
                                           : std::string_view::npos)
                                    : prompt.find(next, pos);
      if (end == std::string_view::npos || end < pos) return std::nullopt;
    }
    const std::string value(prompt.substr(pos, end - pos));
    if (auto [it, inserted] = values.emplace(p.text, value); !inserted && it->second != value) return std::nullopt;
    pos = end;
  }
  if (pos != prompt.size()) return std::nullopt;
  return values;
}

PromptLibrary::PromptLibrary(std::optional<std::filesystem::path> override_dir) {
  std::map<std::string, std::string> texts = bundled_prompt_assets();
  if (override_dir) {
    if (!std::filesystem::is_directory(*override_dir)) {
      throw ConfigError("prompt directory does not exist: " + override_dir->string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(*override_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") {
        texts[entry.path().filename().string()] = read_file(entry.path());
      }
    }
  }
  for (auto& [file, text] : texts) {
    const std::string name = std::filesystem::path(file).stem().string();
    templates_.emplace(name, PromptTemplate(name, std::move(text)));
  }
}

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
  const auto it = templates_.find(name);
  if (it == templates_.end()) throw ConfigError("unknown prompt asset '" + name + "'");
  return it->second;
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : templates_) out.push_back(name);
  return out;
}

}  // namespace prof
