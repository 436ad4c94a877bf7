#pragma once

#include "prof/error.hpp"

namespace prof {

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::vector<T> out;
  std::size_t line_no = 0;
  for (const auto& row : read_jsonl_rows(path)) {
    ++line_no;
    try {
      out.push_back(row.template get<T>());
    } catch (const json::exception& e) {
      throw SerializationError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace prof
