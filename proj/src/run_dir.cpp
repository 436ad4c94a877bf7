#include "prof/run_dir.hpp"

#include "prof/error.hpp"
#include "prof/util.hpp"

namespace prof {

int RunLayout::last_completed_iteration() const {
  int t = 0;
  while (std::filesystem::exists(done_marker(t + 1))) ++t;
  return t;
}

void write_json_file(const std::filesystem::path& path, const json& value) {
  write_file_atomic(path, value.dump(2) + "\n");
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SerializationError(path.string() + ": " + e.what());
  }
}

void write_manifest(const RunLayout& layout, const RunManifest& manifest) {
  validate(manifest);
  write_json_file(layout.manifest(), manifest);
}

std::optional<RunManifest> read_manifest(const RunLayout& layout) {
  if (!std::filesystem::exists(layout.manifest())) return std::nullopt;
  try {
    return read_json_file(layout.manifest()).get<RunManifest>();
  } catch (const json::exception& e) {
    throw SerializationError("manifest: " + std::string(e.what()));
  }
}

}  // namespace prof
