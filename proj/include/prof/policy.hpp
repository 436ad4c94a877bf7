#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace prof {

/// Softmax distribution over a fixed bank of feedback templates, one row of
/// logits per feature key. Essays whose id is not a key use "default".
struct ToyPolicy {
  std::vector<std::string> templates;
  std::vector<std::string> keys{"default"};
  std::vector<std::vector<double>> theta;  // keys x templates
  int version = 0;

  std::size_t key_index(std::string_view essay_key) const;
  /// Throws UnknownTemplate.
  std::size_t template_index(std::string_view body) const;
  std::vector<double> log_probs(std::size_t key) const;
  std::vector<double> probabilities(std::size_t key) const;

  bool operator==(const ToyPolicy&) const = default;
};

inline constexpr std::string_view kDefaultKey = "default";

/// Shapes agree, "default" key present, templates unique and non-empty,
/// theta finite. Throws ConfigError.
void validate(const ToyPolicy& policy);

ToyPolicy uniform_policy(std::vector<std::string> templates);

void to_json(nlohmann::json& j, const ToyPolicy& p);
void from_json(const nlohmann::json& j, ToyPolicy& p);
ToyPolicy load_policy(const std::filesystem::path& path);
void save_policy(const ToyPolicy& policy, const std::filesystem::path& path);

/// log softmax(theta[key])[template]. Throws UnknownTemplate.
double policy_logprob(const ToyPolicy& policy, std::string_view essay_key, std::size_t template_id);
double policy_logprob(const ToyPolicy& policy, std::string_view essay_key, std::string_view template_body);

/// Argmax logit; the earliest template wins ties.
std::size_t greedy_template(const ToyPolicy& policy, std::string_view essay_key);

/// k draws by inverse CDF over softmax(theta / temperature) from one
/// mt19937_64 stream seeded with `seed`. temperature 0 means greedy.
std::vector<std::size_t> sample_templates(const ToyPolicy& policy, std::string_view essay_key, std::size_t k,
                                          double temperature, std::uint64_t seed);

}  // namespace prof
