#include "prof/policy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "prof/error.hpp"
#include "prof/run_dir.hpp"
#include "prof/util.hpp"

namespace prof {

using json = nlohmann::json;

namespace {

std::vector<double> log_softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

}  // namespace

std::size_t ToyPolicy::key_index(std::string_view essay_key) const {
  std::size_t fallback = keys.size();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i] == essay_key) return i;
    if (keys[i] == kDefaultKey) fallback = i;
  }
  if (fallback == keys.size()) throw ConfigError("policy has no 'default' key");
  return fallback;
}

std::size_t ToyPolicy::template_index(std::string_view body) const {
  for (std::size_t i = 0; i < templates.size(); ++i) {
    if (templates[i] == body) return i;
  }
  throw UnknownTemplate("feedback is not in the policy's template bank: " + std::string(body.substr(0, 60)));
}

std::vector<double> ToyPolicy::log_probs(std::size_t key) const { return log_softmax(theta.at(key)); }

std::vector<double> ToyPolicy::probabilities(std::size_t key) const {
  auto lp = log_probs(key);
  for (auto& v : lp) v = std::exp(v);
  return lp;
}

void validate(const ToyPolicy& p) {
  if (p.templates.empty()) throw ConfigError("policy template bank is empty");
  std::set<std::string> seen;
  for (const auto& t : p.templates) {
    if (t.empty()) throw ConfigError("policy has an empty template");
    if (!seen.insert(t).second) throw ConfigError("policy has duplicate templates");
  }
  if (std::find(p.keys.begin(), p.keys.end(), kDefaultKey) == p.keys.end()) throw ConfigError("policy has no 'default' key");
  if (std::set<std::string>(p.keys.begin(), p.keys.end()).size() != p.keys.size()) throw ConfigError("policy has duplicate keys");
  if (p.theta.size() != p.keys.size()) throw ConfigError("policy theta needs one row per key");
  for (const auto& row : p.theta) {
    if (row.size() != p.templates.size()) throw ConfigError("policy theta row length differs from template count");
    for (double v : row) {
      if (!std::isfinite(v)) throw ConfigError("policy theta is not finite");
    }
  }
}

ToyPolicy uniform_policy(std::vector<std::string> templates) {
  ToyPolicy p;
  p.theta.assign(1, std::vector<double>(templates.size(), 0.0));
  p.templates = std::move(templates);
  validate(p);
  return p;
}

void to_json(json& j, const ToyPolicy& p) {
  j = json{{"templates", p.templates}, {"keys", p.keys}, {"theta", p.theta}, {"version", p.version}};
}

void from_json(const json& j, ToyPolicy& p) {
  p.templates = j.at("templates").get<std::vector<std::string>>();
  p.keys = j.value("keys", std::vector<std::string>{std::string(kDefaultKey)});
  if (j.contains("theta")) {
    p.theta = j.at("theta").get<std::vector<std::vector<double>>>();
  } else {
    p.theta.assign(p.keys.size(), std::vector<double>(p.templates.size(), 0.0));
  }
  p.version = j.value("version", 0);
}

ToyPolicy load_policy(const std::filesystem::path& path) {
  ToyPolicy p;
  try {
    p = read_json_file(path).get<ToyPolicy>();
  } catch (const json::exception& e) {
    throw ConfigError("bad policy file " + path.string() + ": " + e.what());
  }
  validate(p);
  return p;
}

void save_policy(const ToyPolicy& policy, const std::filesystem::path& path) { write_json_file(path, json(policy)); }

double policy_logprob(const ToyPolicy& policy, std::string_view essay_key, std::size_t template_id) {
  if (template_id >= policy.templates.size()) {
    throw UnknownTemplate("template id " + std::to_string(template_id) + " outside bank of " +
                          std::to_string(policy.templates.size()));
  }
  return policy.log_probs(policy.key_index(essay_key))[template_id];
}

double policy_logprob(const ToyPolicy& policy, std::string_view essay_key, std::string_view template_body) {
  return policy_logprob(policy, essay_key, policy.template_index(template_body));
}

std::size_t greedy_template(const ToyPolicy& policy, std::string_view essay_key) {
  const auto& row = policy.theta.at(policy.key_index(essay_key));
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::vector<std::size_t> sample_templates(const ToyPolicy& policy, std::string_view essay_key, std::size_t k,
                                          double temperature, std::uint64_t seed) {
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw PreconditionError("temperature outside [0, 2]");
  if (temperature == 0.0) return std::vector<std::size_t>(k, greedy_template(policy, essay_key));
  auto logits = policy.theta.at(policy.key_index(essay_key));
  for (auto& v : logits) v /= temperature;
  auto probs = log_softmax(logits);
  std::vector<double> cdf(probs.size());
  double acc = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += std::exp(probs[i]);
    cdf[i] = acc;
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t n = 0; n < k; ++n) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    out.push_back(static_cast<std::size_t>(it - cdf.begin()));
  }
  return out;
}

}  // namespace prof
