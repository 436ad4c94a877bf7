#include "prof/dpo.hpp"

#include <cmath>

#include "prof/error.hpp"

namespace prof {

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double margin(double lp_plus_theta, double lp_plus_ref, double lp_minus_theta, double lp_minus_ref, LossForm form) {
  if (form == LossForm::log_ratio) return (lp_plus_theta - lp_plus_ref) - (lp_minus_theta - lp_minus_ref);
  return std::exp(lp_plus_theta - lp_plus_ref) - std::exp(lp_minus_theta - lp_minus_ref);
}

}  // namespace

void validate(const DPOConfig& c) {
  if (!(c.beta > 0) || !std::isfinite(c.beta)) throw ConfigError("beta must be > 0");
  if (!(c.learning_rate > 0) || !std::isfinite(c.learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
}

double dpo_loss(double lp_plus_theta, double lp_plus_ref, double lp_minus_theta, double lp_minus_ref, double beta,
                LossForm form) {
  for (double v : {lp_plus_theta, lp_plus_ref, lp_minus_theta, lp_minus_ref, beta}) {
    if (!std::isfinite(v)) throw NonFiniteInput("dpo_loss input is not finite");
  }
  return softplus(-beta * margin(lp_plus_theta, lp_plus_ref, lp_minus_theta, lp_minus_ref, form));
}

TemplatePair resolve_pair(const ToyPolicy& policy, const PreferencePair& pair) {
  return {policy.key_index(pair.essay_id), policy.template_index(pair.chosen.body), policy.template_index(pair.rejected.body)};
}

double pair_loss(const ToyPolicy& policy, const ToyPolicy& ref, const TemplatePair& p, double beta, LossForm form) {
  const auto lp = policy.log_probs(p.key);
  const auto lr = ref.log_probs(p.key);
  return dpo_loss(lp.at(p.chosen), lr.at(p.chosen), lp.at(p.rejected), lr.at(p.rejected), beta, form);
}

Gradient dpo_gradient(const ToyPolicy& policy, const ToyPolicy& ref, const TemplatePair& p, double beta, LossForm form) {
  const std::size_t n = policy.templates.size();
  if (p.chosen >= n || p.rejected >= n) throw UnknownTemplate("pair template id outside the bank");
  Gradient g(policy.theta.size(), std::vector<double>(n, 0.0));
  if (p.chosen == p.rejected) return g;
  const auto lp = policy.log_probs(p.key);
  const auto lr = ref.log_probs(p.key);
  const double z = beta * margin(lp[p.chosen], lr[p.chosen], lp[p.rejected], lr[p.rejected], form);
  // d/dz softplus(-z) = -sigma(-z)
  const double outer = -sigmoid(-z) * beta;
  auto& row = g[p.key];
  if (form == LossForm::log_ratio) {
    // The softmax normaliser cancels between the two log-probabilities.
    row[p.chosen] += outer;
    row[p.rejected] -= outer;
    return g;
  }
  // d/dtheta r = r * (e_k - p)
  const double r_plus = std::exp(lp[p.chosen] - lr[p.chosen]);
  const double r_minus = std::exp(lp[p.rejected] - lr[p.rejected]);
  for (std::size_t i = 0; i < n; ++i) {
    const double prob = std::exp(lp[i]);
    const double d_plus = (i == p.chosen ? 1.0 : 0.0) - prob;
    const double d_minus = (i == p.rejected ? 1.0 : 0.0) - prob;
    row[i] = outer * (r_plus * d_plus - r_minus * d_minus);
  }
  return g;
}

double mean_loss(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const TemplatePair> pairs, double beta,
                 LossForm form) {
  if (pairs.empty()) throw EmptyPairs();
  double sum = 0;
  for (const auto& p : pairs) sum += pair_loss(policy, ref, p, beta, form);
  return sum / static_cast<double>(pairs.size());
}

ToyPolicy train_dpo(const ToyPolicy& ref, const std::vector<PreferencePair>& pairs, const DPOConfig& config,
                    TrainReport* report) {
  validate(config);
  validate(ref);
  if (pairs.empty()) throw EmptyPairs();
  std::vector<TemplatePair> resolved;
  resolved.reserve(pairs.size());
  for (const auto& p : pairs) resolved.push_back(resolve_pair(ref, p));

  ToyPolicy policy = ref;
  policy.version = ref.version + 1;
  const double before = mean_loss(policy, ref, resolved, config.beta, config.loss_form);
  double current = before;
  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Gradient total(policy.theta.size(), std::vector<double>(policy.templates.size(), 0.0));
    for (const auto& p : resolved) {
      const auto g = dpo_gradient(policy, ref, p, config.beta, config.loss_form);
      for (std::size_t k = 0; k < total.size(); ++k) {
        for (std::size_t i = 0; i < total[k].size(); ++i) total[k][i] += g[k][i];
      }
    }
    double step = config.learning_rate;
    for (int attempt = 0; attempt < 40; ++attempt, step *= 0.5) {
      ToyPolicy candidate = policy;
      for (std::size_t k = 0; k < total.size(); ++k) {
        for (std::size_t i = 0; i < total[k].size(); ++i) candidate.theta[k][i] -= step * total[k][i];
      }
      const double loss = mean_loss(candidate, ref, resolved, config.beta, config.loss_form);
      if (loss <= current) {
        policy = std::move(candidate);
        current = loss;
        break;
      }
    }
    epoch_losses.push_back(current);
  }
  if (current > before) throw InternalError("DPO training increased the mean loss");
  if (report) *report = {before, current, std::move(epoch_losses)};
  return policy;
}

}  // namespace prof
