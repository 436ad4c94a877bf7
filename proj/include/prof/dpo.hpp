#pragma once

#include <span>
#include <vector>

#include "prof/data.hpp"
#include "prof/policy.hpp"

namespace prof {

struct DPOConfig {
  double beta = 0.1;
  double learning_rate = 0.5;
  int epochs = 5;
  LossForm loss_form = LossForm::log_ratio;
};

void validate(const DPOConfig& config);

/// -log sigma(beta * margin). log_ratio: margin = (lp+_theta - lp+_ref) - (lp-_theta - lp-_ref).
/// literal_ratio: margin = exp(lp+_theta - lp+_ref) - exp(lp-_theta - lp-_ref).
/// Throws NonFiniteInput.
double dpo_loss(double lp_plus_theta, double lp_plus_ref, double lp_minus_theta, double lp_minus_ref, double beta,
                LossForm form = LossForm::log_ratio);

/// A preference pair resolved against a policy's key and template bank.
struct TemplatePair {
  std::size_t key = 0;
  std::size_t chosen = 0;
  std::size_t rejected = 0;
};

/// Throws UnknownTemplate when either feedback body is not in the bank.
TemplatePair resolve_pair(const ToyPolicy& policy, const PreferencePair& pair);

using Gradient = std::vector<std::vector<double>>;  // same shape as theta

double pair_loss(const ToyPolicy& policy, const ToyPolicy& ref, const TemplatePair& pair, double beta, LossForm form);

/// Analytic d loss / d theta for one pair; only the pair's key row is non-zero.
Gradient dpo_gradient(const ToyPolicy& policy, const ToyPolicy& ref, const TemplatePair& pair, double beta,
                      LossForm form = LossForm::log_ratio);

double mean_loss(const ToyPolicy& policy, const ToyPolicy& ref, std::span<const TemplatePair> pairs, double beta,
                 LossForm form);

struct TrainReport {
  double loss_before = 0;
  double loss_after = 0;
  std::vector<double> epoch_losses;
};

/// Full-batch gradient descent on the summed pair losses, starting from
/// `ref` and keeping it as the frozen reference. A step that would raise the
/// loss is halved until it does not. Throws EmptyPairs, UnknownTemplate.
ToyPolicy train_dpo(const ToyPolicy& ref, const std::vector<PreferencePair>& pairs, const DPOConfig& config,
                    TrainReport* report = nullptr);

}  // namespace prof
