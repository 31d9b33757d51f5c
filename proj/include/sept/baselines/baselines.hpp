#pragma once

// Baselines and ablations: Avg, Oracle, EPOpt-adv, first-order MAML,
// SEPT-NP, DynaSEPT, and the TotalVar probe reward.

#include <cstddef>
#include <vector>

#include "sept/algo/config.hpp"
#include "sept/control/control_policy.hpp"
#include "sept/nn/network.hpp"
#include "sept/sept/sept.hpp"
#include "sept/vae/trajectory_vae.hpp"

namespace sept::baselines {

/// 1/T_p * sum_{t=1}^{T_p-1} sum_i |s_{t+1,i} - s_{t,i}| over the first T_p
/// states. Throws std::invalid_argument when T_p < 2 or there are fewer
/// than T_p states.
double totalvar_reward(const std::vector<std::vector<double>>& states, int T_p);

struct DynaState {
  std::vector<double> sigma_max;  // empty until the first posterior
  double eta = 1.0;
};

struct DynaStep {
  double eta = 1.0;
  double total_reward = 0.0;
};

/// sigma_i = exp(log_variance_i / 2); the running max is raised first, then
/// eta = mean_i sigma_i / sigma_max_i and R_tot = eta R_p + (1 - eta) R_env.
DynaStep dynasept_step(DynaState& state, const std::vector<double>& log_variance, double probe_reward,
                       double env_reward);

/// Indices of the lowest ceil(percentile% * n) returns, ordered by return
/// (ties by index).
std::vector<std::size_t> epopt_select(const std::vector<double>& returns, double percentile);

/// Mean Huber TD loss over `batch` with double-DQN targets from the
/// learner's target network; gradient w.r.t. `params` when requested.
double td_loss(const control::QLearner& q, const nn::ParameterSet<float>& params,
               const std::vector<control::Transition>& batch, nn::ParameterSet<float>* grads);

/// One plain gradient step on the TD loss of the adaptation transitions.
nn::ParameterSet<float> maml_adapt(const control::QLearner& q, const std::vector<control::Transition>& adaptation,
                                   double inner_learning_rate);

/// Trains a non-probe method (everything except SEPT/TotalVar/MaxEnt).
/// Throws std::invalid_argument for probe methods.
algo::TrainedModel run_baseline(const algo::TrainConfig& config);

/// Test episode for a non-probe method.
algo::EpisodeResult test_baseline(const algo::TrainedModel& model, const env::InstanceSpec& instance, Rng& rng);

}  // namespace sept::baselines
