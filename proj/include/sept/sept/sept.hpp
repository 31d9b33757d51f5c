#pragma once

// Training and single-episode test for every method, plus the checkpoint
// directory format.
//
// Probe-based methods (SEPT, TotalVar, MaxEnt) run here: each training
// episode is probe rollout -> probe update -> VAE update -> latent estimate
// -> DDQN control, in that order. The remaining methods are implemented in
// sept/baselines and dispatched from train().

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sept/algo/config.hpp"
#include "sept/control/control_policy.hpp"
#include "sept/core/random.hpp"
#include "sept/env/env_family.hpp"
#include "sept/probe/probe_policy.hpp"
#include "sept/sept/episode.hpp"
#include "sept/vae/trajectory_vae.hpp"

namespace sept::algo {

struct TrainingLog {
  std::vector<double> returns;        // raw environment return per training episode
  std::vector<double> probe_returns;  // probe objective (0 when the method has none)
  std::vector<int> steps;             // steps to solve, cap when unsolved
  std::vector<int> solved;
};

struct TrainedModel {
  TrainConfig config;
  std::optional<vae::VaeLearner> vae;
  std::optional<probe::ProbeLearner> probe;
  control::QLearner q;
  // SEPT-NP: mean of every latent estimate made during training
  std::vector<double> latent_rolling_mean{};
  long long latent_estimates = 0;
  // DynaSEPT: per-dimension running max of the posterior std, and the
  // normalizer for the windowed probe reward
  std::vector<double> sigma_max{};
  probe::ReturnNormalizer dyna_normalizer{100};
  TrainingLog log{};
};

/// Length of the conditioning vector appended to the state in the Q input.
int condition_dim(const TrainConfig& c);

vae::VaeConfig vae_config(const TrainConfig& c);
probe::ProbeConfig probe_config(const TrainConfig& c);
control::QConfig q_config(const TrainConfig& c);
control::ReplayConfig replay_config(const TrainConfig& c);

/// Fresh, untrained model with the components the method needs.
TrainedModel init_model(const TrainConfig& c, Rng& rng);

/// Independent random streams of one run.
struct RunStreams {
  Rng init;       // parameter initialization
  Rng instances;  // which training instances are drawn
  Rng env;        // environment resets
  Rng act;        // exploration and probe sampling
  Rng learn;      // minibatch sampling, reparameterization noise
};
RunStreams make_streams(std::uint64_t seed);

/// Runs the probe for up to T_p steps through the driver; pads if the
/// episode ended early.
probe::ProbeRecord run_probe(const probe::ProbeLearner& probe, EpisodeDriver& driver, int T_p, Rng& rng);

/// Posterior mean (or one sample) of the online encoder for one trajectory.
std::vector<double> estimate_latent(const vae::VaeLearner& vae, const vae::Trajectory& traj, bool sample, Rng& rng);

/// Epsilon-greedy control until the episode ends. When `replay` is non-null
/// every transition is stored and the learner trains on its cadence.
/// `cond(step_index)` gives the conditioning vector at a step.
template <typename Cond>
void run_control(control::QLearner& q, control::ReplayBuffer* replay, EpisodeDriver& driver, Cond&& cond,
                 double epsilon, Rng& act_rng, Rng& learn_rng) {
  while (!driver.done()) {
    auto input = control::q_input(driver.observation(), cond(driver.step_index()));
    const int a = control::act_epsilon_greedy(q, input, epsilon, act_rng);
    const bool terminal = driver.act(a);
    if (replay) {
      auto next = control::q_input(driver.observation(), cond(driver.step_index()));
      control::observe(q, *replay, {std::move(input), a, static_cast<float>(driver.last_reward()), std::move(next), terminal},
                       learn_rng);
    }
  }
}

/// Greedy control without learning; `q` is only read.
template <typename Cond>
void run_greedy(const control::QLearner& q, EpisodeDriver& driver, Cond&& cond) {
  while (!driver.done()) {
    const auto input = control::q_input(driver.observation(), cond(driver.step_index()));
    driver.act(control::argmax_lowest(control::q_values(q, input)));
  }
}

/// Trains any method. Randomness is derived from config.seed only.
TrainedModel train(const TrainConfig& config);

/// SEPT and its probe-return ablations (TotalVar, MaxEnt).
TrainedModel train_probe_method(const TrainConfig& config);

/// One test episode on `instance`. The model is const: nothing is updated,
/// and for every method except MAML the model never receives a reward.
EpisodeResult test_episode(const TrainedModel& model, const env::InstanceSpec& instance, Rng& rng);

/// Checkpoint directory: config.json, one .bin per parameter set, state.json
/// (latent statistics, normalizers, training log) and manifest.json holding
/// the SHA-1 of every other file.
void save_model(const TrainedModel& model, const std::filesystem::path& dir);
/// Throws std::runtime_error on a missing file or a hash mismatch.
TrainedModel load_model(const std::filesystem::path& dir);

std::string sha1_hex(std::string_view bytes);
std::string sha1_file(const std::filesystem::path& path);

}  // namespace sept::algo
