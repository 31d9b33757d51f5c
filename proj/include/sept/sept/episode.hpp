#pragma once

// Episode plumbing shared by every method.
//
// EpisodeDriver owns the environment state of one episode. Policies see only
// observations through it; rewards are accumulated into the EpisodeResult and
// are exposed through last_reward() solely for learners that train on them.

#include <vector>

#include "sept/core/random.hpp"
#include "sept/env/env_family.hpp"

namespace sept::algo {

struct EpisodeResult {
  double cumulative_reward = 0.0;
  int steps_to_solve = 0;  // cap when unsolved
  bool solved = false;
  std::vector<double> reward_trace;  // one entry per executed step
};

class EpisodeDriver {
 public:
  EpisodeDriver(const env::InstanceSpec& instance, Rng& env_rng);

  const env::InstanceSpec& instance() const { return instance_; }
  const std::vector<double>& observation() const { return state_.observation; }
  int step_index() const { return state_.step_index; }
  int cap() const { return cap_; }
  bool done() const { return state_.done; }
  bool solved() const { return result_.solved; }

  /// Advances one step. Returns true when the step reached a terminal state
  /// (goal or swing-up), which is what bootstrapping cares about; hitting the
  /// cap ends the episode but is not terminal.
  bool act(int action);

  double last_reward() const { return last_reward_; }
  const EpisodeResult& result() const { return result_; }

 private:
  env::InstanceSpec instance_;
  env::EnvState state_;
  int cap_;
  double last_reward_ = 0.0;
  EpisodeResult result_;
};

}  // namespace sept::algo
