#include "sept/sept/episode.hpp"

namespace sept::algo {

EpisodeDriver::EpisodeDriver(const env::InstanceSpec& instance, Rng& env_rng)
    : instance_(instance), state_(env::reset(instance, env_rng)), cap_(env::domain_info(instance.domain).max_steps) {
  result_.steps_to_solve = cap_;
}

bool EpisodeDriver::act(int action) {
  auto out = env::step(instance_, state_, action);
  state_ = std::move(out.next_state);
  last_reward_ = out.reward;
  result_.cumulative_reward += out.reward;
  result_.reward_trace.push_back(out.reward);
  if (out.solved && !result_.solved) {
    result_.solved = true;
    result_.steps_to_solve = state_.step_index;
  }
  return out.solved;
}

}  // namespace sept::algo
