#include "sept/env/env_family.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sept/env/acrobot.hpp"
#include "sept/env/hiv.hpp"
#include "sept/env/nav2d.hpp"

namespace sept::env {

namespace {

constexpr std::array<double, 4> kAcrobotTrainDeltas{-0.3, -0.1, 0.1, 0.3};
constexpr std::array<double, 4> kAcrobotTestDeltas{-0.35, -0.2, 0.2, 0.35};

std::vector<double> acrobot_observation(const acrobot::State& s) {
  return {std::cos(s[0]), std::sin(s[0]), std::cos(s[1]), std::sin(s[1]), s[2], s[3]};
}

std::vector<double> hiv_observation(const hiv::Populations& p) {
  std::vector<double> obs(6);
  for (int i = 0; i < 6; ++i) obs[i] = std::log10(p[i]);
  return obs;
}

template <std::size_t N>
double pick(const std::array<double, N>& values, Rng& rng) {
  return values[static_cast<std::size_t>(uniform_index(rng, static_cast<int>(N)))];
}

int nav_flag(const InstanceSpec& inst, int step_index) {
  const int z = static_cast<int>(inst.z.at(0));
  if (inst.domain == Domain::nav2d_switch && step_index >= nav2d::kSwitchStep) return 1 - z;
  return z;
}

}  // namespace

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::nav2d: return "nav2d";
    case Domain::acrobot: return "acrobot";
    case Domain::hiv: return "hiv";
    case Domain::nav2d_switch: return "nav2d_switch";
  }
  return "unknown";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "unknown";
}

Domain parse_domain(std::string_view name) {
  if (name == "nav2d" || name == "2d" || name == "nav") return Domain::nav2d;
  if (name == "acrobot") return Domain::acrobot;
  if (name == "hiv") return Domain::hiv;
  if (name == "nav2d_switch" || name == "2d_switch") return Domain::nav2d_switch;
  throw std::invalid_argument("unknown domain '" + std::string(name) + "'");
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

DomainInfo domain_info(Domain d) {
  switch (d) {
    case Domain::nav2d:
    case Domain::nav2d_switch: return {2, 4, nav2d::kMaxSteps, 1, true, nav2d::kGoalReward};
    case Domain::acrobot: return {6, 3, acrobot::kMaxSteps, 4, true, acrobot::kSolveReward};
    case Domain::hiv: return {6, 4, hiv::kHorizon, hiv::kHiddenCount, false, 0.0};
  }
  throw std::invalid_argument("domain_info: unknown domain");
}

InstanceSpec sample_instance(Domain domain, Split split, Rng& rng) {
  InstanceSpec spec;
  spec.domain = domain;
  spec.split = split;
  const bool held_out = split == Split::test;
  switch (domain) {
    case Domain::nav2d:
    case Domain::nav2d_switch: spec.z = {static_cast<double>(uniform_index(rng, 2))}; break;
    case Domain::acrobot: {
      const double delta = held_out ? pick(kAcrobotTestDeltas, rng) : pick(kAcrobotTrainDeltas, rng);
      spec.z.assign(4, 1.0 + delta);
      break;
    }
    case Domain::hiv:
      spec.z.resize(hiv::kHiddenCount);
      for (auto& f : spec.z) f = held_out ? pick(hiv::kTestFactors, rng) : pick(hiv::kTrainFactors, rng);
      break;
    default: throw std::invalid_argument("sample_instance: unknown domain");
  }
  return spec;
}

std::vector<double> effective_z(const InstanceSpec& instance, int step_index) {
  if (instance.domain == Domain::nav2d_switch) return {static_cast<double>(nav_flag(instance, step_index))};
  return instance.z;
}

EnvState reset(const InstanceSpec& instance, Rng& rng) {
  EnvState s;
  switch (instance.domain) {
    case Domain::nav2d:
    case Domain::nav2d_switch:
      s.physical = {nav2d::kStart.x, nav2d::kStart.y};
      s.observation = s.physical;
      break;
    case Domain::acrobot: {
      // Hanging rest with every angle and velocity perturbed by U(-0.1, 0.1).
      acrobot::State a;
      for (auto& v : a) v = uniform(rng, -0.1, 0.1);
      s.physical.assign(a.begin(), a.end());
      s.observation = acrobot_observation(a);
      break;
    }
    case Domain::hiv:
      s.physical.assign(hiv::kUnhealthyState.begin(), hiv::kUnhealthyState.end());
      s.observation = hiv_observation(hiv::kUnhealthyState);
      break;
  }
  return s;
}

StepOutcome step(const InstanceSpec& instance, const EnvState& state, int action) {
  const DomainInfo info = domain_info(instance.domain);
  if (action < 0 || action >= info.action_count)
    throw std::invalid_argument("step: invalid action " + std::to_string(action));
  if (state.done || state.step_index >= info.max_steps)
    throw std::invalid_argument("step: episode already finished");

  StepOutcome out;
  out.next_state.step_index = state.step_index + 1;
  switch (instance.domain) {
    case Domain::nav2d:
    case Domain::nav2d_switch: {
      const int z = nav_flag(instance, state.step_index);
      const auto r = nav2d::move({state.physical[0], state.physical[1]}, action, z);
      out.next_state.physical = {r.position.x, r.position.y};
      out.next_state.observation = out.next_state.physical;
      out.solved = r.reached_goal;
      out.reward = r.reached_goal ? nav2d::kGoalReward : nav2d::kStepReward;
      break;
    }
    case Domain::acrobot: {
      const auto p = acrobot::params_from(instance.z);
      acrobot::State a{state.physical[0], state.physical[1], state.physical[2], state.physical[3]};
      a = acrobot::advance(a, acrobot::torque_for(action), p);
      out.next_state.physical.assign(a.begin(), a.end());
      out.next_state.observation = acrobot_observation(a);
      out.solved = acrobot::tip_height(a, p) > acrobot::kHeightThreshold;
      out.reward = out.solved ? acrobot::kSolveReward : acrobot::kStepReward;
      break;
    }
    case Domain::hiv: {
      const auto p = hiv::params_from(instance.z);
      hiv::Populations y;
      for (int i = 0; i < 6; ++i) y[i] = state.physical[i];
      const auto drugs = hiv::drugs_for(action);
      const auto r = hiv::integrate_period(y, drugs, p);
      out.next_state.physical.assign(r.populations.begin(), r.populations.end());
      out.next_state.observation = hiv_observation(r.populations);
      out.reward = hiv::reward(r.populations, drugs);
      break;
    }
  }
  out.done = out.solved || out.next_state.step_index >= info.max_steps;
  out.next_state.done = out.done;
  return out;
}

}  // namespace sept::env
