#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "sept/core/random.hpp"

namespace sept::env {

enum class Domain { nav2d, acrobot, hiv, nav2d_switch };
enum class Split { train, validation, test };

std::string_view to_string(Domain d);
std::string_view to_string(Split s);
/// Accepts the names produced by to_string plus a few aliases ("2d", "nav").
/// Throws std::invalid_argument for unknown names.
Domain parse_domain(std::string_view name);
Split parse_split(std::string_view name);

struct DomainInfo {
  int state_dim;
  int action_count;
  int max_steps;      // episode cap; unsolved episodes count as this many steps
  int z_dim;          // dimension of the ground-truth hidden parameter
  bool has_solve;     // Nav2D/Acrobot end on a terminal reward, HIV runs a fixed horizon
  double solve_reward;
};

DomainInfo domain_info(Domain d);

/// One member of the family. `z` is fixed for the lifetime of the instance and
/// is only ever shown to the Oracle baseline.
struct InstanceSpec {
  Domain domain = Domain::nav2d;
  std::vector<double> z;
  Split split = Split::train;
};

struct EnvState {
  std::vector<double> observation;
  /// Internal simulator state (positions, angles, raw populations).
  std::vector<double> physical;
  int step_index = 0;
  bool done = false;
};

struct StepOutcome {
  EnvState next_state;
  double reward = 0.0;
  bool done = false;
  bool solved = false;
};

InstanceSpec sample_instance(Domain domain, Split split, Rng& rng);
EnvState reset(const InstanceSpec& instance, Rng& rng);
/// Pure transition. Throws std::invalid_argument for an invalid action or a
/// state whose episode has already ended.
StepOutcome step(const InstanceSpec& instance, const EnvState& state, int action);

/// Hidden parameter in effect at a given step (differs from `z` only for the
/// switching navigation variant).
std::vector<double> effective_z(const InstanceSpec& instance, int step_index);

}  // namespace sept::env
