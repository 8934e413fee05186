#pragma once

#include <vector>

#include "cavsafe/world.hpp"

namespace cavsafe::harness {

/// mu^v, mu^l, mu^s; the same for every (i, j) pair.
struct RewardWeights {
  double speed = 1.0;
  double distance = 1.0;
  double safety = 1.0;

  static RewardWeights uniform(int agent_count);
};

/// r_i = sum_j mu^v |v_j| - mu^l |l_j - d_j| + mu^s r^s_j over agents j, from ground
/// truth. `destinations` is indexed by vehicle, `safety_terms` by agent (in
/// World::agent_indices order). Every agent receives the same value.
std::vector<double> reward(const world::World& world, const std::vector<world::Vec2>& destinations,
                           const std::vector<double>& safety_terms, const RewardWeights& weights);

}  // namespace cavsafe::harness
