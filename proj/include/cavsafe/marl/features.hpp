#pragma once

#include <Eigen/Core>
#include <vector>

#include "cavsafe/perturb.hpp"
#include "cavsafe/world.hpp"

namespace cavsafe::marl {

/// Fixed-length local state: ego block, then CAV slots, then UCV slots, nearest
/// first, absent slots zero with a presence flag of 0.
struct FeatureLayout {
  int max_lanes = 3;
  int cav_slots = 2;
  int ucv_slots = 3;
  double position_scale = 50.0;  // m
  double speed_scale = 10.0;     // m/s
  double accel_scale = 4.0;      // m/s^2
  double destination_scale = 100.0;

  static constexpr int kEgoBase = 4;  // dest dx, dest dy, v, alpha
  static constexpr int kCavWidth = 6; // present, dx, dy, dvx, dvy, alpha
  static constexpr int kUcvWidth = 5; // present, dx, dy, dvx, dvy

  int ego_size() const { return kEgoBase + max_lanes; }
  int size() const { return ego_size() + cav_slots * kCavWidth + ucv_slots * kUcvWidth; }
  int slot_count() const { return cav_slots + ucv_slots; }
  /// Index of the dx feature of slot `k` (CAV slots first).
  int slot_offset(int k) const;
};

/// How a travel-axis error on one observed vehicle moves the features: an error
/// pair (e_l, e_v) shifts (dx, dy) by e_l * dir / position_scale and (dvx, dvy) by
/// e_v * dir / speed_scale, dir being the target heading in the ego frame.
struct SlotDirection {
  int offset = -1;  // index of dx; -1 for an empty slot
  double cx = 0.0;
  double cy = 0.0;
};

struct EncodedState {
  Eigen::VectorXd x;
  std::vector<SlotDirection> slots;  // one per slot
};

EncodedState encode_local(const world::AgentState& agent, world::Vec2 destination,
                          const FeatureLayout& layout);

/// Features with per-slot errors applied (errors.size() == layout.slot_count()).
Eigen::VectorXd perturb_features(const EncodedState& s, const std::vector<perturb::ErrorPair>& errors,
                                 const FeatureLayout& layout);

}  // namespace cavsafe::marl
