#include "cavsafe/marl/features.hpp"

#include <cmath>
#include <stdexcept>

namespace cavsafe::marl {

namespace {

world::Vec2 rotate(world::Vec2 p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

world::Vec2 world_velocity(const world::Observation& o) { return rotate(o.v, o.psi); }

}  // namespace

int FeatureLayout::slot_offset(int k) const {
  if (k < cav_slots) return ego_size() + k * kCavWidth + 1;
  return ego_size() + cav_slots * kCavWidth + (k - cav_slots) * kUcvWidth + 1;
}

EncodedState encode_local(const world::AgentState& agent, world::Vec2 destination,
                          const FeatureLayout& layout) {
  EncodedState out;
  out.x = Eigen::VectorXd::Zero(layout.size());
  out.slots.assign(static_cast<std::size_t>(layout.slot_count()), SlotDirection{});

  const world::VehicleState& ego = agent.self_state;
  const double psi = ego.psi;
  const world::Vec2 ego_pos = ego.position();
  const world::Vec2 ego_vel = world::heading_unit(psi) * ego.v;

  const world::Vec2 to_dest = rotate(destination - ego_pos, -psi);
  out.x[0] = to_dest.x / layout.destination_scale;
  out.x[1] = to_dest.y / layout.destination_scale;
  out.x[2] = ego.v / layout.speed_scale;
  out.x[3] = agent.self.alpha.value_or(0.0) / layout.accel_scale;
  if (agent.lane.lane >= 0 && agent.lane.lane < layout.max_lanes)
    out.x[FeatureLayout::kEgoBase + agent.lane.lane] = 1.0;

  const auto fill = [&](const world::Observation& o, int slot, bool with_alpha) {
    const int off = layout.slot_offset(slot);
    const world::Vec2 rel = rotate(o.world_position() - ego_pos, -psi);
    const world::Vec2 dv = rotate(world_velocity(o) - ego_vel, -psi);
    out.x[off - 1] = 1.0;
    out.x[off] = rel.x / layout.position_scale;
    out.x[off + 1] = rel.y / layout.position_scale;
    out.x[off + 2] = dv.x / layout.speed_scale;
    out.x[off + 3] = dv.y / layout.speed_scale;
    if (with_alpha) out.x[off + 4] = o.alpha.value_or(0.0) / layout.accel_scale;
    const world::Vec2 dir = world::heading_unit(o.psi - psi);
    out.slots[static_cast<std::size_t>(slot)] = {off, dir.x, dir.y};
  };
  for (int k = 0; k < layout.cav_slots && k < static_cast<int>(agent.cavs.size()); ++k)
    fill(agent.cavs[static_cast<std::size_t>(k)], k, true);
  for (int k = 0; k < layout.ucv_slots && k < static_cast<int>(agent.ucvs.size()); ++k)
    fill(agent.ucvs[static_cast<std::size_t>(k)], layout.cav_slots + k, false);
  return out;
}

Eigen::VectorXd perturb_features(const EncodedState& s, const std::vector<perturb::ErrorPair>& errors,
                                 const FeatureLayout& layout) {
  if (errors.size() != s.slots.size()) throw std::invalid_argument("one error per slot required");
  Eigen::VectorXd x = s.x;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    const SlotDirection& d = s.slots[k];
    if (d.offset < 0) continue;
    const double dl = errors[k].e_l / layout.position_scale;
    const double dv = errors[k].e_v / layout.speed_scale;
    x[d.offset] += dl * d.cx;
    x[d.offset + 1] += dl * d.cy;
    x[d.offset + 2] += dv * d.cx;
    x[d.offset + 3] += dv * d.cy;
  }
  return x;
}

}  // namespace cavsafe::marl
