#include "cavsafe/world.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace cavsafe::world {

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

Path::Path(std::vector<Vec2> waypoints, std::string lane_id, std::optional<std::string> signal)
    : waypoints_(std::move(waypoints)), lane_id_(std::move(lane_id)), signal_(std::move(signal)) {
  if (waypoints_.size() < 2) throw std::invalid_argument("path needs at least two waypoints");
  cumulative_.reserve(waypoints_.size());
  cumulative_.push_back(0.0);
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    const double seg = (waypoints_[i] - waypoints_[i - 1]).norm();
    if (!(seg > 0.0)) throw std::invalid_argument("consecutive waypoints must be distinct");
    cumulative_.push_back(cumulative_.back() + seg);
  }
}

std::optional<PathCoord> Path::try_project(Vec2 p, double corridor) const {
  double best_dist = std::numeric_limits<double>::infinity();
  PathCoord best;
  for (std::size_t i = 0; i + 1 < waypoints_.size(); ++i) {
    const Vec2 a = waypoints_[i];
    const Vec2 ab = waypoints_[i + 1] - a;
    const double len = cumulative_[i + 1] - cumulative_[i];
    const double t = std::clamp((p - a).dot(ab) / (len * len), 0.0, 1.0);
    const Vec2 q = a + ab * t;
    const double dist = (p - q).norm();
    if (dist < best_dist) {
      best_dist = dist;
      const Vec2 dir = ab * (1.0 / len);
      best.s = cumulative_[i] + t * len;
      best.d = dir.cross(p - q) >= 0.0 ? dist : -dist;
    }
  }
  if (best_dist > corridor) return std::nullopt;
  return best;
}

std::size_t Path::segment_at(double s) const {
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t idx = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  return std::min(idx, waypoints_.size() - 2);
}

Vec2 Path::point_at(double s) const {
  s = std::clamp(s, 0.0, length());
  const std::size_t i = segment_at(s);
  const double len = cumulative_[i + 1] - cumulative_[i];
  const double t = (s - cumulative_[i]) / len;
  return waypoints_[i] + (waypoints_[i + 1] - waypoints_[i]) * t;
}

double Path::heading_at(double s) const {
  const std::size_t i = segment_at(std::clamp(s, 0.0, length()));
  const Vec2 d = waypoints_[i + 1] - waypoints_[i];
  return std::atan2(d.y, d.x);
}

std::optional<std::pair<double, double>> Path::intersect_line(Vec2 origin, Vec2 dir) const {
  std::optional<std::pair<double, double>> best;
  for (std::size_t i = 0; i + 1 < waypoints_.size(); ++i) {
    const Vec2 a = waypoints_[i];
    const Vec2 ab = waypoints_[i + 1] - a;
    const double denom = dir.cross(ab);
    if (std::abs(denom) < 1e-12) continue;
    const Vec2 ao = a - origin;
    const double t = ao.cross(ab) / denom;   // along dir
    const double u = ao.cross(dir) / denom;  // along segment
    if (u < 0.0 || u > 1.0) continue;
    if (!best || std::abs(t) < std::abs(best->second)) {
      best = std::make_pair(cumulative_[i] + u * (cumulative_[i + 1] - cumulative_[i]), t);
    }
  }
  return best;
}

PathCoord project_to_path(const VehicleState& state, const Path& path) {
  const auto pc = path.try_project(state.position());
  if (!pc) throw OutOfCorridor("vehicle " + std::to_string(state.id) + " is outside the " +
                               std::to_string(kCorridorRadius) + " m corridor of lane " +
                               path.lane_id());
  return *pc;
}

const Path& RoadMap::lane(const LaneRef& ref) const {
  return roads.at(static_cast<std::size_t>(ref.road)).lanes.at(static_cast<std::size_t>(ref.lane));
}

const Path* RoadMap::left_of(const LaneRef& ref) const {
  const auto& lanes = roads.at(static_cast<std::size_t>(ref.road)).lanes;
  const std::size_t next = static_cast<std::size_t>(ref.lane) + 1;
  return next < lanes.size() ? &lanes[next] : nullptr;
}

const Path* RoadMap::right_of(const LaneRef& ref) const {
  if (ref.lane <= 0) return nullptr;
  return &roads.at(static_cast<std::size_t>(ref.road)).lanes[static_cast<std::size_t>(ref.lane) - 1];
}

int RoadMap::lane_count(int road) const {
  return static_cast<int>(roads.at(static_cast<std::size_t>(road)).lanes.size());
}

std::vector<Vec2> footprint(const VehicleState& s) {
  const Vec2 f = heading_unit(s.psi) * (s.length / 2.0);
  const Vec2 l = Vec2{-std::sin(s.psi), std::cos(s.psi)} * (s.width / 2.0);
  const Vec2 c = s.position();
  return {c + f - l, c + f + l, c - f + l, c - f - l};
}

bool footprints_overlap(const VehicleState& a, const VehicleState& b) {
  const auto pa = footprint(a);
  const auto pb = footprint(b);
  const Vec2 axes[4] = {heading_unit(a.psi), heading_unit(a.psi + std::numbers::pi / 2),
                        heading_unit(b.psi), heading_unit(b.psi + std::numbers::pi / 2)};
  for (const Vec2& axis : axes) {
    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    double bmin = amin, bmax = -amin;
    for (const Vec2& p : pa) {
      const double k = p.dot(axis);
      amin = std::min(amin, k);
      amax = std::max(amax, k);
    }
    for (const Vec2& p : pb) {
      const double k = p.dot(axis);
      bmin = std::min(bmin, k);
      bmax = std::max(bmax, k);
    }
    if (amax <= bmin || bmax <= amin) return false;
  }
  return true;
}

IdPair make_pair_key(int a, int b) { return a < b ? IdPair{a, b} : IdPair{b, a}; }

std::set<IdPair> detect_collisions(std::span<const VehicleState> states) {
  std::set<IdPair> out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      const Vec2 delta = states[i].position() - states[j].position();
      const double reach = (std::hypot(states[i].length, states[i].width) +
                            std::hypot(states[j].length, states[j].width)) / 2.0;
      if (delta.norm() > reach) continue;
      if (footprints_overlap(states[i], states[j]))
        out.insert(make_pair_key(states[i].id, states[j].id));
    }
  }
  return out;
}

Vec2 Observation::world_position() const {
  const double c = std::cos(psi), s = std::sin(psi);
  return {l.x * c - l.y * s, l.x * s + l.y * c};
}

std::vector<int> World::agent_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < vehicles.size(); ++i)
    if (vehicles[i].connected) out.push_back(static_cast<int>(i));
  return out;
}

int World::index_of(int id) const {
  for (std::size_t i = 0; i < vehicles.size(); ++i)
    if (vehicles[i].id == id) return static_cast<int>(i);
  throw std::out_of_range("unknown vehicle id " + std::to_string(id));
}

Observation observe(const VehicleState& s, const VehicleInfo& info) {
  Observation o;
  o.target_id = s.id;
  const double c = std::cos(s.psi), sn = std::sin(s.psi);
  o.l = {s.x * c + s.y * sn, -s.x * sn + s.y * c};
  o.v = {s.v, 0.0};
  o.psi = s.psi;
  o.length = s.length;
  o.width = s.width;
  o.connected = s.connected;
  if (s.connected) {
    o.alpha = info.last_accel;
    o.lane_detect = info.lane.lane;
  }
  return o;
}

Observation apply_error(Observation o, const perturb::ErrorPair& e) {
  o.l.x += e.e_l;
  o.v.x += e.e_v;
  return o;
}

JointState build_joint_state(const World& world, double comm_range,
                             const perturb::PerturbationSchedule& schedule) {
  JointState js;
  js.t = world.t;
  for (int ai : world.agent_indices()) {
    const auto& ego = world.vehicles[static_cast<std::size_t>(ai)];
    const auto& ego_info = world.info[static_cast<std::size_t>(ai)];
    AgentState as;
    as.agent_id = ego.id;
    as.self_state = ego;
    as.self = observe(ego, ego_info);
    as.lane = ego_info.lane;

    std::vector<std::pair<double, Observation>> cavs, ucvs;
    for (std::size_t j = 0; j < world.vehicles.size(); ++j) {
      if (static_cast<int>(j) == ai) continue;
      const auto& other = world.vehicles[j];
      if ((other.position() - ego.position()).norm() > comm_range) continue;
      const perturb::ErrorPair e = schedule.error(world.t, ego.id, other.id);
      Observation o = observe(other, world.info[j]);
      if (!e.is_zero()) {
        o = apply_error(o, e);
        js.applied.push_back({ego.id, other.id, e, schedule.violates_bound(e)});
      }
      const double dist = (o.world_position() - ego.position()).norm();
      (other.connected ? cavs : ucvs).emplace_back(dist, o);
    }
    const auto nearest_first = [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second.target_id < b.second.target_id;
    };
    std::sort(cavs.begin(), cavs.end(), nearest_first);
    std::sort(ucvs.begin(), ucvs.end(), nearest_first);
    for (auto& [d, o] : cavs) as.cavs.push_back(o);
    for (auto& [d, o] : ucvs) as.ucvs.push_back(o);
    js.agents.push_back(std::move(as));
  }
  return js;
}

}  // namespace cavsafe::world
