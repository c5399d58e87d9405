#include "ovtmpc/constraints.hpp"

#include <cmath>

namespace ovt {

double lateral_error(const VehicleState& z, const ReferenceState& ref) {
  return -std::sin(ref.yaw) * (z.x - ref.x) + std::cos(ref.yaw) * (z.y - ref.y);
}

std::pair<HalfSpace, HalfSpace> road_halfspaces(const ReferenceState& ref,
                                                double r1, double r2) {
  const double nx = -std::sin(ref.yaw);  // left normal
  const double ny = std::cos(ref.yaw);
  const double proj = nx * ref.x + ny * ref.y;
  // e >= -r1  <=>  n . p >= n . ref - r1
  HalfSpace right{nx, ny, proj - r1};
  // e <= r2   <=>  -n . p >= -n . ref - r2
  HalfSpace left{-nx, -ny, -proj - r2};
  return {right, left};
}

std::optional<HalfSpace> obstacle_tangent(const ObstacleCircle& obs,
                                          const Waypoint& ref_point,
                                          const Vec2& fallback_normal) {
  const double rr = obs.inflated();
  const double dx = ref_point.x - obs.cx;
  const double dy = ref_point.y - obs.cy;
  const double dist = std::hypot(dx, dy);
  if (dist >= rr) return std::nullopt;

  Vec2 n;
  if (dist < 1e-12) {
    n = fallback_normal.normalized();
  } else {
    n = Vec2(dx / dist, dy / dist);
  }
  // tangent point at the radial projection of the reference onto the disk rim
  const double qx = obs.cx + rr * n.x();
  const double qy = obs.cy + rr * n.y();
  return HalfSpace{n.x(), n.y(), n.x() * qx + n.y() * qy};
}

std::vector<StepConstraints> build_horizon_constraints(
    std::span<const ReferenceState> refs,
    const std::optional<ObstacleCircle>& obstacle, const MpcConfig& cfg) {
  std::vector<StepConstraints> out(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    auto& sc = out[i];
    std::tie(sc.road_right, sc.road_left) =
        road_halfspaces(refs[i], cfg.road_r1, cfg.road_r2);
    if (obstacle) {
      const Vec2 left_normal(-std::sin(refs[i].yaw), std::cos(refs[i].yaw));
      sc.obstacle = obstacle_tangent(
          *obstacle, Waypoint{refs[i].x, refs[i].y}, left_normal);
    }
    sc.state_lo = cfg.state_lo;
    sc.state_hi = cfg.state_hi;
  }
  return out;
}

}  // namespace ovt
