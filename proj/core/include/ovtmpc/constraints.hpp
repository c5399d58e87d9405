#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ovtmpc/mpc_config.hpp"
#include "ovtmpc/reference.hpp"

namespace ovt {

// Closed half-plane a*X + b*Y >= c with a unit normal (a^2 + b^2 = 1).
struct HalfSpace {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double signed_distance(double x, double y) const { return a * x + b * y - c; }
  bool contains(double x, double y, double tol = 0.0) const {
    return signed_distance(x, y) >= -tol;
  }
};

struct ObstacleCircle {
  double cx = 0.0;      // center [m]
  double cy = 0.0;      // center [m]
  double radius = 1.0;  // [m]
  double margin = 0.0;  // safety inflation [m]

  double inflated() const { return radius + margin; }
};

// Everything the condenser needs to constrain one predicted step. Road and
// obstacle rows are treated as soft (slack + L1 penalty); the rest is hard.
struct StepConstraints {
  HalfSpace road_right;  // keeps lateral error >= -r1
  HalfSpace road_left;   // keeps lateral error <= r2
  std::optional<HalfSpace> obstacle;
  Vec6 state_lo;
  Vec6 state_hi;
};

// Signed lateral offset of the vehicle from the reference point, positive
// toward the road's left side.
double lateral_error(const VehicleState& z, const ReferenceState& ref);

// Road corridor edges as half-planes tangent to the band at the reference
// point: first keeps e >= -r1 (right edge), second keeps e <= r2 (left edge).
std::pair<HalfSpace, HalfSpace> road_halfspaces(const ReferenceState& ref,
                                                double r1, double r2);

// Half-plane tangent to the inflated obstacle disk at the radial projection
// of the reference point. Returns nullopt when the reference lies outside the
// inflated disk. When the reference coincides with the center, the normal
// falls back to the given direction (the road's left normal).
std::optional<HalfSpace> obstacle_tangent(const ObstacleCircle& obs,
                                          const Waypoint& ref_point,
                                          const Vec2& fallback_normal);

// Per-step constraint data over a reference window of N+1 points. Entry i
// belongs to predicted step i; consumers apply entries 1..N only.
std::vector<StepConstraints> build_horizon_constraints(
    std::span<const ReferenceState> refs,
    const std::optional<ObstacleCircle>& obstacle, const MpcConfig& cfg);

}  // namespace ovt
