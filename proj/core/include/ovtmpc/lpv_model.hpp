#pragma once

#include "ovtmpc/vehicle_model.hpp"

namespace ovt {

// Scheduling parameters that freeze the nonlinear model into a linear one.
// When taken from the operating point itself, the frozen model reproduces the
// nonlinear dynamics exactly (the embedding has no linearization residue).
struct SchedulingVector {
  double v_lon = 0.0;  // [m/s]
  double v_lat = 0.0;  // [m/s]
  double steer = 0.0;  // [rad]
  double yaw = 0.0;    // [rad]
};

struct LpvMatrices {
  Mat6 a;   // discrete: I + ts * A_c(p)
  Mat62 b;  // discrete: ts * B_c(p)
};

// Reads the scheduling entries out of a state/input pair. Throws
// DegenerateSpeed when v_lon < 1 m/s.
SchedulingVector scheduling_from(const VehicleState& z, const ControlInput& u);

// Continuous-time parameter-varying system matrices.
Mat6 lpv_a_continuous(const SchedulingVector& p, const VehicleParams& vp);
Mat62 lpv_b_continuous(const SchedulingVector& p, const VehicleParams& vp);

// Forward-Euler discretization of the frozen model.
LpvMatrices lpv_matrices(const SchedulingVector& p, const VehicleParams& vp,
                         double ts);

// One step of the frozen linear model: A(p) z + B(p) u.
VehicleState lpv_step(const VehicleState& z, const ControlInput& u,
                      const SchedulingVector& p, const VehicleParams& vp,
                      double ts);

}  // namespace ovt
