#pragma once

#include <Eigen/Dense>

#include "ovtmpc/errors.hpp"

namespace ovt {

using Vec2 = Eigen::Vector2d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat62 = Eigen::Matrix<double, 6, 2>;

// Below this longitudinal speed the slip-angle kinematics degenerate.
inline constexpr double kMinLonSpeed = 1.0;  // [m/s]

// State of the dynamic single-track (bicycle) model. Position and yaw are in
// the ground frame, speeds in the body frame.
struct VehicleState {
  double x = 0.0;         // CoG position [m]
  double y = 0.0;         // CoG position [m]
  double v_lon = 0.0;     // longitudinal speed [m/s]
  double v_lat = 0.0;     // lateral speed [m/s]
  double yaw = 0.0;       // heading [rad], not wrapped
  double yaw_rate = 0.0;  // [rad/s]

  Vec6 vec() const {
    Vec6 z;
    z << x, y, v_lon, v_lat, yaw, yaw_rate;
    return z;
  }
  static VehicleState from_vec(const Vec6& z) {
    return {z(0), z(1), z(2), z(3), z(4), z(5)};
  }
};

struct ControlInput {
  double steer = 0.0;  // front steering angle [rad]
  double accel = 0.0;  // longitudinal acceleration [m/s^2]

  Vec2 vec() const { return {steer, accel}; }
  static ControlInput from_vec(const Vec2& u) { return {u(0), u(1)}; }
};

// Chassis and linear-tire parameters. Derived stiffness ratios are exposed as
// accessors so they always reflect the current base fields.
struct VehicleParams {
  double c_alpha_f = 156000.0;  // front cornering stiffness [N/rad]
  double c_alpha_r = 193000.0;  // rear cornering stiffness [N/rad]
  double l_f = 1.04;            // CoG to front axle [m]
  double l_r = 1.4;             // CoG to rear axle [m]
  double i_z = 2937.0;          // yaw inertia [kg m^2]
  double mass = 1919.0;         // [kg]

  double beta_f() const { return 2.0 * c_alpha_f / mass; }
  double beta_r() const { return 2.0 * c_alpha_r / mass; }
  double gamma_f() const { return 2.0 * l_f * c_alpha_f / i_z; }
  double gamma_r() const { return 2.0 * l_r * c_alpha_r / i_z; }
};

struct TireResponse {
  double alpha_f = 0.0;  // front slip angle [rad]
  double alpha_r = 0.0;  // rear slip angle [rad]
  double f_yf = 0.0;     // front lateral force [N]
  double f_yr = 0.0;     // rear lateral force [N]
};

// Discrete-step Jacobians of the forward-Euler map.
struct EulerJacobians {
  Mat6 a;   // d z_next / d z
  Mat62 b;  // d z_next / d u
};

// Slip angles and linear lateral tire forces. Throws DegenerateSpeed when
// v_lon < 1 m/s.
TireResponse tire_response(const VehicleState& z, const ControlInput& u,
                           const VehicleParams& p);

// Continuous-time state derivative (Xdot, Ydot, v_lon_dot, v_lat_dot, yaw_dot,
// yaw_rate_dot).
Vec6 dynamics_continuous(const VehicleState& z, const ControlInput& u,
                         const VehicleParams& p);

// One forward-Euler step: z + ts * f(z, u).
VehicleState step_euler(const VehicleState& z, const ControlInput& u,
                        const VehicleParams& p, double ts);

// Analytic Jacobians of step_euler at (z, u).
EulerJacobians jacobians_euler(const VehicleState& z, const ControlInput& u,
                               const VehicleParams& p, double ts);

}  // namespace ovt
