#pragma once

#include <numbers>

#include "ovtmpc/vehicle_model.hpp"

namespace ovt {

// Horizon, weights, and operating envelope shared by both controllers.
struct MpcConfig {
  int horizon = 8;   // prediction steps N
  double ts = 0.05;  // [s]

  Vec6 q_diag = (Vec6() << 10.0, 10.0, 1.0, 1.0, 1.0, 1.0).finished();
  Vec6 p_diag = (Vec6() << 10.0, 10.0, 1.0, 1.0, 1.0, 1.0).finished();
  Vec2 r_diag = Vec2(0.1, 0.1);

  // state box, ordered (x, y, v_lon, v_lat, yaw, yaw_rate)
  Vec6 state_lo = (Vec6() << -1.0, -1.0, 1.0, -10.0, -std::numbers::pi / 2.0,
                   -std::numbers::pi / 0.2)
                      .finished();
  Vec6 state_hi = (Vec6() << 150.0, 120.0, 100.0, 10.0, std::numbers::pi / 2.0,
                   std::numbers::pi / 0.2)
                      .finished();

  double steer_max = 34.0 * std::numbers::pi / 180.0;       // [rad]
  double accel_min = -6.0;                                  // [m/s^2]
  double accel_max = 2.0;                                   // [m/s^2]
  double steer_rate_max = 40.0 * std::numbers::pi / 180.0;  // per step [rad]
  double accel_rate_max = 1.5;                              // per step [m/s^2]

  double road_r1 = 1.0;  // corridor width right of the reference [m]
  double road_r2 = 4.0;  // corridor width left of the reference [m]

  double soft_penalty = 1e4;  // L1 weight on road/obstacle slack

  double qp_tol = 1e-4;
  int qp_max_iter = 4000;

  // yaw-rate box is ts-coupled: |yaw_rate| <= pi / (4 ts)
  static MpcConfig with_ts(double ts_new) {
    MpcConfig c;
    c.ts = ts_new;
    c.state_lo(5) = -std::numbers::pi / (4.0 * ts_new);
    c.state_hi(5) = std::numbers::pi / (4.0 * ts_new);
    return c;
  }
};

}  // namespace ovt
