#include "ovtmpc/lpv_model.hpp"

#include <cmath>

namespace ovt {

SchedulingVector scheduling_from(const VehicleState& z, const ControlInput& u) {
  if (z.v_lon < kMinLonSpeed) throw DegenerateSpeed(z.v_lon);
  return {z.v_lon, z.v_lat, u.steer, z.yaw};
}

Mat6 lpv_a_continuous(const SchedulingVector& p, const VehicleParams& vp) {
  if (p.v_lon < kMinLonSpeed) throw DegenerateSpeed(p.v_lon);
  const double v = p.v_lon;
  const double cd = std::cos(p.steer);
  const double cp = std::cos(p.yaw);
  const double sp = std::sin(p.yaw);

  Mat6 a = Mat6::Zero();
  a(0, 2) = cp;
  a(0, 3) = -sp;
  a(1, 2) = sp;
  a(1, 3) = cp;
  a(2, 5) = p.v_lat;
  a(3, 3) = -(vp.beta_f() * cd + vp.beta_r()) / v;
  a(3, 5) = -v - (vp.beta_f() * cd * vp.l_f - vp.beta_r() * vp.l_r) / v;
  a(4, 5) = 1.0;
  a(5, 3) = (vp.gamma_r() - vp.gamma_f()) / v;
  a(5, 5) = -(vp.gamma_f() * vp.l_f + vp.gamma_r() * vp.l_r) / v;
  return a;
}

Mat62 lpv_b_continuous(const SchedulingVector& p, const VehicleParams& vp) {
  Mat62 b = Mat62::Zero();
  b(2, 1) = 1.0;
  b(3, 0) = vp.beta_f() * std::cos(p.steer);
  b(5, 0) = vp.gamma_f();
  return b;
}

LpvMatrices lpv_matrices(const SchedulingVector& p, const VehicleParams& vp,
                         double ts) {
  LpvMatrices m;
  m.a = Mat6::Identity() + ts * lpv_a_continuous(p, vp);
  m.b = ts * lpv_b_continuous(p, vp);
  return m;
}

VehicleState lpv_step(const VehicleState& z, const ControlInput& u,
                      const SchedulingVector& p, const VehicleParams& vp,
                      double ts) {
  const LpvMatrices m = lpv_matrices(p, vp, ts);
  return VehicleState::from_vec(m.a * z.vec() + m.b * u.vec());
}

}  // namespace ovt
