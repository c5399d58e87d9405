#include "ovtmpc/vehicle_model.hpp"

#include <cmath>

namespace ovt {

TireResponse tire_response(const VehicleState& z, const ControlInput& u,
                           const VehicleParams& p) {
  if (z.v_lon < kMinLonSpeed) throw DegenerateSpeed(z.v_lon);
  TireResponse t;
  t.alpha_f = u.steer - (z.v_lat + p.l_f * z.yaw_rate) / z.v_lon;
  t.alpha_r = (p.l_r * z.yaw_rate - z.v_lat) / z.v_lon;
  t.f_yf = p.c_alpha_f * t.alpha_f;
  t.f_yr = p.c_alpha_r * t.alpha_r;
  return t;
}

Vec6 dynamics_continuous(const VehicleState& z, const ControlInput& u,
                         const VehicleParams& p) {
  const TireResponse t = tire_response(z, u, p);
  const double c = std::cos(z.yaw);
  const double s = std::sin(z.yaw);
  Vec6 f;
  f(0) = z.v_lon * c - z.v_lat * s;
  f(1) = z.v_lon * s + z.v_lat * c;
  f(2) = z.yaw_rate * z.v_lat + u.accel;
  f(3) = -z.yaw_rate * z.v_lon +
         (2.0 / p.mass) * (t.f_yf * std::cos(u.steer) + t.f_yr);
  f(4) = z.yaw_rate;
  f(5) = (2.0 / p.i_z) * (p.l_f * t.f_yf - p.l_r * t.f_yr);
  return f;
}

VehicleState step_euler(const VehicleState& z, const ControlInput& u,
                        const VehicleParams& p, double ts) {
  return VehicleState::from_vec(z.vec() + ts * dynamics_continuous(z, u, p));
}

EulerJacobians jacobians_euler(const VehicleState& z, const ControlInput& u,
                               const VehicleParams& p, double ts) {
  if (z.v_lon < kMinLonSpeed) throw DegenerateSpeed(z.v_lon);
  const double v = z.v_lon;
  const double nu = z.v_lat;
  const double w = z.yaw_rate;
  const double cd = std::cos(u.steer);
  const double sd = std::sin(u.steer);
  const double cp = std::cos(z.yaw);
  const double sp = std::sin(z.yaw);
  const double alpha_f = u.steer - (nu + p.l_f * w) / v;

  Mat6 fa = Mat6::Zero();
  fa(0, 2) = cp;
  fa(0, 3) = -sp;
  fa(0, 4) = -v * sp - nu * cp;
  fa(1, 2) = sp;
  fa(1, 3) = cp;
  fa(1, 4) = v * cp - nu * sp;
  fa(2, 3) = w;
  fa(2, 5) = nu;
  // lateral dynamics: forces enter through the slip angles, which carry 1/v
  fa(3, 2) = -w + (2.0 / p.mass) *
                      (p.c_alpha_f * cd * (nu + p.l_f * w) -
                       p.c_alpha_r * (p.l_r * w - nu)) /
                      (v * v);
  fa(3, 3) = -(p.beta_f() * cd + p.beta_r()) / v;
  fa(3, 5) = -v - (p.beta_f() * cd * p.l_f - p.beta_r() * p.l_r) / v;
  fa(4, 5) = 1.0;
  fa(5, 2) = (2.0 / p.i_z) *
             (p.l_f * p.c_alpha_f * (nu + p.l_f * w) +
              p.l_r * p.c_alpha_r * (p.l_r * w - nu)) /
             (v * v);
  fa(5, 3) = (p.gamma_r() - p.gamma_f()) / v;
  fa(5, 5) = -(p.gamma_f() * p.l_f + p.gamma_r() * p.l_r) / v;

  Mat62 fb = Mat62::Zero();
  fb(2, 1) = 1.0;
  fb(3, 0) = p.beta_f() * (cd - sd * alpha_f);
  fb(5, 0) = p.gamma_f();

  EulerJacobians j;
  j.a = Mat6::Identity() + ts * fa;
  j.b = ts * fb;
  return j;
}

}  // namespace ovt
