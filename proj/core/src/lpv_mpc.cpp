#include "ovtmpc/lpv_mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ovtmpc/reference.hpp"

namespace ovt {

ControlInput clamp_input(const ControlInput& u, const ControlInput& u_prev,
                         const MpcConfig& cfg) {
  ControlInput out;
  const double s_lo = std::max(-cfg.steer_max, u_prev.steer - cfg.steer_rate_max);
  const double s_hi = std::min(cfg.steer_max, u_prev.steer + cfg.steer_rate_max);
  const double a_lo = std::max(cfg.accel_min, u_prev.accel - cfg.accel_rate_max);
  const double a_hi = std::min(cfg.accel_max, u_prev.accel + cfg.accel_rate_max);
  out.steer = std::clamp(u.steer, s_lo, s_hi);
  out.accel = std::clamp(u.accel, a_lo, a_hi);
  return out;
}

namespace {

// brake-safe fallback: hold the steer, ramp acceleration toward full braking
// within the rate limit
ControlInput fallback_input(const ControlInput& u_prev, const MpcConfig& cfg) {
  ControlInput u = u_prev;
  u.accel = std::max(cfg.accel_min, u_prev.accel - cfg.accel_rate_max);
  return u;
}

// shift references' yaw to the 2*pi branch nearest the vehicle's yaw so the
// tracking error never crosses a wrap seam
std::vector<ReferenceState> unwrap_refs(std::span<const ReferenceState> refs,
                                        double yaw) {
  std::vector<ReferenceState> out(refs.begin(), refs.end());
  for (auto& r : out) r.yaw = yaw + wrap_angle(r.yaw - yaw);
  return out;
}

// slide the previous solution one step forward onto the new problem layout;
// road rows always carry over, an obstacle row carries only where both the
// source and destination step have one, and anything new starts as an
// inactive row whose slack sits at zero, so the warm start survives the
// obstacle entering or leaving the horizon
QpWarmStart remap_warm(const QpWarmStart& prev, const std::vector<int>& src,
                       const CondensedQp& dst, double soft_penalty) {
  const int N = dst.horizon;
  const auto& dstc = dst.soft_per_step;
  const int nu = dst.n_inputs;

  std::vector<int> src_off(N + 1, 0), dst_off(N + 1, 0);
  for (int i = 0; i < N; ++i) {
    src_off[i + 1] = src_off[i] + src[i];
    dst_off[i + 1] = dst_off[i] + dstc[i];
  }
  const int fixed_rows = dst.state_rows + dst.input_box_rows + dst.rate_rows;
  const Eigen::Index src_sp = src_off[N] + fixed_rows;
  const Eigen::Index dst_sp = dst_off[N] + fixed_rows;

  QpWarmStart w;
  w.x = Eigen::VectorXd::Zero(dst.qp.n());
  w.lambda = Eigen::VectorXd::Zero(dst.qp.m());

  for (int t = 0; t < N; ++t) {
    const int s = std::min(t + 1, N - 1);
    w.x.segment(2 * t, 2) = prev.x.segment(2 * s, 2);
    // soft activity tracks positions on the road, not horizon indices, so
    // those rows map in place rather than sliding with the rest
    for (int r = 0; r < dstc[t]; ++r) {
      if (r >= src[t]) {
        // a fresh row: slack zero, held there by its positivity multiplier,
        // which keeps the penalty gradient on the slack coordinate cancelled
        w.lambda(dst_sp + dst_off[t] + r) = soft_penalty;
        continue;
      }
      w.x(nu + dst_off[t] + r) = prev.x(nu + src_off[t] + r);
      w.lambda(dst_off[t] + r) = prev.lambda(src_off[t] + r);
      w.lambda(dst_sp + dst_off[t] + r) = prev.lambda(src_sp + src_off[t] + r);
    }
  }

  // state, input box, and rate duals have layout-independent widths
  Eigen::Index so = src_off[N], to = dst_off[N];
  for (const int width : {12, 4, 4}) {
    for (int t = 0; t < N; ++t) {
      const int s = std::min(t + 1, N - 1);
      w.lambda.segment(to + width * t, width) =
          prev.lambda.segment(so + width * s, width);
    }
    so += width * N;
    to += width * N;
  }
  return w;
}

}  // namespace

LpvMpcController::LpvMpcController(const VehicleParams& vp, const MpcConfig& cfg)
    : vp_(vp), cfg_(cfg) {}

void LpvMpcController::init(const VehicleState& z0) {
  p_hat_.assign(cfg_.horizon,
                SchedulingVector{z0.v_lon, z0.v_lat, 0.0, z0.yaw});
  u_prev_ = {};
  warm_.reset();
  warm_spc_.clear();
  step_count_ = 0;
}

ControllerStepResult LpvMpcController::step(
    const VehicleState& z, std::span<const ReferenceState> refs,
    const std::optional<ObstacleCircle>& obstacle) {
  if (refs.size() != static_cast<std::size_t>(cfg_.horizon) + 1)
    throw DimensionMismatch("reference window must hold N+1 entries");
  if (p_hat_.empty()) init(z);

  const auto t0 = std::chrono::steady_clock::now();
  const int n = cfg_.horizon;

  const std::vector<ReferenceState> w_refs = unwrap_refs(refs, z.yaw);

  std::vector<LinearStepModel> models(n);
  for (int i = 0; i < n; ++i) {
    const LpvMatrices m = lpv_matrices(p_hat_[i], vp_, cfg_.ts);
    models[i].a = m.a;
    models[i].b = m.b;
  }

  const std::vector<StepConstraints> cons =
      build_horizon_constraints(w_refs, obstacle, cfg_);

  CondensedQp cqp = condense(models, z.vec(), w_refs, cons,
                             CostWeights::from_config(cfg_), u_prev_, cfg_);
  if (dump_) dump_(step_count_, cqp.qp);

  // slide the previous solution onto this problem's layout as a warm start
  std::optional<QpWarmStart> warm;
  if (warm_ && static_cast<int>(warm_spc_.size()) == cqp.horizon)
    warm = remap_warm(*warm_, warm_spc_, cqp, cfg_.soft_penalty);

  QpSolution sol = solver_.solve(cqp.qp, warm, cfg_.qp_tol, cfg_.qp_max_iter);
  if (sol.status != QpStatus::Optimal && warm) {
    // a misleading warm start can stall the solver where a cold start works
    sol = solver_.solve(cqp.qp, std::nullopt, cfg_.qp_tol, cfg_.qp_max_iter);
  }

  ControllerStepResult res;
  res.qp_status = sol.status;
  res.iterations = sol.iterations;
  res.objective = sol.objective;
  for (int i = 1; i <= n; ++i)
    if (cons[i].obstacle) res.active_obstacle_steps.push_back(i);

  if (sol.status == QpStatus::Infeasible ||
      (sol.status == QpStatus::MaxIterations &&
       sol.primal_residual > 10.0 * cfg_.qp_tol)) {
    // keep last input, brake; scheduling shifts forward unchanged
    res.fallback = true;
    res.applied = fallback_input(u_prev_, cfg_);
    res.predicted_inputs.assign(n, res.applied);
    res.predicted_states.clear();
    if (n >= 2) {
      std::rotate(p_hat_.begin(), p_hat_.begin() + 1, p_hat_.end());
      p_hat_.back() = p_hat_[n - 2];
    }
  } else {
    const auto u_pred = cqp.inputs_of(sol.x);
    res.predicted_inputs = u_pred;
    res.predicted_states.reserve(n);
    for (int i = 1; i <= n; ++i)
      res.predicted_states.push_back(
          VehicleState::from_vec(cqp.predict(i, sol.x)));

    // scheduling refresh from this solve: entry i pairs predicted state i
    // with input i (entry 0 uses the measured state)
    p_hat_[0] = SchedulingVector{z.v_lon, z.v_lat, u_pred[0].steer, z.yaw};
    for (int i = 1; i < n; ++i) {
      const VehicleState& zi = res.predicted_states[i - 1];
      p_hat_[i] = SchedulingVector{
          std::clamp(zi.v_lon, kMinLonSpeed, cfg_.state_hi(2)), zi.v_lat,
          u_pred[i].steer, zi.yaw};
    }

    res.applied = clamp_input(u_pred[0], u_prev_, cfg_);
    res.predicted_inputs[0] = res.applied;

    // shift by one for the next call, duplicating the tail entry
    if (n >= 2) {
      std::rotate(p_hat_.begin(), p_hat_.begin() + 1, p_hat_.end());
      p_hat_.back() = p_hat_[n - 2];
    }

    warm_ = QpWarmStart{sol.x, sol.lambda};
    warm_spc_ = cqp.soft_per_step;
  }

  u_prev_ = res.applied;
  ++step_count_;
  res.solve_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

}  // namespace ovt
