#include "ovtmpc/nmpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ovtmpc/errors.hpp"

namespace ovt {
namespace {

// Supporting half-space of the inflated disk exterior at a query point. The
// exterior is reverse-convex, so the linearization is an inner (conservative)
// approximation: anything the plane admits is outside the disk to first
// order. Near the center the exact right-hand side blows up, so the distance
// is floored before forming it; at zero distance the caller's fallback normal
// picks the escape direction.
HalfSpace linearize_disk_exterior(const ObstacleCircle& obs, double px,
                                  double py, const Eigen::Vector2d& fallback) {
  const double r = obs.inflated();
  double dx = px - obs.cx;
  double dy = py - obs.cy;
  double d = std::hypot(dx, dy);
  if (d < 1e-12) {
    dx = fallback.x();
    dy = fallback.y();
    d = std::hypot(dx, dy);
  }
  const double nx = dx / d;
  const double ny = dy / d;
  const double deff = std::max(d, 0.1 * r);
  const double offset = (r * r + deff * deff) / (2.0 * deff);
  return HalfSpace{nx, ny, nx * obs.cx + ny * obs.cy + offset};
}

double tracking_cost(const std::vector<VehicleState>& states,
                     const std::vector<ControlInput>& inputs,
                     std::span<const ReferenceState> refs,
                     const CostWeights& w) {
  const std::size_t n = inputs.size();
  double j = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const Vec6 e = states[i].vec() - refs[i].vec();
    const Vec6& wd = (i == n) ? w.p_diag : w.q_diag;
    j += e.dot(wd.cwiseProduct(e));
  }
  for (const ControlInput& u : inputs) {
    const Vec2 uv = u.vec();
    j += uv.dot(w.r_diag.cwiseProduct(uv));
  }
  return j;
}

struct Violation {
  double l1 = 0.0;
  double linf = 0.0;

  void add(double v) {
    if (v > 0.0) {
      l1 += v;
      linf = std::max(linf, v);
    }
  }
};

// Constraint violation of an iterate against the true nonlinear problem:
// shooting defects, road band, state boxes, and the exact disk exterior.
// Input boxes are maintained exactly by construction and are not scored.
Violation nonlinear_violation(const std::vector<VehicleState>& states,
                              const std::vector<ControlInput>& inputs,
                              std::span<const ReferenceState> refs,
                              const std::optional<ObstacleCircle>& obstacle,
                              const VehicleParams& vp, const MpcConfig& cfg) {
  Violation v;
  const std::size_t n = inputs.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec6 defect =
        step_euler(states[i], inputs[i], vp, cfg.ts).vec() - states[i + 1].vec();
    for (int k = 0; k < 6; ++k) v.add(std::abs(defect(k)));
  }
  for (std::size_t i = 1; i <= n; ++i) {
    const auto [right, left] =
        road_halfspaces(refs[i], cfg.road_r1, cfg.road_r2);
    v.add(-right.signed_distance(states[i].x, states[i].y));
    v.add(-left.signed_distance(states[i].x, states[i].y));
    if (obstacle) {
      const double d = std::hypot(states[i].x - obstacle->cx,
                                  states[i].y - obstacle->cy);
      v.add(obstacle->inflated() - d);
    }
    const Vec6 zv = states[i].vec();
    for (int k = 0; k < 6; ++k) {
      v.add(cfg.state_lo(k) - zv(k));
      v.add(zv(k) - cfg.state_hi(k));
    }
  }
  return v;
}

// Appends hard rows |u - u_bar| <= radius to the condensed QP so a single
// subproblem cannot move the inputs arbitrarily far from the linearization
// point. With the default radius they stay inactive behind the input boxes.
void append_trust_region(QpProblem& qp, const Eigen::VectorXd& u_bar,
                         double radius) {
  const Eigen::Index nu = u_bar.size();
  const Eigen::Index m0 = qp.ineq_g.rows();
  qp.ineq_g.conservativeResize(m0 + 2 * nu, Eigen::NoChange);
  qp.ineq_h.conservativeResize(m0 + 2 * nu);
  qp.ineq_g.bottomRows(2 * nu).setZero();
  for (Eigen::Index k = 0; k < nu; ++k) {
    qp.ineq_g(m0 + 2 * k, k) = 1.0;
    qp.ineq_h(m0 + 2 * k) = u_bar(k) + radius;
    qp.ineq_g(m0 + 2 * k + 1, k) = -1.0;
    qp.ineq_h(m0 + 2 * k + 1) = -u_bar(k) + radius;
  }
}

ControlInput hold_brake(const ControlInput& u_prev, const MpcConfig& cfg) {
  ControlInput u = u_prev;
  u.accel = std::max(cfg.accel_min, u_prev.accel - cfg.accel_rate_max);
  return u;
}

// A usable iterate keeps every state inside the region where the model and
// its Jacobians mean something; anything else would hand the QP hard rows it
// cannot satisfy.
bool within_model_region(const NlpIterate& it, const MpcConfig& cfg) {
  for (const VehicleState& s : it.states) {
    if (s.v_lon < kMinLonSpeed || std::abs(s.v_lat) > cfg.state_hi(3) ||
        std::abs(s.yaw_rate) > cfg.state_hi(5) || !s.vec().allFinite()) {
      return false;
    }
  }
  return true;
}

}  // namespace

NmpcController::NmpcController(const VehicleParams& vp, const MpcConfig& cfg,
                               const SqpSettings& sqp)
    : vp_(vp), cfg_(cfg), sqp_(sqp) {}

void NmpcController::init(const VehicleState& z0) {
  (void)z0;
  u_prev_ = ControlInput{};
  prev_.reset();
  step_count_ = 0;
}

NlpIterate NmpcController::initial_iterate(
    const VehicleState& z0, const ControlInput& u_hold,
    std::span<const ReferenceState> refs) const {
  const int n = cfg_.horizon;
  NlpIterate it;
  it.states.reserve(n + 1);
  it.inputs.reserve(n);
  it.states.push_back(z0);
  ControlInput u_before = u_prev_;
  bool rolling = true;
  for (int i = 0; i < n; ++i) {
    ControlInput u = clamp_input(u_hold, u_before, cfg_);
    if (rolling) {
      const double a_floor = (kMinLonSpeed - it.states.back().v_lon) / cfg_.ts;
      if (u.accel < a_floor) {
        // Holding this acceleration would drive the speed through the model's
        // validity floor; back it off as far as the rate window allows.
        u.accel = std::min(
            std::min(cfg_.accel_max, u_before.accel + cfg_.accel_rate_max),
            std::max(u.accel, a_floor));
      }
      const VehicleState next = step_euler(it.states.back(), u, vp_, cfg_.ts);
      if (next.v_lon >= kMinLonSpeed &&
          std::abs(next.v_lat) <= cfg_.state_hi(3) &&
          std::abs(next.yaw_rate) <= cfg_.state_hi(5) &&
          next.vec().allFinite()) {
        it.states.push_back(next);
        it.inputs.push_back(u);
        u_before = u;
        continue;
      }
      rolling = false;
    }
    const ReferenceState& r = refs[i + 1];
    VehicleState seeded;
    seeded.x = r.x;
    seeded.y = r.y;
    seeded.v_lon = std::max(r.v_lon, kMinLonSpeed);
    seeded.v_lat = 0.0;
    seeded.yaw = z0.yaw + wrap_angle(r.yaw - z0.yaw);
    seeded.yaw_rate = r.yaw_rate;
    it.states.push_back(seeded);
    it.inputs.push_back(u);
    u_before = u;
  }
  return it;
}

NlpIterate NmpcController::warm_start_from_previous(const NlpIterate& prev,
                                                    const VehicleState& z_new,
                                                    const VehicleParams& vp,
                                                    double ts) {
  NlpIterate it;
  const std::size_t n = prev.inputs.size();
  it.inputs.assign(prev.inputs.begin(), prev.inputs.end());
  if (n >= 2) {
    std::rotate(it.inputs.begin(), it.inputs.begin() + 1, it.inputs.end());
    it.inputs.back() = it.inputs[n - 2];
  }
  it.states.reserve(n + 1);
  it.states.push_back(z_new);
  for (std::size_t i = 0; i < n; ++i) {
    ControlInput& u = it.inputs[i];
    const double a_floor = (kMinLonSpeed - it.states.back().v_lon) / ts;
    u.accel = std::max(u.accel, a_floor);
    it.states.push_back(step_euler(it.states.back(), u, vp, ts));
  }
  it.multipliers = prev.multipliers;
  return it;
}

ControllerStepResult NmpcController::step(
    const VehicleState& z, std::span<const ReferenceState> refs,
    const std::optional<ObstacleCircle>& obstacle) {
  NlpIterate start;
  bool have_start = false;
  if (sqp_.warm_start && prev_) {
    try {
      start = warm_start_from_previous(*prev_, z, vp_, cfg_.ts);
      have_start = within_model_region(start, cfg_);
    } catch (const DegenerateSpeed&) {
      // Shifted inputs stall the rollout; fall through to the cold start.
    }
  }

  ControllerStepResult res;
  try {
    if (!have_start) start = initial_iterate(z, u_prev_, refs);
    NlpIterate final_it;
    res = solve(z, refs, obstacle, u_prev_, start, &final_it);
    if (!res.fallback) prev_ = std::move(final_it);
  } catch (const DegenerateSpeed&) {
    res = ControllerStepResult{};
    res.fallback = true;
  }

  if (res.fallback) {
    res.applied = clamp_input(hold_brake(u_prev_, cfg_), u_prev_, cfg_);
    res.predicted_states.clear();
    res.predicted_inputs.assign(cfg_.horizon, res.applied);
    prev_.reset();
  }
  u_prev_ = res.applied;
  ++step_count_;
  return res;
}

ControllerStepResult NmpcController::solve(
    const VehicleState& z, std::span<const ReferenceState> refs,
    const std::optional<ObstacleCircle>& obstacle, const ControlInput& u_prev,
    const NlpIterate& start, NlpIterate* final_iterate) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = cfg_.horizon;
  if (refs.size() < static_cast<std::size_t>(n) + 1) {
    throw DimensionMismatch("reference window shorter than the horizon");
  }
  if (start.states.size() != static_cast<std::size_t>(n) + 1 ||
      start.inputs.size() != static_cast<std::size_t>(n)) {
    throw DimensionMismatch("initial iterate does not match the horizon");
  }

  // References wrapped onto the measured yaw's branch once up front; the
  // iterate then lives on that branch throughout.
  std::vector<ReferenceState> w_refs(refs.begin(), refs.begin() + n + 1);
  for (ReferenceState& r : w_refs) {
    r.yaw = z.yaw + wrap_angle(r.yaw - z.yaw);
  }

  NlpIterate it = start;
  it.states[0] = z;
  const CostWeights weights = CostWeights::from_config(cfg_);

  // Obstacle rows are built only while the iterate is near the disk; far away
  // the supporting plane sits at half the radial distance and would add inert
  // rows every solve.
  const double activation =
      obstacle ? obstacle->inflated() + 10.0 : 0.0;

  double mu = sqp_.penalty_init;
  std::optional<QpWarmStart> qp_warm;
  ControllerStepResult res;
  res.converged = false;

  std::vector<LinearStepModel> models(n);
  for (int outer = 0; outer < sqp_.max_iterations; ++outer) {
    res.iterations = outer + 1;

    for (int i = 0; i < n; ++i) {
      const EulerJacobians jac =
          jacobians_euler(it.states[i], it.inputs[i], vp_, cfg_.ts);
      models[i].a = jac.a;
      models[i].b = jac.b;
      models[i].c = step_euler(it.states[i], it.inputs[i], vp_, cfg_.ts).vec() -
                    jac.a * it.states[i].vec() - jac.b * it.inputs[i].vec();
    }

    std::vector<StepConstraints> cons =
        build_horizon_constraints(w_refs, std::nullopt, cfg_);
    res.active_obstacle_steps.clear();
    if (obstacle) {
      for (int i = 1; i <= n; ++i) {
        const double d = std::hypot(it.states[i].x - obstacle->cx,
                                    it.states[i].y - obstacle->cy);
        if (d <= activation) {
          const Eigen::Vector2d road_left(-std::sin(w_refs[i].yaw),
                                          std::cos(w_refs[i].yaw));
          cons[i].obstacle = linearize_disk_exterior(
              *obstacle, it.states[i].x, it.states[i].y, road_left);
          res.active_obstacle_steps.push_back(i);
        }
      }
    }

    CondensedQp cqp =
        condense(models, z.vec(), w_refs, cons, weights, u_prev, cfg_);
    Eigen::VectorXd u_bar(2 * n);
    for (int i = 0; i < n; ++i) u_bar.segment<2>(2 * i) = it.inputs[i].vec();
    append_trust_region(cqp.qp, u_bar, sqp_.trust_radius);
    if (dump_) dump_(step_count_, cqp.qp);

    if (qp_warm && (qp_warm->x.size() != cqp.qp.n() ||
                    qp_warm->lambda.size() != cqp.qp.m())) {
      qp_warm.reset();
    }
    const QpSolution sol =
        solver_.solve(cqp.qp, qp_warm, cfg_.qp_tol, cfg_.qp_max_iter);
    res.qp_status = sol.status;
    if (sol.status == QpStatus::Infeasible ||
        (sol.status == QpStatus::MaxIterations &&
         sol.primal_residual > 10.0 * cfg_.qp_tol)) {
      res.fallback = true;
      break;
    }
    qp_warm = QpWarmStart{sol.x, sol.lambda};

    const Eigen::VectorXd u_star = sol.x.head(2 * n);
    const Eigen::VectorXd du = u_star - u_bar;
    const double step_norm = du.lpNorm<Eigen::Infinity>();

    const Violation v0 = nonlinear_violation(it.states, it.inputs, w_refs,
                                             obstacle, vp_, cfg_);
    if (step_norm <= sqp_.tol_step && v0.linf <= sqp_.tol_feas) {
      res.converged = true;
      break;
    }

    // State direction from the linearized prediction; at full step the new
    // trajectory is the QP's own, which also closes the shooting defects to
    // first order.
    std::vector<Vec6> dz(n + 1, Vec6::Zero());
    for (int i = 1; i <= n; ++i) {
      dz[i] = cqp.predict(i, sol.x) - it.states[i].vec();
    }

    double dj = 0.0;
    for (int i = 1; i <= n; ++i) {
      const Vec6 e = it.states[i].vec() - w_refs[i].vec();
      const Vec6& wd = (i == n) ? weights.p_diag : weights.q_diag;
      dj += 2.0 * e.dot(wd.cwiseProduct(dz[i]));
    }
    for (int i = 0; i < n; ++i) {
      dj += 2.0 * it.inputs[i].vec().dot(
                      weights.r_diag.cwiseProduct(du.segment<2>(2 * i)));
    }

    // Penalty must dominate the multipliers of constraints the nonlinear
    // iterate can actually violate. The slack-positivity block is excluded:
    // its multipliers sit at the soft penalty weight whenever a road row is
    // inactive, and the slacks are not part of the NLP iterate at all.
    const Eigen::Index violable =
        cqp.soft_rows + cqp.state_rows + cqp.input_box_rows + cqp.rate_rows;
    if (violable > 0 && sol.lambda.size() >= violable) {
      mu = std::max(mu, 1.5 * sol.lambda.head(violable).lpNorm<Eigen::Infinity>());
    }
    double descent = dj - mu * v0.l1;
    if (descent >= 0.0 && v0.l1 > sqp_.tol_feas) {
      mu *= 10.0;
      descent = dj - mu * v0.l1;
    }
    const double merit0 = tracking_cost(it.states, it.inputs, w_refs, weights) +
                          mu * v0.l1;
    if (sqp_.trace) sqp_.trace(outer, merit0, step_norm, v0.linf);

    double alpha = 1.0;
    bool accepted = false;
    std::vector<VehicleState> cand_states(n + 1);
    std::vector<ControlInput> cand_inputs(n);
    for (int ls = 0; ls <= sqp_.max_backtracks; ++ls) {
      cand_states[0] = it.states[0];
      bool valid = true;
      for (int i = 0; i < n; ++i) {
        cand_inputs[i] =
            ControlInput::from_vec(it.inputs[i].vec() + alpha * du.segment<2>(2 * i));
        const Vec6 zc = it.states[i + 1].vec() + alpha * dz[i + 1];
        cand_states[i + 1] = VehicleState::from_vec(zc);
        if (cand_states[i + 1].v_lon < kMinLonSpeed) {
          valid = false;
          break;
        }
      }
      if (valid) {
        const Violation vc = nonlinear_violation(cand_states, cand_inputs,
                                                 w_refs, obstacle, vp_, cfg_);
        const double merit_c =
            tracking_cost(cand_states, cand_inputs, w_refs, weights) +
            mu * vc.l1;
        if (merit_c <= merit0 + sqp_.armijo * alpha * std::min(descent, 0.0) &&
            merit_c < merit0 + 1e-12 * (1.0 + std::abs(merit0))) {
          accepted = true;
          break;
        }
      }
      alpha *= sqp_.backtrack_factor;
    }

    if (!accepted) {
      // The merit cannot be improved along this direction; report the current
      // iterate, converged only if it is already feasible and the step small.
      res.converged = step_norm <= 10.0 * sqp_.tol_step && v0.linf <= sqp_.tol_feas;
      break;
    }

    it.states = cand_states;
    it.inputs = cand_inputs;
    it.multipliers = sol.lambda;
  }

  if (!res.fallback) {
    res.applied = clamp_input(it.inputs[0], u_prev, cfg_);
    it.inputs[0] = res.applied;
    res.predicted_states.assign(it.states.begin() + 1, it.states.end());
    res.predicted_inputs = it.inputs;
    res.objective = tracking_cost(it.states, it.inputs, w_refs, weights);
    if (final_iterate) *final_iterate = std::move(it);
  }
  res.solve_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

}  // namespace ovt
