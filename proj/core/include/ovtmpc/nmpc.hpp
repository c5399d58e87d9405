#pragma once

#include <functional>
#include <optional>
#include <span>

#include "ovtmpc/condense.hpp"
#include "ovtmpc/controller_types.hpp"

namespace ovt {

struct SqpSettings {
  int max_iterations = 30;
  double tol_step = 1e-4;      // infinity norm of the input step
  double tol_feas = 1e-4;      // defects and nonlinear constraint violation
  double backtrack_factor = 0.5;
  double armijo = 1e-4;
  int max_backtracks = 14;
  double trust_radius = 10.0;  // per-iteration bound on each input move
  double penalty_init = 10.0;  // L1 merit weight, grows with the multipliers
  bool warm_start = false;     // reuse the shifted previous solution
  // Called once per outer iteration with (iteration, merit, input step norm,
  // worst constraint violation); hooked up by the CLI's verbose mode.
  std::function<void(int, double, double, double)> trace;
};

// Primal iterate of the nonlinear solve: a state trajectory, the input
// sequence that (approximately) generates it, and the last subproblem duals.
struct NlpIterate {
  std::vector<VehicleState> states;  // z_0 .. z_N
  std::vector<ControlInput> inputs;  // u_0 .. u_{N-1}
  Eigen::VectorXd multipliers;
  double merit = 0.0;
};

// Sequential quadratic programming controller on the full nonlinear model.
// Each control step solves the horizon problem to local optimality: linearize
// the dynamics along the iterate, build the constraint rows (the obstacle
// disk is linearized at the iterate, not at the reference), solve the
// condensed QP, then line-search an L1 exact-penalty merit.
class NmpcController {
 public:
  NmpcController(const VehicleParams& vp, const MpcConfig& cfg,
                 const SqpSettings& sqp = {});

  void init(const VehicleState& z0);

  ControllerStepResult step(const VehicleState& z,
                            std::span<const ReferenceState> refs,
                            const std::optional<ObstacleCircle>& obstacle);

  // Shift the previous solution one step forward and re-roll the states from
  // the new measurement, so defects start at zero.
  static NlpIterate warm_start_from_previous(const NlpIterate& prev,
                                             const VehicleState& z_new,
                                             const VehicleParams& vp,
                                             double ts);

  // Full solve from an explicit initial iterate; step() wraps this. Exposed
  // so tests can drive cold and warm solves side by side.
  ControllerStepResult solve(const VehicleState& z,
                             std::span<const ReferenceState> refs,
                             const std::optional<ObstacleCircle>& obstacle,
                             const ControlInput& u_prev,
                             const NlpIterate& start, NlpIterate* final_iterate);

  // Cold start: roll the nonlinear dynamics from z0 holding u_hold (nudged
  // within the box/rate windows when a step would stall below the model's
  // speed floor). Open-loop rollouts of the lateral dynamics diverge at low
  // speed with this sampling time, so once a state leaves the model's sane
  // region the remaining steps are seeded from the reference window instead;
  // the resulting shooting defects are the SQP's job to close.
  NlpIterate initial_iterate(const VehicleState& z0, const ControlInput& u_hold,
                             std::span<const ReferenceState> refs) const;

  const std::optional<NlpIterate>& last_iterate() const { return prev_; }
  const ControlInput& previous_input() const { return u_prev_; }
  void set_qp_dump_hook(QpDumpHook hook) { dump_ = std::move(hook); }

 private:
  VehicleParams vp_;
  MpcConfig cfg_;
  SqpSettings sqp_;
  ControlInput u_prev_;
  std::optional<NlpIterate> prev_;
  QpSolver solver_;
  QpDumpHook dump_;
  int step_count_ = 0;
};

}  // namespace ovt
