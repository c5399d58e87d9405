#pragma once

#include <functional>
#include <vector>

#include "ovtmpc/mpc_config.hpp"
#include "ovtmpc/qp.hpp"
#include "ovtmpc/vehicle_model.hpp"

namespace ovt {

// Outcome of one controller invocation. The applied input always equals the
// first predicted input and always satisfies the input box and rate limits
// exactly.
struct ControllerStepResult {
  ControlInput applied;
  std::vector<VehicleState> predicted_states;  // z_1 .. z_N
  std::vector<ControlInput> predicted_inputs;  // u_0 .. u_{N-1}
  QpStatus qp_status = QpStatus::Optimal;
  bool converged = true;   // SQP outer convergence; always true for the QP controller
  bool fallback = false;   // true when the brake-safe fallback input was applied
  int iterations = 0;      // QP iterations, or SQP outer iterations
  double solve_time_s = 0.0;
  double objective = 0.0;
  std::vector<int> active_obstacle_steps;  // horizon steps with an obstacle row
};

// Optional per-step dump of the assembled QP (step index, problem).
using QpDumpHook = std::function<void(int, const QpProblem&)>;

// Clamps an input into the box and into the rate window around the previous
// input, making hard input feasibility exact rather than solver-tolerance.
ControlInput clamp_input(const ControlInput& u, const ControlInput& u_prev,
                         const MpcConfig& cfg);

}  // namespace ovt
