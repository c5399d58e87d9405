#pragma once

#include <optional>
#include <span>

#include "ovtmpc/condense.hpp"
#include "ovtmpc/controller_types.hpp"
#include "ovtmpc/lpv_model.hpp"

namespace ovt {

// QP-based controller around the frozen scheduling model. Each step freezes
// the model along the previous solution's scheduling trajectory, solves one
// QP, refreshes the scheduling from the new prediction, and shifts it by one
// step for the next call.
class LpvMpcController {
 public:
  LpvMpcController(const VehicleParams& vp, const MpcConfig& cfg);

  // Seeds the scheduling trajectory with the initial state (steer = 0) and
  // resets the previous input to zero.
  void init(const VehicleState& z0);

  // refs must hold N+1 entries; entry 0 corresponds to the current state.
  ControllerStepResult step(const VehicleState& z,
                            std::span<const ReferenceState> refs,
                            const std::optional<ObstacleCircle>& obstacle);

  // scheduling trajectory as stored for the NEXT call (post-shift)
  std::span<const SchedulingVector> scheduling() const { return p_hat_; }
  const ControlInput& previous_input() const { return u_prev_; }

  void set_qp_dump_hook(QpDumpHook hook) { dump_ = std::move(hook); }

 private:
  VehicleParams vp_;
  MpcConfig cfg_;
  std::vector<SchedulingVector> p_hat_;
  ControlInput u_prev_;
  QpSolver solver_;
  std::optional<QpWarmStart> warm_;
  // soft-row layout the stored warm start was solved under
  std::vector<int> warm_spc_;
  QpDumpHook dump_;
  int step_count_ = 0;
};

}  // namespace ovt
