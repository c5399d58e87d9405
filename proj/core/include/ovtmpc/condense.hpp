#pragma once

#include <span>
#include <vector>

#include "ovtmpc/constraints.hpp"
#include "ovtmpc/qp.hpp"

namespace ovt {

// One prediction step of an affine-linear model z+ = a z + b u + c. The
// offset c is zero for the frozen scheduling model and carries linearization
// defects for the SQP subproblems.
struct LinearStepModel {
  Mat6 a = Mat6::Identity();
  Mat62 b = Mat62::Zero();
  Vec6 c = Vec6::Zero();
};

struct CostWeights {
  Vec6 q_diag = Vec6::Ones();
  Vec6 p_diag = Vec6::Ones();
  Vec2 r_diag = Vec2::Ones();
  double soft_penalty = 1e4;

  static CostWeights from_config(const MpcConfig& cfg) {
    return {cfg.q_diag, cfg.p_diag, cfg.r_diag, cfg.soft_penalty};
  }
};

// Stacked-input QP over x = [u_0 ... u_{N-1}, s_0 ... s_{ns-1}] with the
// predicted states eliminated through z_i = phi_i + gamma_i U. Road and
// obstacle rows carry one L1-penalized slack each; state boxes, input boxes,
// and input rate rows are hard. Constraints apply to steps 1..N.
struct CondensedQp {
  QpProblem qp;
  int horizon = 0;
  int n_inputs = 0;  // 2N
  int n_slack = 0;

  Eigen::MatrixXd gamma;  // 6N x 2N
  Eigen::VectorXd phi;    // 6N

  // row-category sizes, in row order: soft, state box, input box, rate, slack
  int soft_rows = 0;
  int state_rows = 0;
  int input_box_rows = 0;
  int rate_rows = 0;

  // soft rows (and slacks) per step, 2 without an obstacle row, 3 with one
  std::vector<int> soft_per_step;

  // predicted state at step i (1..N) for a stacked decision vector
  Vec6 predict(int i, const Eigen::VectorXd& x) const;
  std::vector<ControlInput> inputs_of(const Eigen::VectorXd& x) const;
  Eigen::VectorXd slacks_of(const Eigen::VectorXd& x) const;
};

CondensedQp condense(std::span<const LinearStepModel> models, const Vec6& z0,
                     std::span<const ReferenceState> refs,
                     std::span<const StepConstraints> cons,
                     const CostWeights& weights, const ControlInput& u_prev,
                     const MpcConfig& cfg);

}  // namespace ovt
