#include "ovtmpc/condense.hpp"

namespace ovt {

Vec6 CondensedQp::predict(int i, const Eigen::VectorXd& x) const {
  return phi.segment<6>(6 * (i - 1)) +
         gamma.middleRows<6>(6 * (i - 1)) * x.head(n_inputs);
}

std::vector<ControlInput> CondensedQp::inputs_of(const Eigen::VectorXd& x) const {
  std::vector<ControlInput> u(horizon);
  for (int j = 0; j < horizon; ++j) u[j] = {x(2 * j), x(2 * j + 1)};
  return u;
}

Eigen::VectorXd CondensedQp::slacks_of(const Eigen::VectorXd& x) const {
  return x.tail(n_slack);
}

CondensedQp condense(std::span<const LinearStepModel> models, const Vec6& z0,
                     std::span<const ReferenceState> refs,
                     std::span<const StepConstraints> cons,
                     const CostWeights& weights, const ControlInput& u_prev,
                     const MpcConfig& cfg) {
  const int n_steps = static_cast<int>(models.size());
  if (n_steps < 1) throw DimensionMismatch("empty model sequence");
  if (refs.size() != static_cast<std::size_t>(n_steps) + 1)
    throw DimensionMismatch("reference window must hold N+1 entries");
  if (cons.size() != static_cast<std::size_t>(n_steps) + 1)
    throw DimensionMismatch("constraint sequence must hold N+1 entries");

  CondensedQp c;
  c.horizon = n_steps;
  c.n_inputs = 2 * n_steps;

  // prediction operators: z_i = phi_(i-1) + gamma row block (i-1) * U
  c.gamma = Eigen::MatrixXd::Zero(6 * n_steps, c.n_inputs);
  c.phi = Eigen::VectorXd::Zero(6 * n_steps);
  c.phi.segment<6>(0) = models[0].a * z0 + models[0].c;
  c.gamma.block<6, 2>(0, 0) = models[0].b;
  for (int bi = 1; bi < n_steps; ++bi) {
    c.phi.segment<6>(6 * bi) =
        models[bi].a * c.phi.segment<6>(6 * (bi - 1)) + models[bi].c;
    c.gamma.middleRows<6>(6 * bi).leftCols(2 * bi) =
        models[bi].a * c.gamma.middleRows<6>(6 * (bi - 1)).leftCols(2 * bi);
    c.gamma.block<6, 2>(6 * bi, 2 * bi) = models[bi].b;
  }

  // count soft rows first so the decision size is known
  int n_soft = 0;
  for (int i = 1; i <= n_steps; ++i) {
    c.soft_per_step.push_back(2 + (cons[i].obstacle ? 1 : 0));
    n_soft += c.soft_per_step.back();
  }
  c.n_slack = n_soft;
  c.soft_rows = n_soft;
  c.state_rows = 12 * n_steps;
  c.input_box_rows = 4 * n_steps;
  c.rate_rows = 4 * n_steps;

  const int nx = c.n_inputs + c.n_slack;
  const int m =
      c.soft_rows + c.state_rows + c.input_box_rows + c.rate_rows + c.n_slack;

  // cost: sum_i (z_i - r_i)' W_i (z_i - r_i) + sum_j u_j' R u_j + w * sum(s)
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(nx, nx);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(nx);
  for (int bi = 0; bi < n_steps; ++bi) {
    const Vec6& w_diag = (bi == n_steps - 1) ? weights.p_diag : weights.q_diag;
    const auto g_i = c.gamma.middleRows<6>(6 * bi);
    const Vec6 err = c.phi.segment<6>(6 * bi) - refs[bi + 1].vec();
    h.topLeftCorner(c.n_inputs, c.n_inputs).noalias() +=
        2.0 * g_i.transpose() * w_diag.asDiagonal() * g_i;
    f.head(c.n_inputs).noalias() +=
        2.0 * g_i.transpose() * (w_diag.asDiagonal() * err);
  }
  for (int j = 0; j < n_steps; ++j) {
    h(2 * j, 2 * j) += 2.0 * weights.r_diag(0);
    h(2 * j + 1, 2 * j + 1) += 2.0 * weights.r_diag(1);
  }
  f.tail(c.n_slack).setConstant(weights.soft_penalty);

  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, nx);
  Eigen::VectorXd rhs(m);
  int row = 0;
  int slack = 0;

  // soft rows: a half-plane n . p >= c becomes -n . p - s <= -c
  const auto soft_halfspace_row = [&](int step, const HalfSpace& hp) {
    const auto g_i = c.gamma.middleRows<6>(6 * (step - 1));
    Eigen::RowVector2d n2(-hp.a, -hp.b);
    g.row(row).head(c.n_inputs) = n2 * g_i.topRows<2>();
    g(row, c.n_inputs + slack) = -1.0;
    rhs(row) = -hp.c + hp.a * c.phi(6 * (step - 1)) +
               hp.b * c.phi(6 * (step - 1) + 1);
    ++row;
    ++slack;
  };
  for (int i = 1; i <= n_steps; ++i) {
    soft_halfspace_row(i, cons[i].road_right);
    soft_halfspace_row(i, cons[i].road_left);
    if (cons[i].obstacle) soft_halfspace_row(i, *cons[i].obstacle);
  }

  // hard state boxes on steps 1..N
  for (int i = 1; i <= n_steps; ++i) {
    const auto g_i = c.gamma.middleRows<6>(6 * (i - 1));
    for (int k = 0; k < 6; ++k) {
      g.row(row).head(c.n_inputs) = g_i.row(k);
      rhs(row) = cons[i].state_hi(k) - c.phi(6 * (i - 1) + k);
      ++row;
    }
    for (int k = 0; k < 6; ++k) {
      g.row(row).head(c.n_inputs) = -g_i.row(k);
      rhs(row) = c.phi(6 * (i - 1) + k) - cons[i].state_lo(k);
      ++row;
    }
  }

  // hard input boxes
  for (int j = 0; j < n_steps; ++j) {
    g(row, 2 * j) = 1.0;
    rhs(row++) = cfg.steer_max;
    g(row, 2 * j) = -1.0;
    rhs(row++) = cfg.steer_max;
    g(row, 2 * j + 1) = 1.0;
    rhs(row++) = cfg.accel_max;
    g(row, 2 * j + 1) = -1.0;
    rhs(row++) = -cfg.accel_min;
  }

  // hard rate rows, first step measured against the previously applied input
  for (int j = 0; j < n_steps; ++j) {
    const double prev_steer = (j == 0) ? u_prev.steer : 0.0;
    const double prev_accel = (j == 0) ? u_prev.accel : 0.0;
    g(row, 2 * j) = 1.0;
    if (j > 0) g(row, 2 * (j - 1)) = -1.0;
    rhs(row++) = cfg.steer_rate_max + prev_steer;
    g(row, 2 * j) = -1.0;
    if (j > 0) g(row, 2 * (j - 1)) = 1.0;
    rhs(row++) = cfg.steer_rate_max - prev_steer;
    g(row, 2 * j + 1) = 1.0;
    if (j > 0) g(row, 2 * (j - 1) + 1) = -1.0;
    rhs(row++) = cfg.accel_rate_max + prev_accel;
    g(row, 2 * j + 1) = -1.0;
    if (j > 0) g(row, 2 * (j - 1) + 1) = 1.0;
    rhs(row++) = cfg.accel_rate_max - prev_accel;
  }

  // slack nonnegativity
  for (int k = 0; k < c.n_slack; ++k) {
    g(row, c.n_inputs + k) = -1.0;
    rhs(row++) = 0.0;
  }

  c.qp.cost_h = std::move(h);
  c.qp.cost_f = std::move(f);
  c.qp.ineq_g = std::move(g);
  c.qp.ineq_h = std::move(rhs);
  return c;
}

}  // namespace ovt
