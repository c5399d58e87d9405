#include "ovtmpc/qp.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <vector>

namespace ovt {

namespace {

struct Residuals {
  double prim = 0.0;
  double dual = 0.0;
  double comp = 0.0;
};

Residuals kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& lambda) {
  Residuals r;
  if (qp.m() > 0) {
    const Eigen::VectorXd slack = qp.ineq_g * x - qp.ineq_h;
    r.prim = slack.cwiseMax(0.0).lpNorm<Eigen::Infinity>();
    r.comp = (lambda.array() * slack.array()).abs().maxCoeff();
    r.dual = (qp.cost_h * x + qp.cost_f + qp.ineq_g.transpose() * lambda)
                 .lpNorm<Eigen::Infinity>();
  } else {
    r.dual = (qp.cost_h * x + qp.cost_f).lpNorm<Eigen::Infinity>();
  }
  return r;
}

bool contract_met(const Residuals& r, double tol, double f_scale) {
  return r.prim <= tol && r.dual <= tol * (1.0 + f_scale) && r.comp <= tol;
}

double objective_of(const QpProblem& qp, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(qp.cost_h * x) + qp.cost_f.dot(x);
}

// Equality-constrained solve on a trial active set. The first passes drop
// all negative multipliers and re-add all violated rows at once, which
// settles clean guesses in two or three factorizations; after that the walk
// switches to single exchanges where a row may leave and re-enter once, and
// is shut out on its second exit, which breaks cycles without starving the
// walk of rows it genuinely needs back.
// returns 1 on a validated solution, 0 when the active-set walk failed, and
// -1 when the initial guess already has more rows than variables; such a
// guess cannot be a working basis and the reject costs nothing, so callers
// may retry without backing off
int polish_solution(const QpProblem& qp, const Eigen::MatrixXd& h_reg,
                    double tol, const Eigen::VectorXd& x_admm,
                    const Eigen::VectorXd& lambda_admm, QpSolution& out) {
  const Eigen::Index n = qp.n();
  const Eigen::Index m = qp.m();

  const Eigen::VectorXd slack = qp.ineq_g * x_admm - qp.ineq_h;
  const double lam_scale = std::max(1.0, lambda_admm.lpNorm<Eigen::Infinity>());

  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (slack(i) >= -1e-6 || lambda_admm(i) > 1e-6 * lam_scale)
      active.push_back(i);
  }
  // an overfull guess cannot be a working basis; keep the rows the iterate
  // violates hardest, they are the ones an equality solve must hold, and let
  // the walk re-admit the rest on demand
  if (static_cast<Eigen::Index>(active.size()) > n) {
    std::sort(active.begin(), active.end(), [&](Eigen::Index a, Eigen::Index b) {
      return slack(a) > slack(b);
    });
    active.resize(static_cast<std::size_t>(n));
    std::sort(active.begin(), active.end());
  }
  std::vector<unsigned char> exits(static_cast<std::size_t>(m), 0);

  const bool walk_dbg = std::getenv("QP_POLISH_DBG") != nullptr;
  for (int pass = 0; pass < 50; ++pass) {
    const bool greedy = pass < 3;
    const Eigen::Index na = static_cast<Eigen::Index>(active.size());
    if (walk_dbg) fprintf(stderr, "  pass %d na %ld\n", pass, (long)na);
    if (na > n) return pass == 0 ? -1 : 0;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
    kkt.topLeftCorner(n, n) = h_reg;
    Eigen::VectorXd rhs(n + na);
    rhs.head(n) = -qp.cost_f;
    for (Eigen::Index j = 0; j < na; ++j) {
      kkt.block(0, n + j, n, 1) = qp.ineq_g.row(active[j]).transpose();
      kkt.block(n + j, 0, 1, n) = qp.ineq_g.row(active[j]);
      rhs(n + j) = qp.ineq_h(active[j]);
    }
    // factor a quasidefinite perturbation of the KKT system, then refine
    // against the unperturbed one; solving the perturbed system alone would
    // leave a slack bias of stab * lambda^2 in the complementarity product
    Eigen::MatrixXd kkt_stab = kkt;
    kkt_stab.bottomRightCorner(na, na).diagonal().setConstant(-1e-11);

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt_stab);
    Eigen::VectorXd sol = lu.solve(rhs);
    for (int r = 0; r < 1; ++r) sol += lu.solve(rhs - kkt * sol);

    if (!sol.allFinite()) return 0;

    // drop rows that want to pull the wrong way
    std::vector<Eigen::Index> keep;
    Eigen::Index worst_j = -1;
    double worst_mult = -1e-9;
    for (Eigen::Index j = 0; j < na; ++j) {
      if (sol(n + j) < worst_mult) {
        worst_mult = sol(n + j);
        worst_j = j;
      }
      if (!(sol(n + j) < -1e-9)) keep.push_back(active[j]);
    }
    if (worst_j >= 0) {
      if (greedy) {
        active = std::move(keep);
      } else {
        ++exits[active[worst_j]];
        active.erase(active.begin() + worst_j);
      }
      continue;
    }

    const Eigen::VectorXd x = sol.head(n);
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
    for (Eigen::Index j = 0; j < na; ++j)
      lambda(active[j]) = std::max(0.0, sol(n + j));

    // re-add what the equality solve pushed out of feasibility, except rows
    // already dropped twice
    const Eigen::VectorXd s = qp.ineq_g * x - qp.ineq_h;
    Eigen::Index add_i = -1;
    double add_viol = 1e-9;
    bool added = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (s(i) <= add_viol || exits[i] >= 2) continue;
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      if (greedy) {
        active.push_back(i);
        added = true;
      } else if (s(i) > add_viol) {
        add_viol = s(i);
        add_i = i;
      }
    }
    if (add_i >= 0) {
      active.push_back(add_i);
      added = true;
    }
    if (added) continue;

    const Residuals r = kkt_residuals(qp, x, lambda);
    const double f_scale = qp.cost_f.lpNorm<Eigen::Infinity>();
    if (!contract_met(r, tol, f_scale)) {
      if (walk_dbg)
        fprintf(stderr, "  contract fail pass %d prim %.2e dual %.2e comp %.2e\n",
                pass, r.prim, r.dual, r.comp);
      return 0;
    }

    out.x = x;
    out.lambda = lambda;
    out.primal_residual = r.prim;
    out.dual_residual = r.dual;
    out.comp_residual = r.comp;
    out.objective = objective_of(qp, x);
    out.polished = true;
    return 1;
  }
  return 0;
}

}  // namespace

Eigen::MatrixXd regularized_hessian(const Eigen::MatrixXd& h) {
  Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  // LDLT diagonal as a cheap smallest-eigenvalue estimate
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sym);
  double min_d = std::numeric_limits<double>::infinity();
  if (ldlt.info() == Eigen::Success)
    min_d = ldlt.vectorD().minCoeff();
  if (!(min_d >= 1e-9))
    sym.diagonal().array() += 1e-9;
  return sym;
}

QpSolution QpSolver::solve(const QpProblem& qp,
                           const std::optional<QpWarmStart>& warm, double tol,
                           int max_iter) {
  const Eigen::Index n = qp.n();
  const Eigen::Index m = qp.m();
  if (qp.cost_h.rows() != n || qp.cost_h.cols() != n)
    throw DimensionMismatch("cost matrix shape does not match cost vector");
  if (m > 0 && (qp.ineq_g.rows() != m || qp.ineq_g.cols() != n))
    throw DimensionMismatch("constraint matrix shape mismatch");
  if (warm && (warm->x.size() != n || warm->lambda.size() != m))
    throw DimensionMismatch("warm start dimensions mismatch");

  const double f_scale = qp.cost_f.lpNorm<Eigen::Infinity>();
  const Eigen::MatrixXd h_reg = regularized_hessian(qp.cost_h);

  QpSolution out;
  if (warm) {
    out.x = warm->x;
    out.lambda = warm->lambda.cwiseMax(0.0);
  } else {
    out.x = Eigen::VectorXd::Zero(n);
    out.lambda = Eigen::VectorXd::Zero(m);
  }

  // carried-over duals that are far from stationary steer the iteration
  // worse than none at all; keep the primal and let the duals rebuild
  if (warm && m > 0) {
    const double warm_dual =
        (qp.cost_h * out.x + qp.cost_f + qp.ineq_g.transpose() * out.lambda)
            .lpNorm<Eigen::Infinity>();
    if (warm_dual > 50.0 * tol * (1.0 + f_scale)) out.lambda.setZero();
    if (const char* dbg = std::getenv("QP_WARM_DBG"))
      fprintf(stderr, "warmdual %.3e fscale %.3e\n", warm_dual, f_scale);
  }

  // active-set continuation: a warm start usually carries the solution's
  // active set, and the polish re-solves and validates against the current
  // problem data, so a hit skips the first-order loop and its setup outright
  if (warm && m > 0 && settings_.polish) {
    const int rc = polish_solution(qp, h_reg, tol, out.x, out.lambda, out);
    if (const char* dbg = std::getenv("QP_POLISH_DBG"))
      fprintf(stderr, "preloop rc %d\n", rc);
    if (rc > 0) {
      out.status = QpStatus::Optimal;
      out.iterations = 0;
      return out;
    }
  }

  if (m == 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(h_reg);
    out.x = llt.solve(-qp.cost_f);
    out.lambda.resize(0);
    const Residuals r = kkt_residuals(qp, out.x, out.lambda);
    out.status = r.dual <= tol * (1.0 + f_scale) ? QpStatus::Optimal
                                                 : QpStatus::MaxIterations;
    out.iterations = 1;
    out.dual_residual = r.dual;
    out.objective = objective_of(qp, out.x);
    return out;
  }

  // row equilibration to unit infinity-norm
  Eigen::VectorXd e(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double rn = qp.ineq_g.row(i).lpNorm<Eigen::Infinity>();
    if (rn < 1e-14) {
      if (qp.ineq_h(i) < -1e-12) {
        // a zero row with negative bound can never be satisfied
        out.status = QpStatus::Infeasible;
        return out;
      }
      e(i) = 1.0;
    } else {
      e(i) = 1.0 / rn;
    }
  }
  const Eigen::MatrixXd gs = e.asDiagonal() * qp.ineq_g;
  const Eigen::VectorXd hs = e.cwiseProduct(qp.ineq_h);

  double rho = settings_.rho;
  const double sigma = settings_.sigma;
  const double alpha = settings_.relax;
  // iterate on a reduced-scale objective so penalty-sized multipliers do not
  // stretch the dual updates across thousands of iterations; the square root
  // keeps the cost term visible next to rho * G'G in the iteration matrix
  const double c_obj =
      settings_.scale_cost ? 1.0 / std::sqrt(std::max(1.0, f_scale)) : 1.0;

  const Eigen::MatrixXd gtg = gs.transpose() * gs;
  Eigen::LLT<Eigen::MatrixXd> mllt;
  const auto refactor = [&]() {
    Eigen::MatrixXd msys = c_obj * h_reg + rho * gtg;
    msys.diagonal().array() += sigma;
    mllt.compute(msys);
  };
  refactor();
  if (mllt.info() != Eigen::Success)
    throw InvalidSpec("cost matrix is not positive semidefinite");

  Eigen::VectorXd x = out.x;
  // scaled duals: lambda = e .* y / c_obj
  Eigen::VectorXd y =
      warm ? (c_obj * out.lambda.array() / e.array()).matrix().eval()
           : Eigen::VectorXd::Zero(m);
  Eigen::VectorXd z = (gs * x).cwiseMin(hs);
  Eigen::VectorXd y_prev_check = y;

  int it = 0;
  int polish_attempts = 0;
  int polish_backoff = 0;
  int polish_block_until = 0;
  Residuals best{1e300, 1e300, 1e300};
  Eigen::VectorXd best_x = x, best_lambda = out.lambda;

  while (it < max_iter) {
    ++it;
    x = mllt.solve(sigma * x - c_obj * qp.cost_f +
                   gs.transpose() * (rho * z - y));
    const Eigen::VectorXd gx = gs * x;
    const Eigen::VectorXd v = alpha * gx + (1.0 - alpha) * z;
    z = (v + y / rho).cwiseMin(hs);
    y += rho * (v - z);

    if (it % settings_.check_every != 0 && it != max_iter) continue;

    const Eigen::VectorXd lambda = e.cwiseProduct(y) / c_obj;
    const Residuals r = kkt_residuals(qp, x, lambda);
    if (settings_.trace) settings_.trace(it, r.prim, r.dual, r.comp);
    if (r.prim + r.dual < best.prim + best.dual) {
      best = r;
      best_x = x;
      best_lambda = lambda;
    }

    if (contract_met(r, tol, f_scale)) {
      out.x = x;
      out.lambda = lambda;
      out.status = QpStatus::Optimal;
      out.iterations = it;
      out.primal_residual = r.prim;
      out.dual_residual = r.dual;
      out.comp_residual = r.comp;
      out.objective = objective_of(qp, x);
      return out;
    }
    // attempt the polish once the primal residual is within an order of the
    // tolerance, or unconditionally after polish_every iterations when
    // first-order progress crawls; it validates the contract itself, so a
    // premature attempt costs one small factorization, and failures back off
    // exponentially to keep that surcharge bounded
    const bool near_opt =
        r.prim <= 10.0 * tol && r.dual <= 10.0 * tol * (1.0 + f_scale);
    const bool overdue =
        settings_.polish_every > 0 && it >= settings_.polish_every;
    if ((near_opt || overdue) && settings_.polish && polish_attempts < 40 &&
        it >= polish_block_until) {
      const int rc = polish_solution(qp, h_reg, tol, x, lambda, out);
      if (rc > 0) {
        out.status = QpStatus::Optimal;
        out.iterations = it;
        return out;
      }
      // an oversized-guess reject is free, so only walk failures consume the
      // attempt budget and trigger backoff
      if (rc == 0) {
        ++polish_attempts;
        polish_backoff = polish_backoff > 0 ? 2 * polish_backoff : 50;
        polish_block_until = it + polish_backoff;
      }
    }

    // primal infeasibility certificate from the dual update direction
    const Eigen::VectorXd dy = y - y_prev_check;
    const double dy_norm = dy.lpNorm<Eigen::Infinity>();
    if (dy_norm > 1e-10) {
      const double gtdy = (gs.transpose() * dy).lpNorm<Eigen::Infinity>();
      const double hdy = hs.dot(dy);
      if (gtdy <= settings_.infeas_tol * dy_norm &&
          hdy < -settings_.infeas_tol * dy_norm) {
        out.status = QpStatus::Infeasible;
        out.iterations = it;
        out.x = x;
        out.lambda = e.cwiseProduct(y) / c_obj;
        return out;
      }
    }
    y_prev_check = y;

    if (it % settings_.adapt_every == 0 && it < max_iter) {
      // rebalance the step weight toward equal relative residuals
      const double prim_rel =
          (gx - z).lpNorm<Eigen::Infinity>() /
          std::max({1.0, gx.lpNorm<Eigen::Infinity>(),
                    z.lpNorm<Eigen::Infinity>()});
      const Eigen::VectorXd lam = e.cwiseProduct(y) / c_obj;
      const double dual_rel =
          r.dual / std::max({1.0, (qp.cost_h * x).lpNorm<Eigen::Infinity>(),
                             f_scale,
                             (qp.ineq_g.transpose() * lam)
                                 .lpNorm<Eigen::Infinity>()});
      if (prim_rel > 1e-16 && dual_rel > 1e-16) {
        const double factor = std::sqrt(prim_rel / dual_rel);
        if (factor > 5.0 || factor < 0.2) {
          rho = std::clamp(rho * factor, 1e-6, 1e6);
          refactor();
        }
      }
    }
  }

  out.x = best_x;
  out.lambda = best_lambda;
  out.status = QpStatus::MaxIterations;
  out.iterations = it;
  out.primal_residual = best.prim;
  out.dual_residual = best.dual;
  out.comp_residual = best.comp;
  out.objective = objective_of(qp, best_x);
  if (settings_.polish &&
      polish_solution(qp, h_reg, tol, best_x, best_lambda, out) > 0)
    out.status = QpStatus::Optimal;
  return out;
}

}  // namespace ovt
