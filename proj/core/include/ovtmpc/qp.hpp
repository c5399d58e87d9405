#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "ovtmpc/errors.hpp"

namespace ovt {

// min 0.5 x' H x + f' x  subject to  G x <= h
struct QpProblem {
  Eigen::MatrixXd cost_h;  // n x n, symmetric positive semidefinite
  Eigen::VectorXd cost_f;  // n
  Eigen::MatrixXd ineq_g;  // m x n
  Eigen::VectorXd ineq_h;  // m

  Eigen::Index n() const { return cost_f.size(); }
  Eigen::Index m() const { return ineq_h.size(); }
};

enum class QpStatus { Optimal, MaxIterations, Infeasible };

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;  // multipliers, >= 0
  QpStatus status = QpStatus::MaxIterations;
  int iterations = 0;
  double primal_residual = 0.0;  // ||max(Gx - h, 0)||_inf
  double dual_residual = 0.0;    // ||Hx + f + G'lambda||_inf
  double comp_residual = 0.0;    // max_i |lambda_i (Gx - h)_i|
  double objective = 0.0;
  bool polished = false;
};

struct QpWarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
};

// Dense operator-splitting solver with an active-set polish pass. The polish
// recovers exact complementarity, which first-order iterations alone cannot
// reach when multipliers are large (soft-constraint penalties).
class QpSolver {
 public:
  struct Settings {
    double rho = 2.0;         // constraint step weight
    double sigma = 1e-6;      // proximal regularization
    double relax = 1.6;       // over-relaxation
    int check_every = 10;     // residual check interval
    int adapt_every = 100;    // rho adaptation interval
    bool polish = true;
    // first unconditional polish attempt; the interval doubles after each
    // failure so hopeless problems pay a bounded surcharge (0 disables)
    int polish_every = 100;
    bool scale_cost = false;  // iterate on a gradient-normalized objective
    double infeas_tol = 1e-5;
    // observer for every residual check: (iteration, primal, dual, comp)
    std::function<void(int, double, double, double)> trace;
  };

  QpSolver() = default;
  explicit QpSolver(Settings s) : settings_(s) {}

  // Iterates until the KKT contract holds at tol: primal feasibility within
  // tol, stationarity within tol*(1 + ||f||_inf), complementarity within tol.
  QpSolution solve(const QpProblem& qp,
                   const std::optional<QpWarmStart>& warm = std::nullopt,
                   double tol = 1e-4, int max_iter = 4000);

  Settings& settings() { return settings_; }

 private:
  Settings settings_;
};

// Returns H with 1e-9 ridge added when the smallest-eigenvalue estimate of the
// symmetrized input falls below 1e-9.
Eigen::MatrixXd regularized_hessian(const Eigen::MatrixXd& h);

}  // namespace ovt
