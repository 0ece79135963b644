#pragma once

#include <Eigen/Core>

#include "wflow/functional.hpp"
#include "wflow/operators.hpp"

namespace wflow::detail {

/// argmin_X |X - Y|^2 / (2 tau) + psi(X) for psi the particle lift of phi.
Eigen::MatrixXd prox_solve(const Functional& phi, double tau, const Eigen::MatrixXd& y, const SolverConfig& cfg);

/// Distance from Y to X - tau B X, minimized over subgradient selections.
double prox_residual(const Functional& phi, double tau, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

}  // namespace wflow::detail
