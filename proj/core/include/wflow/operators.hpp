#pragma once

// The Lagrangian layer. A velocity field f lifts to the operator
//   (B X)_n = f(x_n, iota X)
// on particle vectors X in (R^d)^N with the 1/N-weighted inner product, so
// operator norms coincide with L^2(mu) norms on the measure side. Everything
// here (resolvents, Yosida approximations, semigroups) is the classical
// Hilbert-space theory of lambda-dissipative operators applied to B.

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "wflow/fields.hpp"
#include "wflow/functional.hpp"
#include "wflow/measures.hpp"

namespace wflow {

struct SolverConfig {
  enum class Method { Auto, FixedPoint, Prox, Newton };
  double tol = 1e-10;
  int max_iter = 100000;
  Method method = Method::Auto;
};

class LagrangianOperator {
 public:
  explicit LagrangianOperator(VelocityField f);

  LagrangianVector apply(const LagrangianVector& x) const;

  const VelocityField& field() const noexcept { return field_; }
  double lambda() const noexcept { return field_.lambda(); }
  std::optional<double> lip() const noexcept { return field_.lip(); }
  /// Set when B = -d psi for an energy psi; resolvents are then proximal steps.
  const Functional* prox_functional() const noexcept { return field_.functional(); }

  /// 1 / lambda^+ (infinity when lambda <= 0).
  double max_step() const noexcept;
  /// Throws DomainError unless 0 < tau < 1 / lambda^+.
  void check_step(double tau) const;

 private:
  VelocityField field_;
};

/// J_tau Y: the X solving X - tau B X = Y, to weighted residual <= cfg.tol.
/// Throws DomainError for tau out of range and ConvergenceError if the solver
/// stalls. J_tau is (1 - lambda tau)^{-1}-Lipschitz.
LagrangianVector resolvent(const LagrangianOperator& b, double tau, const LagrangianVector& y,
                           const SolverConfig& cfg = {});

/// dist(Y, X - tau B X) in the weighted norm. For subdifferential operators
/// this is minimized over all subgradient selections at coincident particles
/// (and at the kink of an abs potential).
double resolvent_residual(const LagrangianOperator& b, double tau, const LagrangianVector& x,
                          const LagrangianVector& y);

/// Moreau-Yosida approximation B_tau X = (J_tau X - X) / tau.
LagrangianVector yosida(const LagrangianOperator& b, double tau, const LagrangianVector& x,
                        const SolverConfig& cfg = {});

struct MinimalSelectionEstimate {
  LagrangianVector velocity;  // B_tau X at the smallest tau
  std::vector<double> norms;  // (1 - lambda tau_i) |B_tau_i X|
  bool nondecreasing = true;  // up to 10 * cfg.tol
};

/// Approximates the minimal selection B°X through Yosida approximations on a
/// strictly decreasing grid of step sizes.
MinimalSelectionEstimate minimal_selection_estimate(const LagrangianOperator& b, const LagrangianVector& x,
                                                    const std::vector<double>& tau_grid,
                                                    const SolverConfig& cfg = {});

/// (J_{t/n})^n X.
LagrangianVector exponential_semigroup(const LagrangianOperator& b, double t, const LagrangianVector& x,
                                       std::size_t n, const SolverConfig& cfg = {});

/// Number of steps of size tau covering [0, T].
std::size_t step_count(double horizon, double tau);

/// Forward Euler X_{k+1} = X_k + tau B X_k; returns X_0 ... X_K.
std::vector<LagrangianVector> explicit_trajectory(const LagrangianOperator& b, double tau, double horizon,
                                                  const LagrangianVector& x0);

/// Backward Euler X_{k+1} = J_tau X_k; returns X_0 ... X_K.
std::vector<LagrangianVector> implicit_trajectory(const LagrangianOperator& b, double tau, double horizon,
                                                  const LagrangianVector& x0, const SolverConfig& cfg = {});

struct OperatorDissipativityReport {
  double worst_gap = 0.0;  // max <BX - BY, X - Y> - lambda |X - Y|^2
  bool pass = true;        // worst_gap <= 1e-9
};

OperatorDissipativityReport operator_dissipativity_check(
    const LagrangianOperator& b, double lambda,
    const std::vector<std::pair<LagrangianVector, LagrangianVector>>& pairs);

}  // namespace wflow
