#pragma once

// Potential + interaction energies
//   phi(mu) = int P dmu + 1/2 int int W(x - y) dmu(x) dmu(y)
// with radial profiles P, W, their lifts psi(X) = phi(iota X) and the
// subgradient velocity field -u_P(x) - (u_W * mu)(x).

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wflow/fields.hpp"
#include "wflow/measures.hpp"

namespace wflow {

enum class ProfileKind { Zero, Quadratic, Abs, Quartic };

/// Radial profile h(z): quadratic a|z|^2/2, abs a|z|, quartic a|z|^4/4.
/// Abs and quartic require a >= 0 (convexity).
class Profile {
 public:
  Profile() = default;
  Profile(ProfileKind kind, double coef);

  static Profile zero() { return {}; }
  static Profile quadratic(double a) { return {ProfileKind::Quadratic, a}; }
  static Profile abs(double a) { return {ProfileKind::Abs, a}; }
  static Profile quartic(double a) { return {ProfileKind::Quartic, a}; }
  /// "zero" | "quadratic" | "abs" | "quartic".
  static Profile parse(const std::string& kind, double coef);

  ProfileKind kind() const noexcept { return kind_; }
  double coef() const noexcept { return coef_; }
  std::string kind_name() const;
  bool smooth() const noexcept { return kind_ != ProfileKind::Abs || coef_ == 0.0; }

  double value(const Point& z) const;
  /// Element of the subdifferential; the minimal-norm one (0) at the abs kink.
  Point gradient(const Point& z) const;
  /// Hessian at z (for abs only valid at z != 0).
  Eigen::MatrixXd hessian(const Point& z) const;
  /// Semiconvexity defect: h + (lambda/2)|z|^2 is convex.
  double lambda() const noexcept;

 private:
  ProfileKind kind_ = ProfileKind::Zero;
  double coef_ = 0.0;
};

class Functional {
 public:
  Functional(Profile potential, Profile interaction);

  const Profile& potential() const noexcept { return potential_; }
  const Profile& interaction() const noexcept { return interaction_; }

  double value(const DiscreteMeasure& mu) const;
  /// Velocities -u_P(x_i) - sum_j w_j u_W(x_i - x_j), one per atom.
  std::vector<Point> field_on(const DiscreteMeasure& mu) const;

  /// psi(X) = phi(iota X); invariant under particle permutations.
  double lifted_value(const LagrangianVector& x) const;

  /// Particle sums without projecting: (1/N) sum P(x_n) + (1/2N^2) sum W(x_n - x_m).
  double particle_value(const Eigen::MatrixXd& x) const;
  /// Rows -u_P(x_n) - (1/N) sum_m u_W(x_n - x_m).
  Eigen::MatrixXd particle_field(const Eigen::MatrixXd& x) const;

  /// The velocity field -d phi (with odd selection u_W(0) = 0).
  VelocityField subgradient_field() const;

  /// psi is (-lambda)-convex along the lift, i.e. -d psi is lambda-dissipative.
  double lambda_conv() const noexcept;
  /// Lipschitz constant of the lifted subgradient when it is globally Lipschitz.
  std::optional<double> lipschitz() const noexcept;
  bool smooth() const noexcept { return potential_.smooth() && interaction_.smooth(); }
  bool prox_capable() const noexcept { return true; }

 private:
  Profile potential_;
  Profile interaction_;
};

struct FunctionalEvaluation {
  double value = 0.0;
  std::vector<Point> field;
};

FunctionalEvaluation functional_value_and_field(const Functional& phi, const DiscreteMeasure& mu);

/// Objective of one minimizing-movement step: W2^2(mu, nu) / (2 tau) + phi(nu).
double jko_objective(const Functional& phi, const DiscreteMeasure& mu, const DiscreteMeasure& nu, double tau);

}  // namespace wflow
