#pragma once

// Deterministic probability vector fields: maps (x, mu) -> velocity, carrying
// the dissipativity constant lambda they are claimed to satisfy and, when
// known, the Lipschitz constant of their Lagrangian lift.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wflow/measures.hpp"

namespace wflow {

class Functional;

class VelocityField {
 public:
  using PointEval = std::function<Point(const Point&, const DiscreteMeasure&)>;
  /// Optional fast path: particle matrix (N x d) -> velocity matrix, equal to
  /// evaluating f(x_n, iota(X)) row by row.
  using ParticleEval = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

  VelocityField(std::string name, PointEval eval, double lambda, std::optional<double> lip = std::nullopt);

  Point operator()(const Point& x, const DiscreteMeasure& mu) const;

  /// Rows of the result are f(x_n, iota(X)); iota merges exact duplicates only.
  Eigen::MatrixXd apply_particles(const Eigen::MatrixXd& x) const;

  const std::string& name() const noexcept { return name_; }
  double lambda() const noexcept { return lambda_; }
  std::optional<double> lip() const noexcept { return lip_; }

  /// Set when this field is the (minus) subgradient field of an energy; the
  /// resolvent then becomes a proximal step.
  const Functional* functional() const noexcept { return functional_.get(); }

  VelocityField with_particle_eval(ParticleEval fast) const;
  VelocityField with_functional(std::shared_ptr<const Functional> phi) const;
  VelocityField with_claims(double lambda, std::optional<double> lip) const;

 private:
  std::string name_;
  PointEval eval_;
  ParticleEval particle_eval_;
  double lambda_;
  std::optional<double> lip_;
  std::shared_ptr<const Functional> functional_;
};

// -- built-in fields ---------------------------------------------------------

/// f(x) = A x + b. lambda = top eigenvalue of (A + A^T)/2, lip = ||A||_2.
VelocityField linear_field(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);
VelocityField linear_field(const Eigen::MatrixXd& a);

/// f(x) = v0, any dimension matching v0.
VelocityField constant_field(const Point& v0);

/// f = 0 in any dimension.
VelocityField zero_field();

/// f(x, mu) = a (mean(mu) - x) + v0, a > 0. Dissipative (lambda = 0), lip = a.
VelocityField barycentric_field(double a, const Point& v0);
VelocityField barycentric_field(double a);

/// f(x, mu) = L (sin(x) + cos(R mean(mu))), R reversing the coordinates,
/// componentwise trig. Satisfies |f(x1,mu1) - f(x0,mu0)| <= L (W2(mu0,mu1) + |x0-x1|),
/// so its lift is 2L-Lipschitz and 2L-dissipative.
VelocityField lipschitz_example_field(double lip_l);

struct SuperpositionField {
  /// (weight, field) pairs; weights positive and summing to 1.
  std::vector<std::pair<double, VelocityField>> components;
};

/// g(x, mu) = sum_theta w_theta f_theta(x, mu). lambda = sum w lambda_theta.
VelocityField barycentric_projection(const SuperpositionField& superposition);

/// x -> f(x, mu) - lambda x, with lambda claim reduced by lambda.
VelocityField lambda_transform(const VelocityField& f, double lambda);

struct FieldEvaluation {
  std::vector<Point> velocities;  // one per atom
  double l2_norm = 0.0;           // ||f[mu]||_{L^2(mu)}
};

FieldEvaluation eval_on_measure(const VelocityField& f, const DiscreteMeasure& mu);

}  // namespace wflow
