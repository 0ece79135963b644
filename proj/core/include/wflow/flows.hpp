#pragma once

// Measure-valued flows obtained by lifting to particles, running a time
// scheme on the Lagrangian operator and projecting back, plus the
// diagnostics and studies built on top of them.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "wflow/fields.hpp"
#include "wflow/functional.hpp"
#include "wflow/measures.hpp"
#include "wflow/operators.hpp"

namespace wflow {

struct Scheme {
  enum class Kind { Implicit, Explicit, Exponential };
  Kind kind = Kind::Implicit;
  double tau = 0.0;    // Implicit, Explicit
  std::size_t n = 0;   // Exponential: n resolvent steps of size T/n

  static Scheme implicit(double tau) { return {Kind::Implicit, tau, 0}; }
  static Scheme explicit_euler(double tau) { return {Kind::Explicit, tau, 0}; }
  static Scheme exponential(std::size_t n) { return {Kind::Exponential, 0.0, n}; }
};

struct EvolveOptions {
  double merge_eps = 1e-9;
  SolverConfig solver{};
  /// Optional reordering of the expanded lift (X0 = expand(mu0).permuted(p)).
  std::vector<std::size_t> lift_permutation{};
  /// Keep every stride-th step (the final step is always kept).
  std::size_t record_stride = 1;
};

struct FlowDiagnostics {
  std::size_t support_cardinality = 0;
  double diameter = 0.0;
  double second_moment = 0.0;
  double field_norm = 0.0;
};

struct FlowResult {
  std::vector<double> times;
  std::vector<DiscreteMeasure> measures;
  std::vector<LagrangianVector> lagrangian;
  std::vector<FlowDiagnostics> diagnostics;

  std::size_t size() const noexcept { return times.size(); }
  const DiscreteMeasure& final_measure() const { return measures.back(); }
};

/// Runs the scheme on [0, T]. Steps are uniform of size T / K with
/// K = ceil(T / tau) (so equal to tau whenever tau divides T). Particles that
/// fall within merge_eps of each other and are not separating are snapped to
/// their common mean, which makes collisions exact.
FlowResult evolve(const VelocityField& f, const DiscreteMeasure& mu0, const Scheme& scheme, double horizon,
                  const EvolveOptions& opts = {});
FlowResult evolve(const Functional& phi, const DiscreteMeasure& mu0, const Scheme& scheme, double horizon,
                  const EvolveOptions& opts = {});

struct EviReport {
  std::vector<double> times;      // interior times t_k
  std::vector<double> residuals;  // derivative + pairing - lambda W2^2
  std::vector<bool> tie;          // optimal plan at t_k not unique
  bool any_tie = false;
  double max_residual(bool skip_ties = false) const;
};

/// d/dt 1/2 W2^2(mu_t, nu) by centered differences, plus the pairing
/// sum gamma_ij <f(y_j, nu), y_j - x_i> on the computed optimal plan from
/// mu_t to nu, minus lambda W2^2(mu_t, nu).
EviReport evi_residual(const FlowResult& flow, const VelocityField& f, double lambda, const DiscreteMeasure& nu);

struct ContractionReport {
  std::vector<double> times;
  std::vector<double> ratios;  // W2(S_t mu, S_t nu) / (e^{lambda t} W2(mu, nu))
  bool pass = true;
};

ContractionReport contraction_check(const VelocityField& f, const DiscreteMeasure& mu0, const DiscreteMeasure& nu0,
                                    double lambda, const std::vector<double>& t_grid, const Scheme& scheme,
                                    double tol = 1e-9, const EvolveOptions& opts = {});

/// One minimizing-movement step: iota(J_tau X) for X the canonical lift of mu.
DiscreteMeasure jko_step(const Functional& phi, const DiscreteMeasure& mu, double tau, const SolverConfig& cfg = {},
                         double merge_eps = 1e-9);

// -- studies -----------------------------------------------------------------

/// t -> S_t mu0 for a known flow.
using ReferenceFlow = std::function<DiscreteMeasure(double)>;

/// x' = A x + b.
ReferenceFlow linear_reference(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const DiscreteMeasure& mu0);
/// x' = a (mean - x) + v0.
ReferenceFlow barycentric_reference(double a, const Point& v0, const DiscreteMeasure& mu0);
/// P = aP |x|^2 / 2, W = aW |z|^2 / 2.
ReferenceFlow pw_quadratic_reference(double a_p, double a_w, const DiscreteMeasure& mu0);

struct ErrorStudyRow {
  std::size_t n = 0;
  double error = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct ErrorStudy {
  std::vector<ErrorStudyRow> rows;
  bool pass = true;
};

/// error_n = W2(M^n_{t/n}, S_t mu0) against bound 2 t |f[mu0]| / sqrt(n).
/// Without a reference, S_t mu0 comes from an implicit run with
/// tau_ref = min(t/n) / 100.
ErrorStudy implicit_error_study(const VelocityField& f, const DiscreteMeasure& mu0, double t,
                                const std::vector<std::size_t>& n_list, const ReferenceFlow& reference = {},
                                const EvolveOptions& opts = {});

/// Seeded generator of an N-particle empirical measure.
using MeasureSampler = std::function<DiscreteMeasure(std::size_t n, std::uint64_t seed)>;

/// Draws N atoms of mu0 according to its weights and moves each by a uniform
/// offset in the ball of radius `jitter`.
MeasureSampler atom_jitter_sampler(const DiscreteMeasure& mu0, double jitter);

struct MeanFieldRow {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double initial_error = 0.0;
  double final_error = 0.0;
  double bound = 0.0;  // e^{lambda t} initial_error + slack
  bool pass = true;
};

struct MeanFieldStudy {
  std::vector<MeanFieldRow> rows;
  bool pass = true;
};

MeanFieldStudy mean_field_study(const VelocityField& f, const DiscreteMeasure& mu0, const MeasureSampler& sampler,
                                const std::vector<std::size_t>& n_list, const std::vector<std::uint64_t>& seeds,
                                double t, double lambda, const Scheme& scheme, double slack = 1e-6,
                                const EvolveOptions& opts = {});

struct StickyReport {
  bool cardinality_nonincreasing = true;
  bool diameter_bound_ok = true;
  bool moment_bound_ok = true;
  bool all() const noexcept { return cardinality_nonincreasing && diameter_bound_ok && moment_bound_ok; }
};

StickyReport sticky_diagnostics(const FlowResult& flow, double lambda);

}  // namespace wflow
