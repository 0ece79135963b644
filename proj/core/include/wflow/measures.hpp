#pragma once

// Finitely supported probability measures with rational weights, their
// Lagrangian (particle) parametrizations, and couplings between them.
//
// A DiscreteMeasure stores atoms x_i with integer multiplicities k_i over a
// denominator N = sum k_i, so mu = (1/N) sum_i k_i delta_{x_i}. Weights are
// never stored as floating point; marginal bookkeeping is exact.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace wflow {

using Point = Eigen::VectorXd;

/// Upper bound on common denominators (lcm of two measure denominators).
inline constexpr std::int64_t kDefaultLcmBound = 1'000'000;

/// Strict lexicographic order on coordinates.
bool lex_less(const Point& a, const Point& b);

class DiscreteMeasure {
 public:
  /// Builds mu = (1/N) sum_i mult_i delta_{atoms_i}. Exactly equal atoms are
  /// merged by summing multiplicities; atoms are stored in lexicographic
  /// order. Throws DomainError on empty input, nonpositive multiplicities,
  /// inconsistent dimensions or non-finite coordinates.
  DiscreteMeasure(std::vector<Point> atoms, std::vector<std::int64_t> multiplicities);

  static DiscreteMeasure dirac(Point x);
  /// Empirical measure (1/n) sum delta_{points_k}.
  static DiscreteMeasure empirical(std::vector<Point> points);

  int dim() const noexcept { return dim_; }
  std::int64_t denominator() const noexcept { return denominator_; }
  std::size_t size() const noexcept { return atoms_.size(); }

  const std::vector<Point>& atoms() const noexcept { return atoms_; }
  const Point& atom(std::size_t i) const { return atoms_[i]; }
  const std::vector<std::int64_t>& multiplicities() const noexcept { return mult_; }
  std::int64_t multiplicity(std::size_t i) const { return mult_[i]; }
  double weight(std::size_t i) const {
    return static_cast<double>(mult_[i]) / static_cast<double>(denominator_);
  }

  /// Structural equality: same atoms, multiplicities and denominator.
  friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b);

 private:
  std::vector<Point> atoms_;
  std::vector<std::int64_t> mult_;
  std::int64_t denominator_ = 0;
  int dim_ = 0;
};

/// True when a and b are the same probability measure, i.e. same atoms and
/// mult_a / N_a == mult_b / N_b as rationals.
bool same_law(const DiscreteMeasure& a, const DiscreteMeasure& b);

/// Particle vector X in (R^d)^N, stored as an N x d matrix (one row per
/// particle). The inner product carries the 1/N weight:
/// <X, Y> = (1/N) sum_n <x_n, y_n>, so |X - Y| is an L^2(mu) distance.
class LagrangianVector {
 public:
  LagrangianVector() = default;
  explicit LagrangianVector(Eigen::MatrixXd particles);
  static LagrangianVector from_points(std::span<const Point> points);

  std::size_t size() const noexcept { return static_cast<std::size_t>(x_.rows()); }
  int dim() const noexcept { return static_cast<int>(x_.cols()); }

  const Eigen::MatrixXd& matrix() const noexcept { return x_; }
  Eigen::MatrixXd& matrix() noexcept { return x_; }
  Point particle(std::size_t n) const { return x_.row(static_cast<Eigen::Index>(n)).transpose(); }

  double dot(const LagrangianVector& other) const;
  double squared_norm() const { return dot(*this); }
  double norm() const;

  /// Returns Y with y_n = x_{perm[n]}.
  LagrangianVector permuted(std::span<const std::size_t> perm) const;

  LagrangianVector& operator+=(const LagrangianVector& o);
  LagrangianVector& operator-=(const LagrangianVector& o);
  LagrangianVector& operator*=(double s);

  friend LagrangianVector operator+(LagrangianVector a, const LagrangianVector& b) { return a += b; }
  friend LagrangianVector operator-(LagrangianVector a, const LagrangianVector& b) { return a -= b; }
  friend LagrangianVector operator*(double s, LagrangianVector a) { return a *= s; }
  friend LagrangianVector operator*(LagrangianVector a, double s) { return a *= s; }
  friend bool operator==(const LagrangianVector& a, const LagrangianVector& b) {
    return a.x_.rows() == b.x_.rows() && a.x_.cols() == b.x_.cols() && a.x_ == b.x_;
  }

 private:
  Eigen::MatrixXd x_;
};

/// Weighted distance |X - Y| = sqrt((1/N) sum |x_n - y_n|^2).
double distance(const LagrangianVector& a, const LagrangianVector& b);

/// The empirical-measure projection iota. Particles are grouped by single
/// linkage at Euclidean distance <= merge_eps; each group becomes one atom at
/// the group's mean with multiplicity = group size; denominator = N.
/// The result does not depend on the particle order.
DiscreteMeasure iota_project(const LagrangianVector& x, double merge_eps = 0.0);

/// Group structure behind iota_project: labels[n] = atom index of particle n
/// in the returned measure.
std::vector<std::size_t> merge_groups(const LagrangianVector& x, double merge_eps);

/// Lists every atom (n / denominator) * mult times, atoms in lexicographic
/// order. Throws DomainError unless denominator(mu) divides n.
LagrangianVector expand(const DiscreteMeasure& mu, std::int64_t n);

/// lcm(a, b); throws CapacityError if it exceeds bound.
std::int64_t common_denominator(std::int64_t a, std::int64_t b,
                                std::int64_t bound = kDefaultLcmBound);

/// Transport plan between two discrete measures with integer masses over a
/// common denominator N: gamma = (1/N) sum_ij mass(i,j) delta_{(x_i, y_j)}.
class Coupling {
 public:
  using MassMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

  /// Throws DomainError if the marginals are not source/target scaled to the
  /// common denominator.
  Coupling(DiscreteMeasure source, DiscreteMeasure target, MassMatrix mass,
           std::int64_t lcm_bound = kDefaultLcmBound);

  /// Coupling induced by matching expanded source particle n with expanded
  /// target particle sigma[n] (both expanded to the common denominator).
  static Coupling from_matching(const DiscreteMeasure& source, const DiscreteMeasure& target,
                                std::span<const std::size_t> sigma,
                                std::int64_t lcm_bound = kDefaultLcmBound);

  static Coupling identity(const DiscreteMeasure& mu);

  const DiscreteMeasure& source() const noexcept { return source_; }
  const DiscreteMeasure& target() const noexcept { return target_; }
  std::int64_t denominator() const noexcept { return denominator_; }
  const MassMatrix& mass() const noexcept { return mass_; }

  struct Entry {
    std::size_t i;
    std::size_t j;
    std::int64_t mass;
  };
  /// Support entries (mass > 0), row-major order.
  std::vector<Entry> support() const;

  /// Transport cost (1/N) sum mass(i,j) |x_i - y_j|^2.
  double cost() const;

 private:
  DiscreteMeasure source_;
  DiscreteMeasure target_;
  std::int64_t denominator_;
  MassMatrix mass_;
};

/// Push-forward of gamma under (x, y) -> (1-t) x + t y with exact atom merging.
/// t = 0 and t = 1 return the source and the target themselves.
DiscreteMeasure interpolate(const Coupling& gamma, double t);

struct MeasureStats {
  double second_moment = 0.0;  // sum w_i |x_i|^2
  Point mean;
  double diameter = 0.0;       // max pairwise atom distance
  std::size_t support_cardinality = 0;
};

MeasureStats measure_stats(const DiscreteMeasure& mu);

/// Integral of |x - y|^2 over mu (x) mu.
double pairwise_second_moment(const DiscreteMeasure& mu);

}  // namespace wflow
