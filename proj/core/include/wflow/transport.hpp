#pragma once

// Exact optimal transport between discrete measures and tools that certify or
// decompose transport plans.

#include <cstdint>
#include <optional>
#include <vector>

#include "wflow/measures.hpp"

namespace wflow {

struct W2Result {
  double distance = 0.0;
  double squared = 0.0;  // distance^2 = plan cost
  Coupling plan;
};

/// Exact 2-Wasserstein distance. Both measures are expanded to the common
/// denominator N and the N x N squared-distance assignment is solved exactly.
/// Throws DomainError on dimension mismatch, CapacityError if the common
/// denominator exceeds lcm_bound.
W2Result w2_exact(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                  std::int64_t lcm_bound = kDefaultLcmBound);

/// Enumerates all N! matchings of the expanded particle lists. N <= 8.
double w2_bruteforce(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1);

/// L^infinity Wasserstein distance (bottleneck matching). N <= 64.
double w_infinity(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1);

/// True if some optimal plan other than `plan` exists, i.e. the residual
/// network of the transport problem carries a zero-cost cycle. `plan` must be
/// optimal. rel_tol scales with the largest squared distance.
bool has_alternative_optimum(const Coupling& plan, double rel_tol = 1e-12);

struct CyclicalMonotonicityReport {
  bool pass = true;
  double worst_sum = 0.0;
  /// Support entries (indices into plan.support()) forming a violating cycle.
  std::optional<std::vector<std::size_t>> witness;
};

/// Checks sum_n <y_n, x_n - x_{n-1}> >= -1e-9 over every cycle of support
/// points of length <= max_cycle.
CyclicalMonotonicityReport cyclical_monotonicity_check(const Coupling& gamma, std::size_t max_cycle);

enum class Certificate { CertifiedOptimal, Unknown };

/// Sufficient local optimality test: with delta the minimal distance between
/// source atoms and s the largest displacement on supp gamma, s <= delta / 2
/// implies gamma is optimal.
Certificate local_optimality_certificate(const Coupling& gamma);

struct GeodesicDecomposition {
  std::vector<double> breakpoints;  // 0 = t_0 < ... < t_K = 1
  std::vector<double> speeds;       // W2(mu_{t_{k-1}}, mu_{t_k}) / (t_k - t_{k-1})
  double plan_cost = 0.0;           // C^2 = (1/N) sum |x1 - x0|^2
  std::size_t segments() const { return speeds.size(); }
};

/// Splits t -> interpolate(gamma, t) into constant-speed geodesic pieces.
/// Each breakpoint is the supremum of the times t for which
/// |W2^2(mu_{t_k}, mu_t) - (t - t_k)^2 C^2| <= tol * C^2, located by bisection.
/// Throws BisectionError if a segment cannot make progress.
GeodesicDecomposition geodesic_decompose(const Coupling& gamma, double tol = 1e-7);

// -- chord directions and injectivity perturbations -------------------------

struct AlignmentReport {
  bool aligned = false;
  std::optional<Point> direction;  // normalized a - a'
  std::optional<Point> chord;      // b - b'
};

/// Tests whether some nonzero chord b - b' of B is parallel to some nonzero
/// direction a - a' of A. Requires dim >= 2.
AlignmentReport check_chords_alignment(const std::vector<Point>& a, const std::vector<Point>& b);

/// Exact verifier for the family B(s) = (1-s) B + s B', s in (0, 1]: rejects if
/// any B(s) has a coincident pair or a chord parallel to a direction of A.
bool injective_family_ok(const std::vector<Point>& a, const std::vector<Point>& b,
                         const std::vector<Point>& b_perturbed);

struct PerturbationConfig {
  int retry_cap = 100;
};

/// Random perturbation B' with |b'_n - b_n| < radius passing injective_family_ok.
/// Throws Error if retry_cap draws all fail.
std::vector<Point> perturb_for_injectivity(const std::vector<Point>& a, const std::vector<Point>& b,
                                           double radius, std::uint64_t seed,
                                           const PerturbationConfig& cfg = {});

}  // namespace wflow
