#pragma once

// Checks of the one-sided Lipschitz (dissipativity) inequality
//   int <f0(x0) - f1(x1), x0 - x1> dgamma <= lambda int |x0 - x1|^2 dgamma
// where f_k = f(., mu_k), either on one optimal plan (metric) or on every
// coupling (total).

#include <cstdint>
#include <optional>

#include "wflow/fields.hpp"
#include "wflow/measures.hpp"

namespace wflow {

/// Left-hand side minus right-hand side of the inequality on the coupling gamma.
double coupling_gap(const VelocityField& f, const Coupling& gamma, double lambda);

/// coupling_gap on the optimal plan returned by w2_exact.
double metric_dissipativity_gap(const VelocityField& f, const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                double lambda);

struct DissipativityMode {
  enum class Kind {
    Exhaustive,  // all N! matchings of the expanded lists, N <= 8
    Sampled,     // `samples` seeded random matchings
    Assignment,  // exact maximum via one max-weight assignment
  };
  Kind kind = Kind::Exhaustive;
  std::size_t samples = 200;
  std::uint64_t seed = 0;

  static DissipativityMode exhaustive() { return {}; }
  static DissipativityMode sampled(std::size_t k, std::uint64_t seed) { return {Kind::Sampled, k, seed}; }
  static DissipativityMode assignment() { return {Kind::Assignment, 0, 0}; }
};

inline constexpr double kDissipativityTol = 1e-9;

struct TotalDissipativityReport {
  bool pass = true;
  double worst_gap = 0.0;
  std::optional<Coupling> witness;  // the worst coupling, set on failure
  std::size_t couplings_checked = 0;
};

/// The gap is linear in gamma, so its maximum over all couplings at the common
/// denominator is attained at a vertex of the (scaled) Birkhoff polytope, a
/// permutation coupling; the modes differ only in how permutations are visited.
TotalDissipativityReport total_dissipativity_check(const VelocityField& f, const DiscreteMeasure& mu0,
                                                   const DiscreteMeasure& mu1, double lambda,
                                                   const DissipativityMode& mode = {});

}  // namespace wflow
