#include "wflow/dissipativity.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "wflow/assignment.hpp"
#include "wflow/error.hpp"
#include "wflow/transport.hpp"

namespace wflow {

double coupling_gap(const VelocityField& f, const Coupling& gamma, double lambda) {
  const auto v0 = eval_on_measure(f, gamma.source()).velocities;
  const auto v1 = eval_on_measure(f, gamma.target()).velocities;
  double gap = 0.0;
  for (const auto& e : gamma.support()) {
    const Point dx = gamma.source().atom(e.i) - gamma.target().atom(e.j);
    gap += static_cast<double>(e.mass) * ((v0[e.i] - v1[e.j]).dot(dx) - lambda * dx.squaredNorm());
  }
  return gap / static_cast<double>(gamma.denominator());
}

double metric_dissipativity_gap(const VelocityField& f, const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                double lambda) {
  return coupling_gap(f, w2_exact(mu0, mu1).plan, lambda);
}

TotalDissipativityReport total_dissipativity_check(const VelocityField& f, const DiscreteMeasure& mu0,
                                                   const DiscreteMeasure& mu1, double lambda,
                                                   const DissipativityMode& mode) {
  if (mu0.dim() != mu1.dim()) throw DomainError("total_dissipativity_check: dimension mismatch");
  const std::int64_t n = common_denominator(mu0.denominator(), mu1.denominator());
  if (mode.kind == DissipativityMode::Kind::Exhaustive && n > 8)
    throw CapacityError("total_dissipativity_check: exhaustive mode needs common denominator <= 8, got " +
                        std::to_string(n));

  const auto x = expand(mu0, n);
  const auto y = expand(mu1, n);
  const auto v0 = eval_on_measure(f, mu0).velocities;
  const auto v1 = eval_on_measure(f, mu1).velocities;
  // expanded particle -> atom velocity
  auto spread = [n](const DiscreteMeasure& mu, const std::vector<Point>& v) {
    std::vector<Point> out;
    const std::int64_t scale = n / mu.denominator();
    for (std::size_t i = 0; i < mu.size(); ++i)
      for (std::int64_t c = 0; c < scale * mu.multiplicity(i); ++c) out.push_back(v[i]);
    return out;
  };
  const auto vx = spread(mu0, v0);
  const auto vy = spread(mu1, v1);

  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd g(nn, nn);
  for (Eigen::Index a = 0; a < nn; ++a)
    for (Eigen::Index b = 0; b < nn; ++b) {
      const Point dx = x.particle(static_cast<std::size_t>(a)) - y.particle(static_cast<std::size_t>(b));
      g(a, b) = (vx[static_cast<std::size_t>(a)] - vy[static_cast<std::size_t>(b)]).dot(dx) - lambda * dx.squaredNorm();
    }
  auto gap_of = [&](const std::vector<std::size_t>& sigma) {
    double s = 0.0;
    for (std::size_t k = 0; k < sigma.size(); ++k) s += g(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(sigma[k]));
    return s / static_cast<double>(n);
  };

  TotalDissipativityReport report;
  report.worst_gap = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> sigma(static_cast<std::size_t>(n)), worst;
  std::iota(sigma.begin(), sigma.end(), std::size_t{0});
  auto visit = [&](const std::vector<std::size_t>& s) {
    const double gap = gap_of(s);
    ++report.couplings_checked;
    if (gap > report.worst_gap) {
      report.worst_gap = gap;
      worst = s;
    }
  };

  switch (mode.kind) {
    case DissipativityMode::Kind::Exhaustive:
      do visit(sigma);
      while (std::next_permutation(sigma.begin(), sigma.end()));
      break;
    case DissipativityMode::Kind::Sampled: {
      std::mt19937_64 rng(mode.seed);
      for (std::size_t k = 0; k < std::max<std::size_t>(mode.samples, 1); ++k) {
        std::shuffle(sigma.begin(), sigma.end(), rng);
        visit(sigma);
      }
      break;
    }
    case DissipativityMode::Kind::Assignment: {
      const auto sol = solve_assignment(-g);
      visit(sol.row_to_col);
      break;
    }
  }

  report.pass = report.worst_gap <= kDissipativityTol;
  if (!report.pass) report.witness = Coupling::from_matching(mu0, mu1, worst);
  return report;
}

}  // namespace wflow
