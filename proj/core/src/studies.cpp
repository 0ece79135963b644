#include <algorithm>
#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "wflow/error.hpp"
#include "wflow/flows.hpp"
#include "wflow/transport.hpp"

namespace wflow {

namespace {

// Image of mu0 under a time-dependent affine map of the atoms.
template <class Map>
ReferenceFlow push_atoms(const DiscreteMeasure& mu0, Map map) {
  return [mu0, map](double t) {
    std::vector<Point> atoms;
    atoms.reserve(mu0.size());
    for (const auto& x : mu0.atoms()) atoms.push_back(map(x, t));
    return DiscreteMeasure(std::move(atoms), mu0.multiplicities());
  };
}

Point mean_of(const DiscreteMeasure& mu) {
  Point m = Point::Zero(mu.dim());
  for (std::size_t i = 0; i < mu.size(); ++i) m += mu.weight(i) * mu.atom(i);
  return m;
}

}  // namespace

ReferenceFlow linear_reference(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const DiscreteMeasure& mu0) {
  const auto d = a.rows();
  if (a.cols() != d || b.size() != d || d != mu0.dim()) throw DomainError("linear_reference: shape mismatch");
  // exp(t [[A, b], [0, 0]]) carries the affine part along.
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(d + 1, d + 1);
  aug.topLeftCorner(d, d) = a;
  aug.topRightCorner(d, 1) = b;
  return push_atoms(mu0, [aug, d](const Point& x, double t) -> Point {
    const Eigen::MatrixXd e = (t * aug).exp();
    return e.topLeftCorner(d, d) * x + e.topRightCorner(d, 1);
  });
}

ReferenceFlow barycentric_reference(double a, const Point& v0, const DiscreteMeasure& mu0) {
  if (v0.size() != mu0.dim()) throw DomainError("barycentric_reference: dimension mismatch");
  const Point m0 = mean_of(mu0);
  return push_atoms(mu0, [a, v0, m0](const Point& x, double t) -> Point {
    return m0 + t * v0 + std::exp(-a * t) * (x - m0);
  });
}

ReferenceFlow pw_quadratic_reference(double a_p, double a_w, const DiscreteMeasure& mu0) {
  const Point m0 = mean_of(mu0);
  return push_atoms(mu0, [a_p, a_w, m0](const Point& x, double t) -> Point {
    return std::exp(-a_p * t) * m0 + std::exp(-(a_p + a_w) * t) * (x - m0);
  });
}

ErrorStudy implicit_error_study(const VelocityField& f, const DiscreteMeasure& mu0, double t,
                                const std::vector<std::size_t>& n_list, const ReferenceFlow& reference,
                                const EvolveOptions& opts) {
  if (!(t > 0.0)) throw DomainError("implicit_error_study: t must be positive");
  if (n_list.empty()) throw DomainError("implicit_error_study: empty n list");
  DiscreteMeasure exact = mu0;
  if (reference) {
    exact = reference(t);
  } else {
    const std::size_t n_max = *std::max_element(n_list.begin(), n_list.end());
    const double tau_ref = t / static_cast<double>(n_max) / 100.0;
    exact = evolve(f, mu0, Scheme::implicit(tau_ref), t, opts).final_measure();
  }
  const double f_norm = eval_on_measure(f, mu0).l2_norm;
  ErrorStudy out;
  for (const std::size_t n : n_list) {
    if (n == 0) throw DomainError("implicit_error_study: n must be positive");
    const auto approx = evolve(f, mu0, Scheme::exponential(n), t, opts).final_measure();
    ErrorStudyRow row;
    row.n = n;
    row.error = w2_exact(approx, exact).distance;
    row.bound = 2.0 * t * f_norm / std::sqrt(static_cast<double>(n));
    row.pass = row.error <= row.bound;
    out.pass = out.pass && row.pass;
    out.rows.push_back(row);
  }
  return out;
}

MeasureSampler atom_jitter_sampler(const DiscreteMeasure& mu0, double jitter) {
  if (jitter < 0.0) throw DomainError("atom_jitter_sampler: negative jitter");
  return [mu0, jitter](std::size_t n, std::uint64_t seed) {
    if (n == 0) throw DomainError("sampler: N must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Point> pts;
    pts.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      // atom i with probability mult_i / denominator
      const auto r = static_cast<std::int64_t>(unif(rng) * static_cast<double>(mu0.denominator()));
      std::int64_t acc = 0;
      std::size_t i = 0;
      for (; i + 1 < mu0.size(); ++i) {
        acc += mu0.multiplicity(i);
        if (r < acc) break;
      }
      Point x = mu0.atom(i);
      if (jitter > 0.0) {
        Point dir(mu0.dim());
        for (int c = 0; c < mu0.dim(); ++c) dir(c) = gauss(rng);
        const double nd = dir.norm();
        const double rad = jitter * std::pow(unif(rng), 1.0 / mu0.dim());
        if (nd > 0.0) x += rad / nd * dir;
      }
      pts.push_back(std::move(x));
    }
    return DiscreteMeasure::empirical(std::move(pts));
  };
}

MeanFieldStudy mean_field_study(const VelocityField& f, const DiscreteMeasure& mu0, const MeasureSampler& sampler,
                                const std::vector<std::size_t>& n_list, const std::vector<std::uint64_t>& seeds,
                                double t, double lambda, const Scheme& scheme, double slack,
                                const EvolveOptions& opts) {
  if (!sampler) throw DomainError("mean_field_study: no sampler");
  const auto reference = evolve(f, mu0, scheme, t, opts).final_measure();
  MeanFieldStudy out;
  for (const std::size_t n : n_list)
    for (const std::uint64_t seed : seeds) {
      const auto sample = sampler(n, seed);
      MeanFieldRow row;
      row.n = n;
      row.seed = seed;
      row.initial_error = w2_exact(sample, mu0).distance;
      row.final_error = w2_exact(evolve(f, sample, scheme, t, opts).final_measure(), reference).distance;
      row.bound = std::exp(lambda * t) * row.initial_error + slack;
      row.pass = row.final_error <= row.bound;
      out.pass = out.pass && row.pass;
      out.rows.push_back(row);
    }
  return out;
}

}  // namespace wflow
