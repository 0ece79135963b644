#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "wflow/measures.hpp"

namespace testutil {

inline wflow::Point pt(std::initializer_list<double> xs) {
  wflow::Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p(i++) = x;
  return p;
}

inline wflow::Point pt1(double x) { return pt({x}); }

/// Random measure with `atoms` atoms on an integer grid scaled by 0.5 plus a
/// small jitter, multiplicities summing to `denominator`.
inline wflow::DiscreteMeasure random_measure(std::mt19937_64& rng, int dim, std::int64_t denominator,
                                             std::size_t max_atoms = 8, bool jitter = true) {
  std::uniform_int_distribution<int> coord(-4, 4);
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  const auto atoms = std::uniform_int_distribution<std::size_t>(
      1, std::min<std::size_t>(max_atoms, static_cast<std::size_t>(denominator)))(rng);
  std::vector<std::int64_t> mult(atoms, 1);
  for (std::int64_t extra = denominator - static_cast<std::int64_t>(atoms); extra > 0; --extra)
    ++mult[std::uniform_int_distribution<std::size_t>(0, atoms - 1)(rng)];
  std::vector<wflow::Point> pts;
  for (std::size_t i = 0; i < atoms; ++i) {
    wflow::Point p(dim);
    for (int c = 0; c < dim; ++c) p(c) = 0.5 * coord(rng) + (jitter ? small(rng) : 0.0);
    pts.push_back(p);
  }
  return wflow::DiscreteMeasure(std::move(pts), std::move(mult));
}

inline wflow::LagrangianVector random_particles(std::mt19937_64& rng, std::size_t n, int dim, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return wflow::LagrangianVector(m);
}

}  // namespace testutil
