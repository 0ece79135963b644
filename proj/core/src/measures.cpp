#include "wflow/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wflow/error.hpp"

namespace wflow {

__extension__ using i128 = __int128;

bool lex_less(const Point& a, const Point& b) {
  const Eigen::Index d = std::min(a.size(), b.size());
  for (Eigen::Index k = 0; k < d; ++k) {
    if (a[k] < b[k]) return true;
    if (b[k] < a[k]) return false;
  }
  return a.size() < b.size();
}

namespace {

bool lex_equal(const Point& a, const Point& b) { return a.size() == b.size() && a == b; }

std::vector<std::size_t> lex_order(const std::vector<Point>& pts) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return lex_less(pts[a], pts[b]); });
  return idx;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<Point> atoms, std::vector<std::int64_t> multiplicities) {
  if (atoms.empty()) throw DomainError("DiscreteMeasure: no atoms");
  if (atoms.size() != multiplicities.size())
    throw DomainError("DiscreteMeasure: atoms and multiplicities differ in length");
  dim_ = static_cast<int>(atoms.front().size());
  if (dim_ < 1) throw DomainError("DiscreteMeasure: dimension must be >= 1");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].size() != dim_) throw DomainError("DiscreteMeasure: inconsistent atom dimension");
    if (!atoms[i].allFinite()) throw DomainError("DiscreteMeasure: non-finite atom coordinate");
    if (multiplicities[i] < 1) throw DomainError("DiscreteMeasure: multiplicities must be >= 1");
  }

  const auto order = lex_order(atoms);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (!atoms_.empty() && lex_equal(atoms_.back(), atoms[i])) {
      mult_.back() += multiplicities[i];
    } else {
      atoms_.push_back(std::move(atoms[i]));
      mult_.push_back(multiplicities[i]);
    }
  }
  denominator_ = std::accumulate(mult_.begin(), mult_.end(), std::int64_t{0});
}

DiscreteMeasure DiscreteMeasure::dirac(Point x) {
  std::vector<Point> atoms;
  atoms.push_back(std::move(x));
  return DiscreteMeasure(std::move(atoms), {1});
}

DiscreteMeasure DiscreteMeasure::empirical(std::vector<Point> points) {
  std::vector<std::int64_t> mult(points.size(), 1);
  return DiscreteMeasure(std::move(points), std::move(mult));
}

bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.denominator_ != b.denominator_ || a.atoms_.size() != b.atoms_.size()) return false;
  for (std::size_t i = 0; i < a.atoms_.size(); ++i) {
    if (a.mult_[i] != b.mult_[i] || !lex_equal(a.atoms_[i], b.atoms_[i])) return false;
  }
  return true;
}

bool same_law(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!lex_equal(a.atom(i), b.atom(i))) return false;
    // k_a / N_a == k_b / N_b, exact in 128-bit arithmetic
    const i128 lhs = static_cast<i128>(a.multiplicity(i)) * b.denominator();
    const i128 rhs = static_cast<i128>(b.multiplicity(i)) * a.denominator();
    if (lhs != rhs) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

LagrangianVector::LagrangianVector(Eigen::MatrixXd particles) : x_(std::move(particles)) {
  if (x_.rows() == 0 || x_.cols() == 0) throw DomainError("LagrangianVector: empty");
}

LagrangianVector LagrangianVector::from_points(std::span<const Point> points) {
  if (points.empty()) throw DomainError("LagrangianVector: empty");
  const auto d = points.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), d);
  for (std::size_t n = 0; n < points.size(); ++n) {
    if (points[n].size() != d) throw DomainError("LagrangianVector: inconsistent dimension");
    m.row(static_cast<Eigen::Index>(n)) = points[n].transpose();
  }
  return LagrangianVector(std::move(m));
}

double LagrangianVector::dot(const LagrangianVector& other) const {
  if (other.x_.rows() != x_.rows() || other.x_.cols() != x_.cols())
    throw DomainError("LagrangianVector: shape mismatch");
  return x_.cwiseProduct(other.x_).sum() / static_cast<double>(x_.rows());
}

double LagrangianVector::norm() const { return std::sqrt(squared_norm()); }

LagrangianVector LagrangianVector::permuted(std::span<const std::size_t> perm) const {
  if (perm.size() != size()) throw DomainError("LagrangianVector::permuted: bad permutation size");
  Eigen::MatrixXd m(x_.rows(), x_.cols());
  for (std::size_t n = 0; n < perm.size(); ++n)
    m.row(static_cast<Eigen::Index>(n)) = x_.row(static_cast<Eigen::Index>(perm[n]));
  return LagrangianVector(std::move(m));
}

LagrangianVector& LagrangianVector::operator+=(const LagrangianVector& o) {
  x_ += o.x_;
  return *this;
}
LagrangianVector& LagrangianVector::operator-=(const LagrangianVector& o) {
  x_ -= o.x_;
  return *this;
}
LagrangianVector& LagrangianVector::operator*=(double s) {
  x_ *= s;
  return *this;
}

double distance(const LagrangianVector& a, const LagrangianVector& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) throw DomainError("distance: shape mismatch");
  return std::sqrt((a.matrix() - b.matrix()).squaredNorm() / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------

namespace {

struct Grouping {
  std::vector<Point> means;
  std::vector<std::int64_t> counts;
  std::vector<std::size_t> group_of;  // particle -> group
};

Grouping group_particles(const LagrangianVector& x, double merge_eps) {
  const std::size_t n = x.size();
  std::vector<Point> pts(n);
  for (std::size_t k = 0; k < n; ++k) pts[k] = x.particle(k);
  const auto order = lex_order(pts);

  UnionFind uf(n);
  if (merge_eps <= 0.0) {
    for (std::size_t k = 1; k < n; ++k)
      if (lex_equal(pts[order[k - 1]], pts[order[k]])) uf.unite(order[k - 1], order[k]);
  } else {
    const double eps2 = merge_eps * merge_eps;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        const Point& pa = pts[order[a]];
        const Point& pb = pts[order[b]];
        if (pb[0] - pa[0] > merge_eps) break;
        if ((pa - pb).squaredNorm() <= eps2) uf.unite(order[a], order[b]);
      }
    }
  }

  // Groups numbered by their first member in lexicographic order; members are
  // summed in that same order so the mean does not depend on input order.
  Grouping g;
  g.group_of.assign(n, 0);
  std::vector<std::size_t> root_to_group(n, static_cast<std::size_t>(-1));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t p = order[k];
    const std::size_t r = uf.find(p);
    if (root_to_group[r] == static_cast<std::size_t>(-1)) {
      root_to_group[r] = g.means.size();
      g.means.push_back(Point::Zero(x.dim()));
      g.counts.push_back(0);
    }
    const std::size_t gi = root_to_group[r];
    g.means[gi] += pts[p];
    g.counts[gi] += 1;
    g.group_of[p] = gi;
  }
  for (std::size_t gi = 0; gi < g.means.size(); ++gi)
    if (g.counts[gi] > 1) g.means[gi] /= static_cast<double>(g.counts[gi]);
  // A group of identical particles maps to exactly that point, not to a
  // rounded mean.
  std::vector<std::size_t> first(g.means.size(), n);
  std::vector<char> identical(g.means.size(), 1);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t gi = g.group_of[p];
    if (first[gi] == n) first[gi] = p;
    else if (!lex_equal(pts[p], pts[first[gi]])) identical[gi] = 0;
  }
  for (std::size_t gi = 0; gi < g.means.size(); ++gi)
    if (identical[gi]) g.means[gi] = pts[first[gi]];
  return g;
}

}  // namespace

DiscreteMeasure iota_project(const LagrangianVector& x, double merge_eps) {
  auto g = group_particles(x, merge_eps);
  return DiscreteMeasure(std::move(g.means), std::move(g.counts));
}

std::vector<std::size_t> merge_groups(const LagrangianVector& x, double merge_eps) {
  auto g = group_particles(x, merge_eps);
  const DiscreteMeasure mu(g.means, g.counts);
  std::vector<std::size_t> labels(x.size());
  for (std::size_t p = 0; p < x.size(); ++p) {
    const Point& m = g.means[g.group_of[p]];
    const auto it = std::lower_bound(mu.atoms().begin(), mu.atoms().end(), m,
                                     [](const Point& a, const Point& b) { return lex_less(a, b); });
    labels[p] = static_cast<std::size_t>(it - mu.atoms().begin());
  }
  return labels;
}

LagrangianVector expand(const DiscreteMeasure& mu, std::int64_t n) {
  if (n <= 0 || n % mu.denominator() != 0)
    throw DomainError("expand: denominator " + std::to_string(mu.denominator()) +
                      " does not divide " + std::to_string(n));
  const std::int64_t scale = n / mu.denominator();
  Eigen::MatrixXd m(n, mu.dim());
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    for (std::int64_t c = 0; c < scale * mu.multiplicity(i); ++c) m.row(row++) = mu.atom(i).transpose();
  }
  return LagrangianVector(std::move(m));
}

std::int64_t common_denominator(std::int64_t a, std::int64_t b, std::int64_t bound) {
  if (a <= 0 || b <= 0) throw DomainError("common_denominator: nonpositive denominator");
  const std::int64_t g = std::gcd(a, b);
  const i128 l = static_cast<i128>(a / g) * b;
  if (l > bound)
    throw CapacityError("common denominator of " + std::to_string(a) + " and " + std::to_string(b) +
                        " exceeds bound " + std::to_string(bound));
  return static_cast<std::int64_t>(l);
}

// ---------------------------------------------------------------------------

Coupling::Coupling(DiscreteMeasure source, DiscreteMeasure target, MassMatrix mass,
                   std::int64_t lcm_bound)
    : source_(std::move(source)), target_(std::move(target)), mass_(std::move(mass)) {
  if (source_.dim() != target_.dim()) throw DomainError("Coupling: dimension mismatch");
  denominator_ = common_denominator(source_.denominator(), target_.denominator(), lcm_bound);
  if (mass_.rows() != static_cast<Eigen::Index>(source_.size()) ||
      mass_.cols() != static_cast<Eigen::Index>(target_.size()))
    throw DomainError("Coupling: mass matrix shape does not match the marginals");
  if ((mass_.array() < 0).any()) throw DomainError("Coupling: negative mass");
  const std::int64_t sr = denominator_ / source_.denominator();
  const std::int64_t tr = denominator_ / target_.denominator();
  for (Eigen::Index i = 0; i < mass_.rows(); ++i)
    if (mass_.row(i).sum() != sr * source_.multiplicity(static_cast<std::size_t>(i)))
      throw DomainError("Coupling: row sums do not reproduce the source marginal");
  for (Eigen::Index j = 0; j < mass_.cols(); ++j)
    if (mass_.col(j).sum() != tr * target_.multiplicity(static_cast<std::size_t>(j)))
      throw DomainError("Coupling: column sums do not reproduce the target marginal");
}

namespace {
std::vector<std::size_t> atom_index_of_particles(const DiscreteMeasure& mu, std::int64_t n) {
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(n));
  const std::int64_t scale = n / mu.denominator();
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::int64_t c = 0; c < scale * mu.multiplicity(i); ++c) out.push_back(i);
  return out;
}
}  // namespace

Coupling Coupling::from_matching(const DiscreteMeasure& source, const DiscreteMeasure& target,
                                 std::span<const std::size_t> sigma, std::int64_t lcm_bound) {
  const std::int64_t n = common_denominator(source.denominator(), target.denominator(), lcm_bound);
  if (static_cast<std::int64_t>(sigma.size()) != n)
    throw DomainError("Coupling::from_matching: matching has the wrong length");
  const auto src = atom_index_of_particles(source, n);
  const auto tgt = atom_index_of_particles(target, n);
  MassMatrix mass = MassMatrix::Zero(static_cast<Eigen::Index>(source.size()),
                                     static_cast<Eigen::Index>(target.size()));
  std::vector<char> used(sigma.size(), 0);
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    if (sigma[k] >= sigma.size() || used[sigma[k]])
      throw DomainError("Coupling::from_matching: not a permutation");
    used[sigma[k]] = 1;
    mass(static_cast<Eigen::Index>(src[k]), static_cast<Eigen::Index>(tgt[sigma[k]])) += 1;
  }
  return Coupling(source, target, std::move(mass), lcm_bound);
}

Coupling Coupling::identity(const DiscreteMeasure& mu) {
  const auto k = static_cast<Eigen::Index>(mu.size());
  MassMatrix mass = MassMatrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) mass(i, i) = mu.multiplicity(static_cast<std::size_t>(i));
  return Coupling(mu, mu, std::move(mass));
}

std::vector<Coupling::Entry> Coupling::support() const {
  std::vector<Entry> out;
  for (Eigen::Index i = 0; i < mass_.rows(); ++i)
    for (Eigen::Index j = 0; j < mass_.cols(); ++j)
      if (mass_(i, j) > 0)
        out.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), mass_(i, j)});
  return out;
}

double Coupling::cost() const {
  double c = 0.0;
  for (const auto& e : support())
    c += static_cast<double>(e.mass) * (source_.atom(e.i) - target_.atom(e.j)).squaredNorm();
  return c / static_cast<double>(denominator_);
}

DiscreteMeasure interpolate(const Coupling& gamma, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("interpolate: t must lie in [0, 1]");
  if (t == 0.0) return gamma.source();
  if (t == 1.0) return gamma.target();
  std::vector<Point> atoms;
  std::vector<std::int64_t> mult;
  for (const auto& e : gamma.support()) {
    atoms.push_back((1.0 - t) * gamma.source().atom(e.i) + t * gamma.target().atom(e.j));
    mult.push_back(e.mass);
  }
  return DiscreteMeasure(std::move(atoms), std::move(mult));
}

MeasureStats measure_stats(const DiscreteMeasure& mu) {
  MeasureStats s;
  s.mean = Point::Zero(mu.dim());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    s.second_moment += mu.weight(i) * mu.atom(i).squaredNorm();
    s.mean += mu.weight(i) * mu.atom(i);
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = i + 1; j < mu.size(); ++j) d2 = std::max(d2, (mu.atom(i) - mu.atom(j)).squaredNorm());
  s.diameter = std::sqrt(d2);
  s.support_cardinality = mu.size();
  return s;
}

double pairwise_second_moment(const DiscreteMeasure& mu) {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < mu.size(); ++j)
      acc += mu.weight(i) * mu.weight(j) * (mu.atom(i) - mu.atom(j)).squaredNorm();
  return acc;
}

}  // namespace wflow
