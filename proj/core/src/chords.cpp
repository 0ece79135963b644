#include <cmath>
#include <random>

#include "wflow/error.hpp"
#include "wflow/transport.hpp"

namespace wflow {

namespace {

constexpr double kParallelTol = 1e-12;

void require_dim2(const std::vector<Point>& a, const std::vector<Point>& b, const char* who) {
  int d = -1;
  for (const auto* set : {&a, &b})
    for (const auto& p : *set) {
      if (d < 0) d = static_cast<int>(p.size());
      if (p.size() != d) throw DomainError(std::string(who) + ": inconsistent dimensions");
    }
  if (d >= 0 && d < 2) throw DomainError(std::string(who) + ": chord directions need dim >= 2");
}

std::vector<Point> unit_directions(const std::vector<Point>& a) {
  std::vector<Point> out;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      Point w = a[j] - a[i];
      const double n = w.norm();
      if (n > 0.0) out.push_back(w / n);
    }
  return out;
}

/// Largest 2x2 minor of the normalized pair (u, w).
double normalized_cross(const Point& u, const Point& w) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    for (Eigen::Index j = i + 1; j < u.size(); ++j) m = std::max(m, std::abs(u[i] * w[j] - u[j] * w[i]));
  return m;
}

/// Is there s in (0, 1] with c + s e in span(w)? (w unit, or empty for span{0}.)
bool hits_span(const Point& c, const Point& e, const Point* w) {
  auto project = [&](const Point& v) -> Point { return w ? Point(v - v.dot(*w) * *w) : v; };
  const Point pc = project(c);
  const Point pe = project(e);
  const double scale = c.norm() + e.norm();
  if (scale == 0.0) return true;
  const double pc_n = pc.norm(), pe_n = pe.norm();
  if (pe_n <= kParallelTol * scale) {
    // c + s e stays (anti)parallel to w for every s iff pc vanishes.
    return pc_n <= kParallelTol * scale;
  }
  if (pc_n <= kParallelTol * scale) return false;  // only s = 0 solves it
  const double s = -pc.dot(pe) / (pe_n * pe_n);
  if (!(s > 0.0 && s <= 1.0)) return false;
  const double residual = (pc + s * pe).norm();
  return residual <= kParallelTol * (c.norm() + s * e.norm());
}

}  // namespace

AlignmentReport check_chords_alignment(const std::vector<Point>& a, const std::vector<Point>& b) {
  require_dim2(a, b, "check_chords_alignment");
  AlignmentReport report;
  const auto dirs = unit_directions(a);
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = i + 1; j < b.size(); ++j) {
      const Point chord = b[j] - b[i];
      const double n = chord.norm();
      if (n == 0.0) continue;
      const Point u = chord / n;
      for (const auto& w : dirs) {
        if (normalized_cross(u, w) <= kParallelTol) {
          report.aligned = true;
          report.direction = w;
          report.chord = chord;
          return report;
        }
      }
    }
  return report;
}

bool injective_family_ok(const std::vector<Point>& a, const std::vector<Point>& b,
                         const std::vector<Point>& b_perturbed) {
  require_dim2(a, b, "injective_family_ok");
  if (b.size() != b_perturbed.size()) throw DomainError("injective_family_ok: size mismatch");
  const auto dirs = unit_directions(a);
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = i + 1; j < b.size(); ++j) {
      const Point c = b[j] - b[i];
      const Point e = (b_perturbed[j] - b[j]) - (b_perturbed[i] - b[i]);
      if (hits_span(c, e, nullptr)) return false;  // collision for some s
      for (const auto& w : dirs)
        if (hits_span(c, e, &w)) return false;
    }
  return true;
}

std::vector<Point> perturb_for_injectivity(const std::vector<Point>& a, const std::vector<Point>& b,
                                           double radius, std::uint64_t seed, const PerturbationConfig& cfg) {
  require_dim2(a, b, "perturb_for_injectivity");
  if (!(radius > 0.0)) throw DomainError("perturb_for_injectivity: radius must be positive");
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t j = i + 1; j < b.size(); ++j)
      if (b[i] == b[j]) throw DomainError("perturb_for_injectivity: B has coincident points");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int attempt = 0; attempt < cfg.retry_cap; ++attempt) {
    std::vector<Point> out = b;
    for (auto& p : out) {
      Point dir(p.size());
      for (Eigen::Index k = 0; k < dir.size(); ++k) dir[k] = gauss(rng);
      const double n = dir.norm();
      if (n == 0.0) continue;
      // uniform in the open ball of radius 0.99 * radius
      const double r = 0.99 * radius * std::pow(unif(rng), 1.0 / static_cast<double>(p.size()));
      p += (r / n) * dir;
    }
    if (injective_family_ok(a, b, out)) return out;
  }
  throw Error("perturb_for_injectivity: retry cap exhausted (degenerate configuration)");
}

}  // namespace wflow
