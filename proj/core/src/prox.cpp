#include "prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "wflow/error.hpp"

namespace wflow::detail {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;

// Profile with the abs kink optionally replaced by the pseudo-Huber
// a (sqrt(|z|^2 + eps^2) - eps).
struct Smoothed {
  const Profile& p;
  double eps;

  bool huber() const { return p.kind() == ProfileKind::Abs && eps > 0.0; }

  double value(const Point& z) const {
    if (!huber()) return p.value(z);
    return p.coef() * (std::sqrt(z.squaredNorm() + eps * eps) - eps);
  }
  Point gradient(const Point& z) const {
    if (!huber()) return p.gradient(z);
    return p.coef() / std::sqrt(z.squaredNorm() + eps * eps) * z;
  }
  MatrixXd hessian(const Point& z) const {
    if (!huber()) return p.hessian(z);
    const double r = std::sqrt(z.squaredNorm() + eps * eps);
    const auto d = z.size();
    return p.coef() * (MatrixXd::Identity(d, d) / r - z * z.transpose() / (r * r * r));
  }
};

// Clustered proximal problem. Cluster k carries m_k particles at a common
// position z_k and the mean target ybar_k; pinned clusters sit at the origin.
//   G(Z) = sum_k m_k (|z_k - ybar_k|^2 / (2 tau) + P(z_k))
//        + (1/N) sum_{k<l} m_k m_l W(z_k - z_l)
struct Reduced {
  double tau;
  double n_total;
  std::vector<double> mass;
  MatrixXd target;
  std::vector<bool> pinned;
  Smoothed pot, inter;

  Index clusters() const { return target.rows(); }
  Index dim() const { return target.cols(); }

  double value(const MatrixXd& z) const {
    double g = 0.0;
    for (Index k = 0; k < clusters(); ++k) {
      const Point zk = z.row(k).transpose();
      g += mass[k] * ((zk - target.row(k).transpose()).squaredNorm() / (2.0 * tau) + pot.value(zk));
      for (Index l = k + 1; l < clusters(); ++l)
        g += mass[k] * mass[l] / n_total * inter.value(zk - z.row(l).transpose());
    }
    return g;
  }

  MatrixXd gradient(const MatrixXd& z) const {
    MatrixXd g(clusters(), dim());
    for (Index k = 0; k < clusters(); ++k) {
      const Point zk = z.row(k).transpose();
      g.row(k) = (mass[k] * ((zk - target.row(k).transpose()) / tau + pot.gradient(zk))).transpose();
    }
    for (Index k = 0; k < clusters(); ++k)
      for (Index l = k + 1; l < clusters(); ++l) {
        const Point w = mass[k] * mass[l] / n_total * inter.gradient((z.row(k) - z.row(l)).transpose());
        g.row(k) += w.transpose();
        g.row(l) -= w.transpose();
      }
    for (Index k = 0; k < clusters(); ++k)
      if (pinned[k]) g.row(k).setZero();
    return g;
  }

  MatrixXd hessian(const MatrixXd& z) const {
    const Index d = dim(), kk = clusters();
    MatrixXd h = MatrixXd::Zero(kk * d, kk * d);
    for (Index k = 0; k < kk; ++k) {
      h.block(k * d, k * d, d, d) +=
          mass[k] * (MatrixXd::Identity(d, d) / tau + pot.hessian(z.row(k).transpose()));
      for (Index l = k + 1; l < kk; ++l) {
        const MatrixXd w = mass[k] * mass[l] / n_total * inter.hessian((z.row(k) - z.row(l)).transpose());
        h.block(k * d, k * d, d, d) += w;
        h.block(l * d, l * d, d, d) += w;
        h.block(k * d, l * d, d, d) -= w;
        h.block(l * d, k * d, d, d) -= w;
      }
    }
    for (Index k = 0; k < kk; ++k)
      if (pinned[k]) {
        h.middleRows(k * d, d).setZero();
        h.middleCols(k * d, d).setZero();
        h.block(k * d, k * d, d, d).setIdentity();
      }
    return h;
  }

  // tau * sqrt((1/N) sum_k |g_k|^2 / m_k): the weighted stationarity defect.
  double defect(const MatrixXd& g) const {
    double s = 0.0;
    for (Index k = 0; k < clusters(); ++k) s += g.row(k).squaredNorm() / mass[k];
    return tau * std::sqrt(s / n_total);
  }
};

void flatten_into(const MatrixXd& m, Eigen::VectorXd& v) {
  v.resize(m.size());
  for (Index r = 0; r < m.rows(); ++r) v.segment(r * m.cols(), m.cols()) = m.row(r).transpose();
}

MatrixXd unflatten(const Eigen::VectorXd& v, Index rows, Index cols) {
  MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r) m.row(r) = v.segment(r * cols, cols).transpose();
  return m;
}

// Damped Newton on a strictly convex G. Returns the final stationarity defect.
double newton(const Reduced& prob, MatrixXd& z, double tol, int max_iter) {
  for (Index k = 0; k < prob.clusters(); ++k)
    if (prob.pinned[k]) z.row(k).setZero();
  MatrixXd g = prob.gradient(z);
  double defect = prob.defect(g);
  double value = prob.value(z);
  // A wrong contact pattern leaves G nonsmooth and Newton crawls; give up
  // once the defect stops halving.
  double anchor = defect;
  int stalled = 0;
  for (int it = 0; it < max_iter && defect > tol && stalled < 25; ++it) {
    Eigen::VectorXd gv, step;
    flatten_into(g, gv);
    const MatrixXd h = prob.hessian(z);
    Eigen::LLT<MatrixXd> llt(h);
    if (llt.info() == Eigen::Success) {
      step = -llt.solve(gv);
    } else {
      step = -h.fullPivLu().solve(gv);
    }
    const MatrixXd dz = unflatten(step, z.rows(), z.cols());
    const double slope = gv.dot(step);
    double alpha = 1.0;
    bool moved = false;
    while (alpha > 1e-12) {
      const MatrixXd trial = z + alpha * dz;
      const double tv = prob.value(trial);
      const MatrixXd tg = prob.gradient(trial);
      const double td = prob.defect(tg);
      // Armijo on G, or plain defect decrease once G is flat to rounding.
      if (tv <= value + 1e-4 * alpha * slope || (td < defect && tv <= value + 1e-14 * (1.0 + std::abs(value)))) {
        z = trial;
        g = tg;
        value = tv;
        defect = td;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
    if (defect <= 0.5 * anchor) {
      anchor = defect;
      stalled = 0;
    } else {
      ++stalled;
    }
  }
  return defect;
}

// Groups of row indices with identical rows.
std::vector<std::vector<Index>> exact_groups(const MatrixXd& x) {
  const auto labels = merge_groups(LagrangianVector(x), 0.0);
  const std::size_t k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<Index>> groups(k);
  for (std::size_t n = 0; n < labels.size(); ++n) groups[labels[n]].push_back(static_cast<Index>(n));
  return groups;
}

// min over s_ab (|s| <= 1, antisymmetric) and p_a (|p| <= rp) of
//   sum_a |q_a + p_a + c sum_b s_ab|^2 on one group; FISTA on the dual-free form.
double group_min_norm(const std::vector<Point>& q, double c, double rp) {
  const std::size_t m = q.size();
  const Index d = q.front().size();
  const bool pin = rp > 0.0;
  const bool couple = c > 0.0 && m > 1;
  if (!couple) {
    double s = 0.0;
    for (const auto& qa : q) {
      const double r = pin ? std::max(0.0, qa.norm() - rp) : qa.norm();
      s += r * r;
    }
    return s;
  }

  auto ball = [](Point v, double r) {
    const double nv = v.norm();
    if (nv > r) v *= r / nv;
    return v;
  };
  auto idx = [m](std::size_t a, std::size_t b) { return a * m + b; };  // a < b

  std::vector<Point> s(m * m, Point::Zero(d)), p(m, Point::Zero(d));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      s[idx(a, b)] = ball((q[b] - q[a]) / (c * static_cast<double>(m)), 1.0);

  auto residuals = [&](const std::vector<Point>& ss, const std::vector<Point>& pp) {
    std::vector<Point> e(q);
    for (std::size_t a = 0; a < m; ++a) {
      if (pin) e[a] += pp[a];
      for (std::size_t b = a + 1; b < m; ++b) {
        e[a] += c * ss[idx(a, b)];
        e[b] -= c * ss[idx(a, b)];
      }
    }
    return e;
  };
  auto objective = [](const std::vector<Point>& e) {
    double t = 0.0;
    for (const auto& v : e) t += v.squaredNorm();
    return t;
  };

  double qmax = 0.0;
  for (const auto& qa : q) qmax = std::max(qmax, qa.norm());
  const double stop = std::pow(1e-14 * (1.0 + qmax), 2);

  double best = objective(residuals(s, p));
  if (best <= stop) return best;

  const double lip_root = c * std::sqrt(static_cast<double>(m)) + (pin ? 1.0 : 0.0);
  const double step = 1.0 / (lip_root * lip_root);
  std::vector<Point> ys(s), yp(p), s_prev(s), p_prev(p);
  double t = 1.0;
  for (int it = 0; it < 20000; ++it) {
    const auto e = residuals(ys, yp);
    s_prev = s;
    p_prev = p;
    for (std::size_t a = 0; a < m; ++a) {
      if (pin) p[a] = ball(yp[a] - step * e[a], rp);
      for (std::size_t b = a + 1; b < m; ++b)
        s[idx(a, b)] = ball(ys[idx(a, b)] - step * c * (e[a] - e[b]), 1.0);
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_next;
    for (std::size_t k = 0; k < s.size(); ++k) ys[k] = s[k] + mom * (s[k] - s_prev[k]);
    for (std::size_t a = 0; a < m; ++a) yp[a] = p[a] + mom * (p[a] - p_prev[a]);
    t = t_next;
    if (it % 50 == 0) {
      best = std::min(best, objective(residuals(s, p)));
      if (best <= stop) break;
    }
  }
  return std::min(best, objective(residuals(s, p)));
}

MatrixXd expand_clusters(const MatrixXd& z, const std::vector<std::vector<Index>>& groups, Index n) {
  MatrixXd x(n, z.cols());
  for (std::size_t k = 0; k < groups.size(); ++k)
    for (Index i : groups[k]) x.row(i) = z.row(static_cast<Index>(k));
  return x;
}

struct Attempt {
  MatrixXd x;
  double residual = std::numeric_limits<double>::infinity();
};

Attempt solve_clustered(const Functional& phi, double tau, const MatrixXd& y,
                        const std::vector<std::vector<Index>>& groups, const std::vector<bool>& pinned,
                        const MatrixXd& z0, double tol, int max_iter) {
  const Index n = y.rows(), d = y.cols();
  Reduced prob{tau, static_cast<double>(n), {}, MatrixXd(static_cast<Index>(groups.size()), d), pinned,
               Smoothed{phi.potential(), 0.0}, Smoothed{phi.interaction(), 0.0}};
  for (std::size_t k = 0; k < groups.size(); ++k) {
    Point mean = Point::Zero(d);
    for (Index i : groups[k]) mean += y.row(i).transpose();
    prob.mass.push_back(static_cast<double>(groups[k].size()));
    prob.target.row(static_cast<Index>(k)) = (mean / prob.mass.back()).transpose();
  }
  MatrixXd z = z0;
  newton(prob, z, 1e-3 * tol, max_iter);
  Attempt out;
  out.x = expand_clusters(z, groups, n);
  out.residual = prox_residual(phi, tau, out.x, y);
  return out;
}

}  // namespace

double prox_residual(const Functional& phi, double tau, const MatrixXd& x, const MatrixXd& y) {
  const Index n = x.rows();
  const MatrixXd q = (x - y) / tau - phi.particle_field(x);
  const double c =
      phi.interaction().kind() == ProfileKind::Abs ? phi.interaction().coef() / static_cast<double>(n) : 0.0;
  const double rp = phi.potential().kind() == ProfileKind::Abs ? phi.potential().coef() : 0.0;

  double total = 0.0;
  for (const auto& group : exact_groups(x)) {
    std::vector<Point> qs;
    qs.reserve(group.size());
    for (Index i : group) qs.push_back(q.row(i).transpose());
    const bool at_origin = x.row(group.front()).isZero(0.0);
    total += group_min_norm(qs, c, at_origin ? rp : 0.0);
  }
  return tau * std::sqrt(total / static_cast<double>(n));
}

MatrixXd prox_solve(const Functional& phi, double tau, const MatrixXd& y, const SolverConfig& cfg) {
  const Index n = y.rows(), d = y.cols();
  const int newton_iter = std::clamp(cfg.max_iter, 1, 200);
  const bool pot_abs = phi.potential().kind() == ProfileKind::Abs && phi.potential().coef() > 0.0;

  auto singletons = [n] {
    std::vector<std::vector<Index>> g(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = {i};
    return g;
  };

  if (phi.smooth()) {
    const auto a = solve_clustered(phi, tau, y, singletons(), std::vector<bool>(static_cast<std::size_t>(n), false),
                                   y, cfg.tol, newton_iter);
    if (a.residual <= cfg.tol) return a.x;
    throw ConvergenceError("prox: Newton did not reach tolerance", a.residual);
  }

  auto clusters_of = [&](const MatrixXd& x, double theta) {
    const auto labels = merge_groups(LagrangianVector(x), theta);
    const std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<Index>> groups(k);
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(static_cast<Index>(i));
    std::vector<bool> pinned(k, false);
    MatrixXd z(static_cast<Index>(k), d);
    for (std::size_t g = 0; g < k; ++g) {
      Point mean = Point::Zero(d);
      for (Index i : groups[g]) mean += x.row(i).transpose();
      mean /= static_cast<double>(groups[g].size());
      pinned[g] = pot_abs && mean.norm() <= theta;
      if (pinned[g]) mean.setZero();
      z.row(static_cast<Index>(g)) = mean.transpose();
    }
    return std::tuple{groups, pinned, z};
  };

  Attempt best;
  auto consider = [&](Attempt a) {
    if (a.residual < best.residual) best = std::move(a);
    return best.residual <= cfg.tol;
  };

  // The clusters already present in Y usually survive one step.
  {
    auto [groups, pinned, z] = clusters_of(y, 0.0);
    if (consider(solve_clustered(phi, tau, y, groups, pinned, z, cfg.tol, newton_iter))) return best.x;
  }

  // Continuation on a smoothed kink, then guess the contact set from the
  // smoothed minimizer and polish on the reduced problem.
  const double scale = 1.0 + y.cwiseAbs().maxCoeff();
  MatrixXd x = best.x;
  Reduced smooth{tau, static_cast<double>(n), std::vector<double>(static_cast<std::size_t>(n), 1.0), y,
                 std::vector<bool>(static_cast<std::size_t>(n), false), Smoothed{phi.potential(), 0.0},
                 Smoothed{phi.interaction(), 0.0}};
  std::vector<std::size_t> last_labels;
  for (int k = 1; k <= 10; ++k) {
    const double eps = scale * std::pow(10.0, -k);
    smooth.pot.eps = eps;
    smooth.inter.eps = eps;
    // The smoothed minimizer is within O(eps) of the true one; solving it
    // further only costs iterations.
    newton(smooth, x, std::max(1e-3 * cfg.tol, 1e-3 * eps), newton_iter);
  }
  for (int k = -10; k <= -2; ++k) {
    const double theta = scale * std::pow(10.0, k);
    auto [groups, pinned, z] = clusters_of(x, theta);
    auto labels = merge_groups(LagrangianVector(x), theta);
    if (labels == last_labels && !pot_abs) continue;
    last_labels = std::move(labels);
    if (consider(solve_clustered(phi, tau, y, groups, pinned, z, cfg.tol, newton_iter))) return best.x;
  }
  throw ConvergenceError("prox: no contact pattern met the tolerance", best.residual);
}

}  // namespace wflow::detail
