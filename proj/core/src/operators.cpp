#include "wflow/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/LU>

#include "prox.hpp"
#include "wflow/error.hpp"

namespace wflow {

using Eigen::Index;
using Eigen::MatrixXd;

namespace {

// Solvers and field evaluations run on the rows sorted lexicographically, and
// rows that coincide in the input get identical outputs. Together this makes
// every map below exactly permutation equivariant, not just up to rounding.
struct Canonical {
  std::vector<Index> order;  // sorted position k holds input row order[k]
  std::vector<Index> run;    // first sorted position of k's block of equal rows

  explicit Canonical(const MatrixXd& x) : order(static_cast<std::size_t>(x.rows())), run(order.size()) {
    std::iota(order.begin(), order.end(), Index{0});
    auto row_less = [&x](Index a, Index b) {
      for (Index c = 0; c < x.cols(); ++c)
        if (x(a, c) != x(b, c)) return x(a, c) < x(b, c);
      return false;
    };
    std::stable_sort(order.begin(), order.end(), row_less);
    for (std::size_t k = 0; k < order.size(); ++k)
      run[k] = k > 0 && x.row(order[k]) == x.row(order[k - 1]) ? run[k - 1] : static_cast<Index>(k);
  }

  MatrixXd sorted(const MatrixXd& x) const {
    MatrixXd s(x.rows(), x.cols());
    for (std::size_t k = 0; k < order.size(); ++k) s.row(static_cast<Index>(k)) = x.row(order[k]);
    return s;
  }

  MatrixXd restore(const MatrixXd& s) const {
    MatrixXd x(s.rows(), s.cols());
    for (std::size_t k = 0; k < order.size(); ++k) x.row(order[k]) = s.row(run[k]);
    return x;
  }
};

}  // namespace

LagrangianOperator::LagrangianOperator(VelocityField f) : field_(std::move(f)) {}

LagrangianVector LagrangianOperator::apply(const LagrangianVector& x) const {
  const Canonical canon(x.matrix());
  return LagrangianVector(canon.restore(field_.apply_particles(canon.sorted(x.matrix()))));
}

double LagrangianOperator::max_step() const noexcept {
  const double l = lambda();
  return l > 0.0 ? 1.0 / l : std::numeric_limits<double>::infinity();
}

void LagrangianOperator::check_step(double tau) const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("step size must be positive and finite");
  if (!(tau < max_step()))
    throw DomainError("step size " + std::to_string(tau) + " must be below 1/lambda = " + std::to_string(max_step()));
}

namespace {

double weighted_norm(const MatrixXd& m) { return std::sqrt(m.squaredNorm() / static_cast<double>(m.rows())); }

MatrixXd fixed_point(const LagrangianOperator& b, double tau, const MatrixXd& y, const SolverConfig& cfg, double q) {
  // Contraction X -> Y + tau B X with factor q: |X_k - X*| <= q/(1-q) |X_k - X_{k-1}|.
  const double stop = cfg.tol * (1.0 - q) / std::max(q, 1e-16);
  MatrixXd x = y;
  double delta = 0.0;
  for (int it = 0; it < cfg.max_iter; ++it) {
    MatrixXd next = y + tau * b.field().apply_particles(x);
    delta = weighted_norm(next - x);
    x = std::move(next);
    if (delta <= stop) return x;
  }
  throw ConvergenceError("resolvent: fixed-point iteration did not converge", delta * q / (1.0 - q));
}

MatrixXd newton_fd(const LagrangianOperator& b, double tau, const MatrixXd& y, const SolverConfig& cfg) {
  const Index n = y.rows(), d = y.cols(), dim = n * d;
  auto residual = [&](const MatrixXd& x) -> MatrixXd { return x - tau * b.field().apply_particles(x) - y; };
  auto flat = [&](const MatrixXd& m) {
    Eigen::VectorXd v(dim);
    for (Index r = 0; r < n; ++r) v.segment(r * d, d) = m.row(r).transpose();
    return v;
  };
  MatrixXd x = y;
  MatrixXd r = residual(x);
  double res = weighted_norm(r);
  const int max_iter = std::clamp(cfg.max_iter, 1, 200);
  for (int it = 0; it < max_iter && res > cfg.tol; ++it) {
    MatrixXd jac(dim, dim);
    for (Index k = 0; k < dim; ++k) {
      MatrixXd xp = x;
      const double h = 1e-7 * (1.0 + std::abs(x(k / d, k % d)));
      xp(k / d, k % d) += h;
      jac.col(k) = flat(residual(xp) - r) / h;
    }
    const Eigen::VectorXd step = -jac.partialPivLu().solve(flat(r));
    MatrixXd dx(n, d);
    for (Index row = 0; row < n; ++row) dx.row(row) = step.segment(row * d, d).transpose();
    double alpha = 1.0;
    bool moved = false;
    while (alpha > 1e-10) {
      MatrixXd trial = x + alpha * dx;
      MatrixXd tr = residual(trial);
      const double tres = weighted_norm(tr);
      if (tres < (1.0 - 1e-4 * alpha) * res || (alpha == 1.0 && tres < res)) {
        x = std::move(trial);
        r = std::move(tr);
        res = tres;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
  }
  if (res > cfg.tol) throw ConvergenceError("resolvent: Newton iteration did not converge", res);
  return x;
}

}  // namespace

namespace {

MatrixXd solve_resolvent(const LagrangianOperator& b, double tau, const MatrixXd& y, const SolverConfig& cfg) {
  using M = SolverConfig::Method;
  M method = cfg.method;
  const double q = b.lip() ? tau * *b.lip() : std::numeric_limits<double>::infinity();
  if (method == M::Auto) {
    if (b.prox_functional() != nullptr)
      method = M::Prox;
    else if (q <= 0.25)
      method = M::FixedPoint;
    else
      method = M::Newton;
  }
  switch (method) {
    case M::Prox:
      if (b.prox_functional() == nullptr) throw DomainError("resolvent: prox solver needs a functional");
      return detail::prox_solve(*b.prox_functional(), tau, y, cfg);
    case M::FixedPoint:
      if (!(q < 1.0)) throw DomainError("resolvent: fixed-point solver needs tau * lip < 1");
      return fixed_point(b, tau, y, cfg, q);
    case M::Newton:
    case M::Auto:
      break;
  }
  return newton_fd(b, tau, y, cfg);
}

}  // namespace

LagrangianVector resolvent(const LagrangianOperator& b, double tau, const LagrangianVector& y,
                           const SolverConfig& cfg) {
  b.check_step(tau);
  if (y.size() == 0) throw DomainError("resolvent: empty particle vector");
  const Canonical canon(y.matrix());
  return LagrangianVector(canon.restore(solve_resolvent(b, tau, canon.sorted(y.matrix()), cfg)));
}

double resolvent_residual(const LagrangianOperator& b, double tau, const LagrangianVector& x,
                          const LagrangianVector& y) {
  if (x.size() != y.size() || x.dim() != y.dim()) throw DomainError("resolvent_residual: shape mismatch");
  if (const Functional* phi = b.prox_functional(); phi != nullptr && !phi->smooth())
    return detail::prox_residual(*phi, tau, x.matrix(), y.matrix());
  return weighted_norm(x.matrix() - tau * b.field().apply_particles(x.matrix()) - y.matrix());
}

LagrangianVector yosida(const LagrangianOperator& b, double tau, const LagrangianVector& x,
                        const SolverConfig& cfg) {
  return (1.0 / tau) * (resolvent(b, tau, x, cfg) - x);
}

MinimalSelectionEstimate minimal_selection_estimate(const LagrangianOperator& b, const LagrangianVector& x,
                                                    const std::vector<double>& tau_grid,
                                                    const SolverConfig& cfg) {
  if (tau_grid.empty()) throw DomainError("minimal_selection_estimate: empty step grid");
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    b.check_step(tau_grid[i]);
    if (i > 0 && !(tau_grid[i] < tau_grid[i - 1]))
      throw DomainError("minimal_selection_estimate: step grid must be strictly decreasing");
  }
  MinimalSelectionEstimate out;
  const double slack = 10.0 * cfg.tol;
  for (const double tau : tau_grid) {
    // B_tau divides the resolvent error by tau; tighten so B_tau itself is accurate to tol.
    SolverConfig step_cfg = cfg;
    step_cfg.tol = std::max(cfg.tol * std::min(tau, 1.0), 1e-14);
    out.velocity = yosida(b, tau, x, step_cfg);
    out.norms.push_back((1.0 - b.lambda() * tau) * out.velocity.norm());
    const std::size_t k = out.norms.size();
    if (k > 1 && out.norms[k - 1] < out.norms[k - 2] - slack) out.nondecreasing = false;
  }
  return out;
}

LagrangianVector exponential_semigroup(const LagrangianOperator& b, double t, const LagrangianVector& x,
                                       std::size_t n, const SolverConfig& cfg) {
  if (t < 0.0) throw DomainError("exponential_semigroup: negative time");
  if (n == 0) throw DomainError("exponential_semigroup: need at least one step");
  if (t == 0.0) return x;
  const double tau = t / static_cast<double>(n);
  LagrangianVector cur = x;
  for (std::size_t k = 0; k < n; ++k) cur = resolvent(b, tau, cur, cfg);
  return cur;
}

std::size_t step_count(double horizon, double tau) {
  if (!(tau > 0.0) || !(horizon >= 0.0)) throw DomainError("step_count: need tau > 0 and T >= 0");
  const double k = std::ceil(horizon / tau - 1e-9);
  return k > 0.0 ? static_cast<std::size_t>(k) : 0;
}

std::vector<LagrangianVector> explicit_trajectory(const LagrangianOperator& b, double tau, double horizon,
                                                  const LagrangianVector& x0) {
  if (!b.lip()) throw DomainError("explicit_trajectory: field has no Lipschitz constant");
  if (!(tau > 0.0)) throw DomainError("explicit_trajectory: tau must be positive");
  const std::size_t steps = step_count(horizon, tau);
  std::vector<LagrangianVector> out{x0};
  out.reserve(steps + 1);
  for (std::size_t k = 0; k < steps; ++k) out.push_back(out.back() + tau * b.apply(out.back()));
  return out;
}

std::vector<LagrangianVector> implicit_trajectory(const LagrangianOperator& b, double tau, double horizon,
                                                  const LagrangianVector& x0, const SolverConfig& cfg) {
  b.check_step(tau);
  const std::size_t steps = step_count(horizon, tau);
  std::vector<LagrangianVector> out{x0};
  out.reserve(steps + 1);
  for (std::size_t k = 0; k < steps; ++k) out.push_back(resolvent(b, tau, out.back(), cfg));
  return out;
}

OperatorDissipativityReport operator_dissipativity_check(
    const LagrangianOperator& b, double lambda,
    const std::vector<std::pair<LagrangianVector, LagrangianVector>>& pairs) {
  OperatorDissipativityReport out;
  out.worst_gap = pairs.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  for (const auto& [x, y] : pairs) {
    const LagrangianVector dx = x - y;
    const double gap = (b.apply(x) - b.apply(y)).dot(dx) - lambda * dx.squared_norm();
    out.worst_gap = std::max(out.worst_gap, gap);
  }
  out.pass = out.worst_gap <= 1e-9;
  return out;
}

}  // namespace wflow
