#include "wflow/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wflow/error.hpp"
#include "wflow/transport.hpp"

namespace wflow {

namespace {

FlowDiagnostics diagnose(const VelocityField& f, const DiscreteMeasure& mu) {
  const auto stats = measure_stats(mu);
  return {stats.support_cardinality, stats.diameter, stats.second_moment, eval_on_measure(f, mu).l2_norm};
}

// Snap near-coincident groups that are not moving apart onto their mean.
void snap_clusters(const LagrangianOperator& b, LagrangianVector& x, double merge_eps) {
  if (merge_eps <= 0.0) return;
  const auto labels = merge_groups(x, merge_eps);
  const std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
  if (k == x.size()) return;
  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t n = 0; n < labels.size(); ++n) groups[labels[n]].push_back(n);

  auto& m = x.matrix();
  std::optional<Eigen::MatrixXd> v;
  for (const auto& g : groups) {
    if (g.size() < 2) continue;
    bool identical = true;
    for (std::size_t a = 1; a < g.size() && identical; ++a)
      identical = m.row(static_cast<Eigen::Index>(g[a])) == m.row(static_cast<Eigen::Index>(g[0]));
    if (identical) continue;
    if (!v) v = b.apply(x).matrix();
    bool separating = false;
    for (std::size_t a = 0; a < g.size() && !separating; ++a)
      for (std::size_t c = a + 1; c < g.size() && !separating; ++c) {
        const auto ia = static_cast<Eigen::Index>(g[a]), ic = static_cast<Eigen::Index>(g[c]);
        separating = (v->row(ia) - v->row(ic)).dot(m.row(ia) - m.row(ic)) > 0.0;
      }
    if (separating) continue;
    // Sum in lexicographic row order so the mean does not depend on labels.
    auto sorted = g;
    std::sort(sorted.begin(), sorted.end(), [&m](std::size_t a, std::size_t c) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double xa = m(static_cast<Eigen::Index>(a), j), xc = m(static_cast<Eigen::Index>(c), j);
        if (xa != xc) return xa < xc;
      }
      return false;
    });
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(m.cols());
    for (std::size_t n : sorted) mean += m.row(static_cast<Eigen::Index>(n));
    mean /= static_cast<double>(g.size());
    for (std::size_t n : g) m.row(static_cast<Eigen::Index>(n)) = mean;
  }
}

}  // namespace

FlowResult evolve(const VelocityField& f, const DiscreteMeasure& mu0, const Scheme& scheme, double horizon,
                  const EvolveOptions& opts) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw DomainError("evolve: horizon must be finite and >= 0");
  if (opts.merge_eps < 0.0) throw DomainError("evolve: merge_eps must be nonnegative");
  const LagrangianOperator b(f);

  std::size_t steps = 0;
  switch (scheme.kind) {
    case Scheme::Kind::Implicit:
    case Scheme::Kind::Explicit:
      if (!(scheme.tau > 0.0)) throw DomainError("evolve: tau must be positive");
      steps = step_count(horizon, scheme.tau);
      break;
    case Scheme::Kind::Exponential:
      if (scheme.n == 0) throw DomainError("evolve: exponential scheme needs n >= 1");
      steps = horizon > 0.0 ? scheme.n : 0;
      break;
  }
  const double tau = steps > 0 ? horizon / static_cast<double>(steps) : 0.0;
  if (steps > 0) {
    if (scheme.kind == Scheme::Kind::Explicit) {
      if (!b.lip()) throw DomainError("evolve: explicit scheme needs a Lipschitz field");
    } else {
      b.check_step(tau);
    }
  }

  LagrangianVector x = expand(mu0, mu0.denominator());
  if (!opts.lift_permutation.empty()) {
    if (opts.lift_permutation.size() != x.size()) throw DomainError("evolve: lift permutation has wrong length");
    std::vector<bool> seen(x.size(), false);
    for (std::size_t p : opts.lift_permutation) {
      if (p >= x.size() || seen[p]) throw DomainError("evolve: lift permutation is not a permutation");
      seen[p] = true;
    }
    x = x.permuted(opts.lift_permutation);
  }

  FlowResult out;
  auto record = [&](double t) {
    out.times.push_back(t);
    out.measures.push_back(iota_project(x, opts.merge_eps));
    out.lagrangian.push_back(x);
    out.diagnostics.push_back(diagnose(f, out.measures.back()));
  };
  record(0.0);
  const std::size_t stride = std::max<std::size_t>(opts.record_stride, 1);
  for (std::size_t k = 1; k <= steps; ++k) {
    if (scheme.kind == Scheme::Kind::Explicit)
      x += tau * b.apply(x);
    else
      x = resolvent(b, tau, x, opts.solver);
    snap_clusters(b, x, opts.merge_eps);
    if (k % stride == 0 || k == steps) record(k == steps ? horizon : tau * static_cast<double>(k));
  }
  return out;
}

FlowResult evolve(const Functional& phi, const DiscreteMeasure& mu0, const Scheme& scheme, double horizon,
                  const EvolveOptions& opts) {
  return evolve(phi.subgradient_field(), mu0, scheme, horizon, opts);
}

double EviReport::max_residual(bool skip_ties) const {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < residuals.size(); ++k)
    if (!(skip_ties && tie[k])) m = std::max(m, residuals[k]);
  return m;
}

EviReport evi_residual(const FlowResult& flow, const VelocityField& f, double lambda, const DiscreteMeasure& nu) {
  if (flow.size() < 3) throw DomainError("evi_residual: need at least three recorded times");
  const auto vnu = eval_on_measure(f, nu).velocities;
  std::vector<W2Result> w;
  w.reserve(flow.size());
  for (const auto& mu : flow.measures) w.push_back(w2_exact(mu, nu));

  EviReport out;
  for (std::size_t k = 1; k + 1 < flow.size(); ++k) {
    const double deriv =
        0.5 * (w[k + 1].squared - w[k - 1].squared) / (flow.times[k + 1] - flow.times[k - 1]);
    const Coupling& plan = w[k].plan;
    double pairing = 0.0;
    for (const auto& e : plan.support()) {
      const Point& y = nu.atom(e.j);
      pairing += static_cast<double>(e.mass) * vnu[e.j].dot(y - flow.measures[k].atom(e.i));
    }
    pairing /= static_cast<double>(plan.denominator());
    const bool tie = has_alternative_optimum(plan);
    out.times.push_back(flow.times[k]);
    out.residuals.push_back(deriv + pairing - lambda * w[k].squared);
    out.tie.push_back(tie);
    out.any_tie = out.any_tie || tie;
  }
  return out;
}

ContractionReport contraction_check(const VelocityField& f, const DiscreteMeasure& mu0, const DiscreteMeasure& nu0,
                                    double lambda, const std::vector<double>& t_grid, const Scheme& scheme, double tol,
                                    const EvolveOptions& opts) {
  ContractionReport out;
  const double d0 = w2_exact(mu0, nu0).distance;
  for (const double t : t_grid) {
    if (t < 0.0) throw DomainError("contraction_check: negative time");
    out.times.push_back(t);
    if (d0 < 1e-14) {
      out.ratios.push_back(0.0);
      continue;
    }
    const auto a = evolve(f, mu0, scheme, t, opts).final_measure();
    const auto c = evolve(f, nu0, scheme, t, opts).final_measure();
    const double ratio = w2_exact(a, c).distance / (std::exp(lambda * t) * d0);
    out.ratios.push_back(ratio);
    if (ratio > 1.0 + tol) out.pass = false;
  }
  return out;
}

DiscreteMeasure jko_step(const Functional& phi, const DiscreteMeasure& mu, double tau, const SolverConfig& cfg,
                         double merge_eps) {
  const LagrangianOperator b(phi.subgradient_field());
  SolverConfig c = cfg;
  c.method = SolverConfig::Method::Prox;
  const auto x = resolvent(b, tau, expand(mu, mu.denominator()), c);
  return iota_project(x, merge_eps);
}

StickyReport sticky_diagnostics(const FlowResult& flow, double lambda) {
  StickyReport out;
  if (flow.size() == 0) return out;
  const double diam0 = flow.diagnostics.front().diameter;
  const double pair0 = pairwise_second_moment(flow.measures.front());
  for (std::size_t k = 0; k < flow.size(); ++k) {
    const double t = flow.times[k];
    if (k > 0 && flow.diagnostics[k].support_cardinality > flow.diagnostics[k - 1].support_cardinality)
      out.cardinality_nonincreasing = false;
    if (flow.diagnostics[k].diameter > std::exp(lambda * t) * diam0 * (1.0 + 1e-6) + 1e-12)
      out.diameter_bound_ok = false;
    if (pairwise_second_moment(flow.measures[k]) > std::exp(2.0 * lambda * t) * pair0 * (1.0 + 1e-6) + 1e-12)
      out.moment_bound_ok = false;
  }
  return out;
}

}  // namespace wflow
