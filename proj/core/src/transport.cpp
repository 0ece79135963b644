#include "wflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wflow/assignment.hpp"
#include "wflow/error.hpp"

namespace wflow {

namespace {

Eigen::MatrixXd squared_distance_matrix(const LagrangianVector& x, const LagrangianVector& y) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = (x.matrix().row(i) - y.matrix().row(j)).squaredNorm();
  return c;
}

void require_same_dim(const DiscreteMeasure& a, const DiscreteMeasure& b, const char* who) {
  if (a.dim() != b.dim())
    throw DomainError(std::string(who) + ": dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                      std::to_string(b.dim()) + ")");
}

}  // namespace

W2Result w2_exact(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, std::int64_t lcm_bound) {
  require_same_dim(mu0, mu1, "w2_exact");
  const std::int64_t n = common_denominator(mu0.denominator(), mu1.denominator(), lcm_bound);
  const auto x = expand(mu0, n);
  const auto y = expand(mu1, n);
  const auto sol = solve_assignment(squared_distance_matrix(x, y));
  const double sq = std::max(0.0, sol.total_cost / static_cast<double>(n));
  return W2Result{std::sqrt(sq), sq, Coupling::from_matching(mu0, mu1, sol.row_to_col, lcm_bound)};
}

double w2_bruteforce(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  require_same_dim(mu0, mu1, "w2_bruteforce");
  const std::int64_t n = common_denominator(mu0.denominator(), mu1.denominator());
  if (n > 8) throw CapacityError("w2_bruteforce: common denominator " + std::to_string(n) + " > 8");
  const auto c = squared_distance_matrix(expand(mu0, n), expand(mu1, n));
  std::vector<std::size_t> sigma(static_cast<std::size_t>(n));
  std::iota(sigma.begin(), sigma.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t k = 0; k < sigma.size(); ++k)
      s += c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(sigma[k]));
    best = std::min(best, s);
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return std::sqrt(best / static_cast<double>(n));
}

double w_infinity(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  require_same_dim(mu0, mu1, "w_infinity");
  const std::int64_t n = common_denominator(mu0.denominator(), mu1.denominator());
  if (n > 64) throw CapacityError("w_infinity: common denominator " + std::to_string(n) + " > 64");
  const auto c = squared_distance_matrix(expand(mu0, n), expand(mu1, n));
  return std::sqrt(bottleneck_assignment(c));
}

// ---------------------------------------------------------------------------

bool has_alternative_optimum(const Coupling& plan, double rel_tol) {
  const std::size_t s = plan.source().size();
  const std::size_t t = plan.target().size();
  const std::size_t v = s + t;
  Eigen::MatrixXd c(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < t; ++j)
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (plan.source().atom(i) - plan.target().atom(j)).squaredNorm();
  const double tol = rel_tol * std::max(1.0, c.maxCoeff());

  struct Arc {
    std::size_t from, to;
    double cost;
    bool forward;
    std::size_t i, j;
  };
  std::vector<Arc> arcs;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      const double cij = c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      arcs.push_back({i, s + j, cij, true, i, j});
      if (plan.mass()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0)
        arcs.push_back({s + j, i, -cij, false, i, j});
    }

  // Potentials from Bellman-Ford with a virtual source; optimality of the plan
  // means there is no negative cycle beyond rounding.
  std::vector<double> pi(v, 0.0);
  for (std::size_t it = 0; it < v; ++it) {
    bool changed = false;
    for (const auto& a : arcs) {
      if (pi[a.from] + a.cost < pi[a.to] - tol * 1e-3) {
        pi[a.to] = pi[a.from] + a.cost;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // Zero reduced-cost subgraph.
  std::vector<std::vector<std::size_t>> adj(v);
  std::vector<const Arc*> zero_arcs;
  for (const auto& a : arcs) {
    if (std::abs(a.cost + pi[a.from] - pi[a.to]) <= tol) {
      adj[a.from].push_back(a.to);
      zero_arcs.push_back(&a);
    }
  }

  // Tarjan SCC (iterative).
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(v, kUnset), low(v, 0), comp(v, kUnset);
  std::vector<char> on_stack(v, 0);
  std::vector<std::size_t> stack;
  std::size_t counter = 0, ncomp = 0;
  for (std::size_t root = 0; root < v; ++root) {
    if (index[root] != kUnset) continue;
    std::vector<std::pair<std::size_t, std::size_t>> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& [u, k] = call.back();
      if (k < adj[u].size()) {
        const std::size_t w = adj[u][k++];
        if (index[w] == kUnset) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[u] = std::min(low[u], index[w]);
        }
        continue;
      }
      if (low[u] == index[u]) {
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = ncomp;
        } while (w != u);
        ++ncomp;
      }
      const std::size_t done = u;
      call.pop_back();
      if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
    }
  }

  // A zero arc inside an SCC that is not the reverse of a support arc closes a
  // cycle of length >= 3; otherwise look for an undirected cycle among the
  // bidirected support arcs.
  std::vector<std::size_t> parent(v);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const Arc* a : zero_arcs) {
    if (comp[a->from] != comp[a->to] || !a->forward) continue;
    const bool in_support = plan.mass()(static_cast<Eigen::Index>(a->i), static_cast<Eigen::Index>(a->j)) > 0;
    if (!in_support) return true;
    const std::size_t ra = find(a->from), rb = find(a->to);
    if (ra == rb) return true;
    parent[ra] = rb;
  }
  return false;
}

// ---------------------------------------------------------------------------

CyclicalMonotonicityReport cyclical_monotonicity_check(const Coupling& gamma, std::size_t max_cycle) {
  if (max_cycle < 2) throw DomainError("cyclical_monotonicity_check: max_cycle must be >= 2");
  const auto supp = gamma.support();
  const std::size_t k = supp.size();
  CyclicalMonotonicityReport report;
  if (k < 2) return report;
  const std::size_t len = std::min(max_cycle, k);

  // weight(a -> b) = <y_b, x_b - x_a>; a closed walk's weight is the cyclic sum.
  Eigen::MatrixXd w(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      const Point& xa = gamma.source().atom(supp[a].i);
      const Point& xb = gamma.source().atom(supp[b].i);
      const Point& yb = gamma.target().atom(supp[b].j);
      w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = a == b ? 0.0 : yb.dot(xb - xa);
    }

  constexpr double kTol = -1e-9;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto K = static_cast<Eigen::Index>(k);
  double best = 0.0;
  std::vector<std::size_t> best_walk;

  // Min-weight closed walks with exactly m arcs from each start; any negative
  // closed walk contains a negative simple cycle no longer than the walk.
  for (std::size_t s = 0; s < k; ++s) {
    Eigen::VectorXd dist = Eigen::VectorXd::Constant(K, kInf);
    dist[static_cast<Eigen::Index>(s)] = 0.0;
    std::vector<std::vector<std::size_t>> pred;
    for (std::size_t m = 1; m <= len; ++m) {
      Eigen::VectorXd next = Eigen::VectorXd::Constant(K, kInf);
      std::vector<std::size_t> p(k, 0);
      for (Eigen::Index b = 0; b < K; ++b)
        for (Eigen::Index a = 0; a < K; ++a) {
          if (a == b || dist[a] == kInf) continue;
          const double cand = dist[a] + w(a, b);
          if (cand < next[b]) {
            next[b] = cand;
            p[static_cast<std::size_t>(b)] = static_cast<std::size_t>(a);
          }
        }
      pred.push_back(std::move(p));
      dist = std::move(next);
      const double closed = dist[static_cast<Eigen::Index>(s)];
      if (m >= 2 && closed < best) {
        best = closed;
        best_walk.assign(m, 0);
        std::size_t cur = s;
        for (std::size_t step = m; step-- > 0;) {
          best_walk[step] = cur;
          cur = pred[step][cur];
        }
      }
    }
  }

  report.worst_sum = best;
  if (best < kTol) {
    report.pass = false;
    // Split the walk into simple cycles and keep the most negative one.
    std::vector<std::size_t> cycle_best;
    double cycle_best_w = kInf;
    std::vector<std::size_t> stack;
    std::vector<std::size_t> pos(k, static_cast<std::size_t>(-1));
    auto close_cycle = [&](std::size_t from) {
      std::vector<std::size_t> cyc(stack.begin() + static_cast<std::ptrdiff_t>(from), stack.end());
      double cw = 0.0;
      for (std::size_t q = 0; q < cyc.size(); ++q)
        cw += w(static_cast<Eigen::Index>(cyc[(q + cyc.size() - 1) % cyc.size()]), static_cast<Eigen::Index>(cyc[q]));
      if (cyc.size() >= 2 && cw < cycle_best_w) {
        cycle_best_w = cw;
        cycle_best = cyc;
      }
      for (std::size_t q = from; q < stack.size(); ++q) pos[stack[q]] = static_cast<std::size_t>(-1);
      stack.resize(from);
    };
    std::vector<std::size_t> sequence{best_walk.back()};
    sequence.insert(sequence.end(), best_walk.begin(), best_walk.end());
    for (std::size_t node : sequence) {
      if (pos[node] != static_cast<std::size_t>(-1)) {
        const std::size_t from = pos[node];
        close_cycle(from);
      }
      pos[node] = stack.size();
      stack.push_back(node);
    }
    report.witness = cycle_best;
  }
  return report;
}

Certificate local_optimality_certificate(const Coupling& gamma) {
  const auto& src = gamma.source();
  double delta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < src.size(); ++i)
    for (std::size_t j = i + 1; j < src.size(); ++j) delta = std::min(delta, (src.atom(i) - src.atom(j)).norm());
  double s = 0.0;
  for (const auto& e : gamma.support())
    s = std::max(s, (gamma.target().atom(e.j) - src.atom(e.i)).norm());
  return s <= delta / 2.0 ? Certificate::CertifiedOptimal : Certificate::Unknown;
}

// ---------------------------------------------------------------------------

GeodesicDecomposition geodesic_decompose(const Coupling& gamma, double tol) {
  if (!(tol > 0.0)) throw DomainError("geodesic_decompose: tol must be positive");
  GeodesicDecomposition out;
  out.plan_cost = gamma.cost();
  out.breakpoints.push_back(0.0);
  if (out.plan_cost == 0.0) {
    out.breakpoints.push_back(1.0);
    out.speeds.push_back(0.0);
    return out;
  }
  const double c2 = out.plan_cost;
  auto geodesic_from = [&](const DiscreteMeasure& start, double ts, double t) {
    const double w2 = w2_exact(start, interpolate(gamma, t)).squared;
    return std::abs(w2 - (t - ts) * (t - ts) * c2) <= tol * c2;
  };

  constexpr double kResolution = 1e-13;
  constexpr std::size_t kMaxSegments = 100000;
  double ts = 0.0;
  while (ts < 1.0) {
    if (out.breakpoints.size() > kMaxSegments)
      throw BisectionError("geodesic_decompose: too many segments", ts, 1.0);
    const DiscreteMeasure start = interpolate(gamma, ts);
    if (geodesic_from(start, ts, 1.0) && geodesic_from(start, ts, 0.5 * (ts + 1.0))) {
      out.breakpoints.push_back(1.0);
      break;
    }
    double lo = ts, hi = 1.0;
    while (hi - lo > kResolution) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (geodesic_from(start, ts, mid)) lo = mid;
      else hi = mid;
    }
    if (lo - ts <= kResolution || !geodesic_from(start, ts, 0.5 * (ts + lo)))
      throw BisectionError("geodesic_decompose: no geodesic progress (tol too small?)", lo, hi);
    out.breakpoints.push_back(lo);
    ts = lo;
  }

  for (std::size_t k = 1; k < out.breakpoints.size(); ++k) {
    const double a = out.breakpoints[k - 1], b = out.breakpoints[k];
    out.speeds.push_back(w2_exact(interpolate(gamma, a), interpolate(gamma, b)).distance / (b - a));
  }
  return out;
}

}  // namespace wflow
