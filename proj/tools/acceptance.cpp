#include "acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "wflow/dissipativity.hpp"
#include "wflow/error.hpp"
#include "wflow/fields.hpp"
#include "wflow/flows.hpp"
#include "wflow/functional.hpp"
#include "wflow/measures.hpp"
#include "wflow/operators.hpp"
#include "wflow/transport.hpp"

namespace wflow::acceptance {

namespace {

// -- pinned thresholds ---------------------------------------------------------
constexpr int kW2Pairs = 500;
constexpr double kW2RelTol = 1e-12;
constexpr double kW2Seconds = 10.0;
constexpr double kSlopeLo = -1.2, kSlopeHi = -0.8;
constexpr double kEulerSeconds = 5.0;
constexpr int kContractionPairs = 50;
constexpr double kContractionTau = 1e-3, kContractionSlack = 1e-3;
constexpr double kStickyTau = 1e-3, kStickyMergeEps = 1e-6, kCollisionLo = 1.95, kCollisionHi = 2.05;
constexpr int kDissipativityPairs = 100;
constexpr std::int64_t kDissipativityMaxN = 6;
constexpr double kYosidaSlack = 1e-8, kYosidaLimitTol = 1e-3;
constexpr double kSegmentRelTol = 1e-6;
constexpr int kOptimalPlans = 50;
constexpr int kJkoInstances = 20, kJkoCompetitors = 100;
constexpr double kJkoClosedFormTol = 1e-8;
constexpr int kEviTargets = 50;
constexpr double kEviTau = 1e-3, kEviDt = 1e-2;
constexpr int kPerturbInstances = 100;
constexpr double kPerturbRadius = 1e-3;
constexpr int kMeanFieldSeeds = 20;
constexpr double kMeanFieldSlack = 1e-6;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Point point(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p(i++) = x;
  return p;
}

DiscreteMeasure random_measure(std::mt19937_64& rng, int dim, std::int64_t denominator, double spread = 2.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  const auto atoms = std::uniform_int_distribution<std::int64_t>(1, denominator)(rng);
  std::vector<std::int64_t> mult(static_cast<std::size_t>(atoms), 1);
  for (std::int64_t extra = denominator - atoms; extra > 0; --extra)
    ++mult[std::uniform_int_distribution<std::size_t>(0, mult.size() - 1)(rng)];
  std::vector<Point> pts;
  for (std::int64_t i = 0; i < atoms; ++i) {
    Point p(dim);
    for (int c = 0; c < dim; ++c) p(c) = u(rng);
    pts.push_back(p);
  }
  return DiscreteMeasure(std::move(pts), std::move(mult));
}

std::int64_t random_divisor(std::mt19937_64& rng, std::int64_t n) {
  std::vector<std::int64_t> divs;
  for (std::int64_t d = 1; d <= n; ++d)
    if (n % d == 0) divs.push_back(d);
  return divs[std::uniform_int_distribution<std::size_t>(0, divs.size() - 1)(rng)];
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// 1. exact W2 against enumeration
Outcome w2_oracle() {
  std::mt19937_64 rng(101);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int bad = 0;
  for (int rep = 0; rep < kW2Pairs; ++rep) {
    const int dim = 1 + rep % 3;
    const auto n = std::uniform_int_distribution<std::int64_t>(1, 7)(rng);
    const auto a = random_measure(rng, dim, random_divisor(rng, n));
    const auto b = random_measure(rng, dim, random_divisor(rng, n));
    const double exact = w2_exact(a, b).distance;
    const double brute = w2_bruteforce(a, b);
    const double rel = brute > 0.0 ? std::abs(exact - brute) / brute : std::abs(exact);
    worst = std::max(worst, rel);
    if (rel > kW2RelTol) ++bad;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < kW2Seconds,
          fmt("%d pairs, worst relative deviation %.2e (<= %.0e), %.2fs (< %.0fs)", kW2Pairs, worst, kW2RelTol, secs,
              kW2Seconds)};
}

// 2. exponential formula for f(x) = -x
Outcome exponential_formula() {
  const LagrangianOperator b(linear_field(-Eigen::MatrixXd::Identity(1, 1)));
  Eigen::MatrixXd x0(1, 1);
  x0 << 1.0;
  std::vector<double> logn, logerr;
  bool bounds = true;
  std::string rows;
  for (std::size_t n : {4, 16, 64, 256}) {
    const double x = exponential_semigroup(b, 1.0, LagrangianVector(x0), n).matrix()(0, 0);
    const double err = std::abs(x - std::exp(-1.0));
    const double bound = 2.0 / std::sqrt(static_cast<double>(n));
    bounds = bounds && err <= bound;
    logn.push_back(std::log(static_cast<double>(n)));
    logerr.push_back(std::log(err));
    rows += fmt(" n=%zu:%.3e", n, err);
  }
  const double s = slope(logn, logerr);
  return {bounds && s >= kSlopeLo && s <= kSlopeHi,
          fmt("errors%s all <= 2/sqrt(n): %s, log-log slope %.3f in [%.1f, %.1f]", rows.c_str(),
              bounds ? "yes" : "no", s, kSlopeLo, kSlopeHi)};
}

// 3. implicit Euler bound for the quadratic interaction
Outcome implicit_euler_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  const Functional phi(Profile::zero(), Profile::quadratic(1.0));
  const DiscreteMeasure mu0({point({0.0}), point({2.0})}, {1, 1});
  const ReferenceFlow exact = [](double t) {
    return DiscreteMeasure({point({1.0 - std::exp(-t)}), point({1.0 + std::exp(-t)})}, {1, 1});
  };
  const auto study = implicit_error_study(phi.subgradient_field(), mu0, 1.0, {4, 16, 64}, exact);
  const double secs = seconds_since(t0);
  std::string rows;
  for (const auto& r : study.rows) rows += fmt(" n=%zu:%.3e<=%.3e", r.n, r.error, r.bound);
  return {study.pass && secs < kEulerSeconds, fmt("%s, %.2fs (< %.0fs)", rows.c_str() + 1, secs, kEulerSeconds)};
}

// 4. contraction of the barycentric attraction flow
Outcome contraction() {
  std::mt19937_64 rng(404);
  const auto f = barycentric_field(1.0);
  double worst = 0.0;
  for (int rep = 0; rep < kContractionPairs; ++rep) {
    const int dim = 1 + rep % 2;
    const auto n = std::uniform_int_distribution<std::int64_t>(1, 6)(rng);
    const auto a = random_measure(rng, dim, n);
    const auto b = random_measure(rng, dim, random_divisor(rng, n));
    const auto rep_c = contraction_check(f, a, b, 0.0, {0.5, 1.0, 2.0}, Scheme::implicit(kContractionTau));
    for (double r : rep_c.ratios) worst = std::max(worst, r);
  }
  return {worst <= 1.0 + kContractionSlack,
          fmt("%d pairs, t in {0.5, 1, 2}, worst ratio %.6f (<= 1 + %.0e)", kContractionPairs, worst,
              kContractionSlack)};
}

// 5. sticky collision
Outcome sticky_collision() {
  EvolveOptions opts;
  opts.merge_eps = kStickyMergeEps;
  const Functional phi(Profile::zero(), Profile::abs(1.0));
  const auto flow = evolve(phi, DiscreteMeasure({point({-1.0}), point({1.0})}, {1, 1}), Scheme::implicit(kStickyTau),
                           3.0, opts);
  double drop = -1.0;
  bool stays = true, starts_two = flow.measures.front().size() == 2;
  for (std::size_t k = 0; k < flow.size(); ++k) {
    const auto card = flow.measures[k].size();
    if (drop < 0.0 && card == 1) drop = flow.times[k];
    if (drop >= 0.0 && card != 1) stays = false;
    if (drop < 0.0 && card != 2) starts_two = false;
  }
  const bool ok = starts_two && stays && drop >= kCollisionLo && drop <= kCollisionHi;
  return {ok, fmt("cardinality 2 -> 1 at t = %.3f (in [%.2f, %.2f]), stays 1 through t = 3: %s", drop, kCollisionLo,
                  kCollisionHi, stays ? "yes" : "no")};
}

// 6. total dissipativity verifier
Outcome total_dissipativity() {
  std::mt19937_64 rng(606);
  const auto attract = barycentric_field(1.0);
  const auto expand = linear_field(Eigen::MatrixXd::Identity(2, 2));
  double worst_attract = -INFINITY;
  int expand_caught = 0, transform_ok = 0;
  for (int rep = 0; rep < kDissipativityPairs; ++rep) {
    const auto n = std::uniform_int_distribution<std::int64_t>(1, kDissipativityMaxN)(rng);
    const auto a = random_measure(rng, 2, random_divisor(rng, n));
    const auto b = random_measure(rng, 2, random_divisor(rng, n));
    const auto ra = total_dissipativity_check(attract, a, b, 0.0);
    worst_attract = std::max(worst_attract, ra.worst_gap);
    const auto re = total_dissipativity_check(expand, a, b, 0.0);
    if (!re.pass && re.witness) ++expand_caught;
    bool same = true;
    for (const auto& f : {attract, expand})
      for (double lam : {-0.5, 0.5, 1.0}) {
        const auto direct = total_dissipativity_check(f, a, b, lam);
        const auto shifted = total_dissipativity_check(lambda_transform(f, lam), a, b, 0.0);
        const double scale = 1.0 + std::abs(direct.worst_gap);
        same = same && direct.pass == shifted.pass && std::abs(direct.worst_gap - shifted.worst_gap) <= 1e-12 * scale;
      }
    if (same) ++transform_ok;
  }
  const bool ok = worst_attract <= kDissipativityTol && expand_caught == kDissipativityPairs &&
                  transform_ok == kDissipativityPairs;
  return {ok, fmt("attraction worst gap %.2e (<= %.0e); expansion witnessed %d/%d; lambda-transform identity %d/%d",
                  worst_attract, kDissipativityTol, expand_caught, kDissipativityPairs, transform_ok,
                  kDissipativityPairs)};
}

// 7. Yosida monotone limit
Outcome yosida_limit() {
  std::vector<double> grid;
  for (int k = 1; k <= 6; ++k) grid.push_back(std::pow(2.0, -k));
  auto monotone = [](const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] < v[i - 1] - kYosidaSlack) return false;
    return true;
  };
  std::mt19937_64 rng(707);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(6, 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = g(rng);
  const LagrangianVector xv(x);

  const LagrangianOperator lin(linear_field(-Eigen::MatrixXd::Identity(1, 1)));
  const auto el = minimal_selection_estimate(lin, xv, grid);
  const double limit = lin.apply(xv).norm();
  const double gap = std::abs(el.norms.back() - limit);

  const LagrangianOperator quartic(Functional(Profile::quartic(1.0), Profile::zero()).subgradient_field());
  const auto eq = minimal_selection_estimate(quartic, xv, grid);

  const bool ok = monotone(el.norms) && monotone(eq.norms) && gap <= kYosidaLimitTol;
  return {ok, fmt("linear monotone: %s, quartic monotone: %s, |(1-lambda tau)|B_tau X| - |B X|| = %.2e at tau = 2^-6 "
                  "(<= %.0e)",
                  monotone(el.norms) ? "yes" : "no", monotone(eq.norms) ? "yes" : "no", gap, kYosidaLimitTol)};
}

// 8. geodesic decomposition
Outcome geodesic_decomposition() {
  const DiscreteMeasure src({point({0, 0}), point({1, 1})}, {1, 1});
  const DiscreteMeasure tgt({point({2, 0}), point({1, -1})}, {1, 1});
  Coupling::MassMatrix m(2, 2);
  m << 0, 1, 1, 0;
  const Coupling crossing(src, tgt, m);
  const auto dec = geodesic_decompose(crossing);
  const double c = std::sqrt(dec.plan_cost);
  double worst_seg = 0.0, worst_speed = 0.0;
  for (std::size_t k = 0; k < dec.segments(); ++k) {
    const double t0 = dec.breakpoints[k], t1 = dec.breakpoints[k + 1];
    const auto start = interpolate(crossing, t0);
    for (double frac : {0.25, 0.5, 0.75, 1.0}) {
      const double t = t0 + frac * (t1 - t0);
      const double w = w2_exact(start, interpolate(crossing, t)).distance;
      worst_seg = std::max(worst_seg, std::abs(w - (t - t0) * c) / ((t - t0) * c));
    }
    worst_speed = std::max(worst_speed, std::abs(dec.speeds[k] - c) / c);
  }

  std::mt19937_64 rng(808);
  int single = 0;
  for (int rep = 0; rep < kOptimalPlans; ++rep) {
    const auto n = std::uniform_int_distribution<std::int64_t>(1, 6)(rng);
    const int dim = 1 + rep % 3;
    const auto plan = w2_exact(random_measure(rng, dim, n), random_measure(rng, dim, random_divisor(rng, n))).plan;
    if (geodesic_decompose(plan).segments() == 1) ++single;
  }
  const bool ok = dec.segments() >= 2 && worst_seg <= kSegmentRelTol && worst_speed <= kSegmentRelTol &&
                  single == kOptimalPlans;
  return {ok, fmt("crossing coupling K = %zu (>= 2), constant-speed deviation %.2e, speed deviation %.2e "
                  "(<= %.0e); optimal plans with K = 1: %d/%d",
                  dec.segments(), worst_seg, worst_speed, kSegmentRelTol, single, kOptimalPlans)};
}

// 9. JKO step equals the resolvent
Outcome jko_resolvent() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  int beaten = 0;
  for (int rep = 0; rep < kJkoInstances; ++rep) {
    const Functional phi(Profile::quadratic(0.2 + u(rng)), Profile::quadratic(0.2 + u(rng)));
    const auto mu = random_measure(rng, 2, std::uniform_int_distribution<std::int64_t>(1, 6)(rng));
    const double tau = 0.05 + 2.0 * u(rng);
    const auto out = jko_step(phi, mu, tau);
    const double best = jko_objective(phi, mu, out, tau);
    bool wins = true;
    for (int c = 0; c < kJkoCompetitors; ++c) {
      // half perturb the minimizer at several scales, half are unrelated measures
      if (c % 2 == 0) {
        const double radius = std::pow(10.0, -1.0 - (c / 2) % 5);
        std::vector<Point> atoms;
        for (const auto& a : out.atoms()) atoms.push_back(a + radius * point({g(rng), g(rng)}));
        wins = wins && best <= jko_objective(phi, mu, DiscreteMeasure(atoms, out.multiplicities()), tau) + 1e-12;
      } else {
        wins = wins && best <= jko_objective(phi, mu, random_measure(rng, 2, mu.denominator()), tau) + 1e-12;
      }
    }
    if (wins) ++beaten;
  }

  double worst_closed = 0.0;
  const Functional pot(Profile::quadratic(1.0), Profile::zero());
  for (int rep = 0; rep < 10; ++rep) {
    const Point y = point({3.0 * g(rng), 3.0 * g(rng)});
    const double tau = 0.1 + u(rng);
    const auto out = jko_step(pot, DiscreteMeasure::dirac(y), tau);
    worst_closed = std::max(worst_closed, (out.atom(0) - y / (1.0 + tau)).norm());
  }
  return {beaten == kJkoInstances && worst_closed <= kJkoClosedFormTol,
          fmt("beats %d competitors on %d/%d instances; closed-form prox deviation %.2e (<= %.0e)", kJkoCompetitors,
              beaten, kJkoInstances, worst_closed, kJkoClosedFormTol)};
}

// 10. EVI residuals
Outcome evi() {
  std::mt19937_64 rng(1010);
  const Functional phi(Profile::quadratic(1.0), Profile::quadratic(0.5));
  const auto f = phi.subgradient_field();
  const auto mu0 = random_measure(rng, 2, 4);
  EvolveOptions opts;
  opts.record_stride = static_cast<std::size_t>(std::lround(kEviDt / kEviTau));
  const auto flow = evolve(phi, mu0, Scheme::implicit(kEviTau), 1.0, opts);
  const double m0 = measure_stats(mu0).second_moment;
  double worst_ratio = -INFINITY;
  int ties = 0;
  for (int rep = 0; rep < kEviTargets; ++rep) {
    const auto nu = random_measure(rng, 2, std::uniform_int_distribution<std::int64_t>(1, 5)(rng));
    const auto report = evi_residual(flow, f, phi.lambda_conv(), nu);
    if (report.any_tie) ++ties;
    const double bound = 5.0 * (kEviTau + kEviDt * kEviDt) * (1.0 + measure_stats(nu).second_moment + m0);
    worst_ratio = std::max(worst_ratio, report.max_residual(true) / bound);
  }
  return {worst_ratio <= 1.0, fmt("%d targets, worst residual / bound = %.3f (<= 1), targets with plan ties: %d",
                                  kEviTargets, worst_ratio, ties)};
}

// 11. injectivity perturbation
Outcome perturbation() {
  std::mt19937_64 rng(1111);
  std::uniform_int_distribution<int> coord(-3, 3);
  int ok = 0, aligned_before = 0;
  for (int rep = 0; rep < kPerturbInstances; ++rep) {
    const auto n = std::uniform_int_distribution<std::size_t>(2, 10)(rng);
    std::vector<Point> a, b;
    std::set<std::pair<int, int>> used_a, used_b;
    while (a.size() < n) {
      const int x = coord(rng), y = coord(rng);
      if (used_a.insert({x, y}).second) a.push_back(point({double(x), double(y)}));
    }
    while (b.size() < n) {
      const int x = coord(rng), y = coord(rng);
      if (used_b.insert({x, y}).second) b.push_back(point({double(x), double(y)}));
    }
    if (check_chords_alignment(a, b).aligned) ++aligned_before;
    const auto seed = static_cast<std::uint64_t>(5000 + rep);
    const auto bp = perturb_for_injectivity(a, b, kPerturbRadius, seed);
    bool within = true;
    for (std::size_t i = 0; i < n; ++i) within = within && (bp[i] - b[i]).norm() < kPerturbRadius;
    if (within && injective_family_ok(a, b, bp)) ++ok;
  }
  return {ok == kPerturbInstances,
          fmt("%d/%d instances pass the s-family verifier (%d were aligned before perturbing)", ok, kPerturbInstances,
              aligned_before)};
}

// 12. mean-field transfer
Outcome mean_field() {
  std::vector<Point> pts;
  for (int i = 0; i < 8; ++i) pts.push_back(point({std::cos(0.7 * i) + 0.1 * i, std::sin(1.9 * i)}));
  const DiscreteMeasure mu0(pts, std::vector<std::int64_t>(8, 1));
  std::vector<std::uint64_t> seeds(kMeanFieldSeeds);
  std::iota(seeds.begin(), seeds.end(), 1);
  const auto study = mean_field_study(barycentric_field(1.0), mu0, atom_jitter_sampler(mu0, 0.1), {8, 16, 32}, seeds,
                                      1.0, 0.0, Scheme::implicit(1e-2), kMeanFieldSlack);
  double worst = -INFINITY;
  for (const auto& r : study.rows) worst = std::max(worst, r.final_error - r.bound);
  return {study.pass, fmt("%zu runs (N in {8, 16, 32} x %d seeds), max(final - bound) = %.2e (<= 0)",
                          study.rows.size(), kMeanFieldSeeds, worst)};
}

}  // namespace

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> table{
      {"W2 oracle equivalence", w2_oracle},
      {"exponential-formula error", exponential_formula},
      {"implicit Euler measure bound", implicit_euler_bound},
      {"contraction", contraction},
      {"sticky collision", sticky_collision},
      {"total-dissipativity verifier", total_dissipativity},
      {"Yosida monotone limit", yosida_limit},
      {"geodesic decomposition", geodesic_decomposition},
      {"JKO equals resolvent", jko_resolvent},
      {"EVI residuals", evi},
      {"injectivity perturbation", perturbation},
      {"mean-field transfer", mean_field},
  };
  return table;
}

int run(const std::set<std::size_t>& only, std::FILE* out) {
  const auto& all = criteria();
  for (std::size_t k : only)
    if (k < 1 || k > all.size()) throw DomainError("unknown acceptance criterion " + std::to_string(k));
  int failed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Outcome res;
    try {
      res = all[i].run();
    } catch (const std::exception& e) {
      res = {false, std::string("error: ") + e.what()};
    }
    if (!res.pass) ++failed;
    std::fprintf(out, "%s %2zu %s: %s\n", res.pass ? "PASS" : "FAIL", i + 1, all[i].name, res.detail.c_str());
    std::fflush(out);
  }
  return failed;
}

}  // namespace wflow::acceptance
