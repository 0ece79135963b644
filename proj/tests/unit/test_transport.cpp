#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "wflow/assignment.hpp"
#include "wflow/error.hpp"
#include "wflow/transport.hpp"

using namespace wflow;
using testutil::pt;
using testutil::pt1;

namespace {

// Independent oracle: expand by hand and enumerate permutations.
std::vector<Point> expand_naive(const DiscreteMeasure& mu, std::int64_t n) {
  std::vector<Point> out;
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::int64_t k = 0; k < mu.multiplicity(i) * (n / mu.denominator()); ++k) out.push_back(mu.atom(i));
  return out;
}

double oracle_w2_squared(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const std::int64_t n = std::lcm(a.denominator(), b.denominator());
  const auto x = expand_naive(a, n);
  const auto y = expand_naive(b, n);
  std::vector<std::size_t> p(x.size());
  std::iota(p.begin(), p.end(), 0);
  double best = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) c += (x[k] - y[p[k]]).squaredNorm();
    best = std::min(best, c);
  } while (std::next_permutation(p.begin(), p.end()));
  return best / static_cast<double>(n);
}

double oracle_winf(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const std::int64_t n = std::lcm(a.denominator(), b.denominator());
  const auto x = expand_naive(a, n);
  const auto y = expand_naive(b, n);
  std::vector<std::size_t> p(x.size());
  std::iota(p.begin(), p.end(), 0);
  double best = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) c = std::max(c, (x[k] - y[p[k]]).norm());
    best = std::min(best, c);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

DiscreteMeasure square_bottom() { return DiscreteMeasure({pt({0, 0}), pt({1, 0})}, {1, 1}); }
DiscreteMeasure square_top() { return DiscreteMeasure({pt({0, 1}), pt({1, 1})}, {1, 1}); }

Coupling swap_coupling() {
  Coupling::MassMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return Coupling(square_bottom(), square_top(), m);
}

Coupling crossing_coupling() {
  // sorted source: (0,0),(1,1); sorted target: (1,-1),(2,0)
  Coupling::MassMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return Coupling(DiscreteMeasure({pt({0, 0}), pt({1, 1})}, {1, 1}), DiscreteMeasure({pt({2, 0}), pt({1, -1})}, {1, 1}),
                  m);
}

Eigen::MatrixXd rotation(double angle) {
  Eigen::MatrixXd r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

DiscreteMeasure map_atoms(const DiscreteMeasure& mu, const Eigen::MatrixXd& a, const Point& b) {
  std::vector<Point> atoms;
  for (const auto& x : mu.atoms()) atoms.push_back(a * x + b);
  return DiscreteMeasure(atoms, mu.multiplicities());
}

}  // namespace

TEST_SUITE("assignment") {
  TEST_CASE("hungarian matches enumeration on random matrices") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int rep = 0; rep < 100; ++rep) {
      const int n = 1 + rep % 7;
      Eigen::MatrixXd c(n, n);
      for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
      const auto res = solve_assignment(c);
      std::vector<std::size_t> p(static_cast<std::size_t>(n));
      std::iota(p.begin(), p.end(), 0);
      double best = INFINITY;
      do {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += c(k, static_cast<Eigen::Index>(p[static_cast<std::size_t>(k)]));
        best = std::min(best, s);
      } while (std::next_permutation(p.begin(), p.end()));
      CHECK(res.total_cost == doctest::Approx(best).epsilon(1e-12));
      // dual feasibility and complementary slackness
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) CHECK(res.row_potential(i) + res.col_potential(j) <= c(i, j) + 1e-9);
    }
  }

  TEST_CASE("perfect matching feasibility") {
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> a(3, 3);
    a << true, true, false, true, false, false, false, true, true;
    std::vector<std::size_t> m;
    CHECK(has_perfect_matching(a, &m));
    CHECK(m[1] == 0);
    a(2, 1) = false;
    a(2, 2) = false;
    CHECK_FALSE(has_perfect_matching(a));
  }
}

TEST_SUITE("transport") {
  TEST_CASE("w2 of two Diracs") {
    const auto r = w2_exact(DiscreteMeasure::dirac(pt1(0)), DiscreteMeasure::dirac(pt1(2)));
    CHECK(r.distance == doctest::Approx(2.0));
    CHECK(r.squared == doctest::Approx(4.0));
  }

  TEST_CASE("w2 of the unit square rows is one") {
    const auto r = w2_exact(square_bottom(), square_top());
    CHECK(r.distance == doctest::Approx(1.0));
    CHECK(r.plan.cost() == doctest::Approx(1.0));
    CHECK(r.plan.mass()(0, 0) == 1);
    CHECK(r.plan.mass()(1, 1) == 1);
    CHECK(w2_bruteforce(square_bottom(), square_top()) == doctest::Approx(1.0));
  }

  TEST_CASE("w2 of a measure with itself is zero with identity plan") {
    const DiscreteMeasure mu({pt({0, 0}), pt({1, 3}), pt({2, 2})}, {1, 2, 3});
    const auto r = w2_exact(mu, mu);
    CHECK(r.distance == 0.0);
    const auto id = Coupling::identity(mu);
    CHECK(r.plan.mass() == id.mass());
  }

  TEST_CASE("bruteforce values") {
    CHECK(w2_bruteforce(DiscreteMeasure::dirac(pt1(0)), DiscreteMeasure::dirac(pt1(0))) == 0.0);
    const DiscreteMeasure a({pt1(0), pt1(1), pt1(2)}, {1, 1, 1});
    const DiscreteMeasure b({pt1(5), pt1(6), pt1(7)}, {1, 1, 1});
    CHECK(w2_bruteforce(a, b) == doctest::Approx(5.0));
    CHECK(w2_exact(a, b).distance == doctest::Approx(5.0));
    CHECK(w2_bruteforce(DiscreteMeasure::dirac(pt1(0)), DiscreteMeasure::dirac(pt1(2))) == doctest::Approx(2.0));
  }

  TEST_CASE("w2 errors") {
    CHECK_THROWS_AS(w2_exact(DiscreteMeasure::dirac(pt1(0)), DiscreteMeasure::dirac(pt({0, 0}))), DomainError);
    CHECK_THROWS_AS(w2_exact(DiscreteMeasure::dirac(pt1(0)), DiscreteMeasure::dirac(pt1(1)), 0), CapacityError);
    const DiscreteMeasure nine({pt1(0), pt1(1)}, {4, 5});
    CHECK_THROWS_AS(w2_bruteforce(nine, nine), CapacityError);
    const DiscreteMeasure big({pt1(0), pt1(1)}, {30, 35});
    CHECK_THROWS_AS(w_infinity(big, big), CapacityError);
  }

  TEST_CASE("w2_exact agrees with an enumeration oracle") {
    std::mt19937_64 rng(2024);
    for (int rep = 0; rep < 150; ++rep) {
      const int d = 1 + rep % 3;
      const auto a = testutil::random_measure(rng, d, std::uniform_int_distribution<std::int64_t>(1, 6)(rng));
      const auto b = testutil::random_measure(rng, d, std::uniform_int_distribution<std::int64_t>(1, 6)(rng));
      if (std::lcm(a.denominator(), b.denominator()) > 7) continue;
      const double oracle = oracle_w2_squared(a, b);
      const auto r = w2_exact(a, b);
      CHECK(r.squared == doctest::Approx(oracle).epsilon(1e-12));
      CHECK(r.plan.cost() == doctest::Approx(oracle).epsilon(1e-12));
      CHECK(w2_bruteforce(a, b) == doctest::Approx(std::sqrt(oracle)).epsilon(1e-12));
    }
  }

  TEST_CASE("w2 metric axioms and invariances") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 60; ++rep) {
      const auto a = testutil::random_measure(rng, 2, std::uniform_int_distribution<std::int64_t>(1, 5)(rng));
      const auto b = testutil::random_measure(rng, 2, std::uniform_int_distribution<std::int64_t>(1, 5)(rng));
      const auto c = testutil::random_measure(rng, 2, std::uniform_int_distribution<std::int64_t>(1, 5)(rng));
      const double ab = w2_exact(a, b).distance, ba = w2_exact(b, a).distance;
      const double bc = w2_exact(b, c).distance, ac = w2_exact(a, c).distance;
      CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
      CHECK(ac <= ab + bc + 1e-9);
      const auto rot = rotation(0.3 + rep);
      const Point shift = pt({1.5, -2.0});
      CHECK(w2_exact(map_atoms(a, rot, shift), map_atoms(b, rot, shift)).distance ==
            doctest::Approx(ab).epsilon(1e-9));
    }
  }

  TEST_CASE("w_infinity values and oracle") {
    CHECK(w_infinity(DiscreteMeasure::dirac(pt1(0)), DiscreteMeasure::dirac(pt1(2))) == doctest::Approx(2.0));
    CHECK(w_infinity(DiscreteMeasure({pt1(0), pt1(10)}, {1, 1}), DiscreteMeasure({pt1(1), pt1(9)}, {1, 1})) ==
          doctest::Approx(1.0));
    const DiscreteMeasure mu({pt({0, 0}), pt({1, 3})}, {1, 2});
    CHECK(w_infinity(mu, mu) == 0.0);
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 60; ++rep) {
      const auto a = testutil::random_measure(rng, 2, std::uniform_int_distribution<std::int64_t>(1, 6)(rng));
      const auto b = testutil::random_measure(rng, 2, a.denominator());
      CHECK(w_infinity(a, b) == doctest::Approx(oracle_winf(a, b)).epsilon(1e-12));
      CHECK(w_infinity(a, b) >= w2_exact(a, b).distance - 1e-12);
    }
  }

  TEST_CASE("optimal plans are cyclically monotone") {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 40; ++rep) {
      const auto a = testutil::random_measure(rng, 2, std::uniform_int_distribution<std::int64_t>(1, 6)(rng));
      const auto b = testutil::random_measure(rng, 2, std::uniform_int_distribution<std::int64_t>(1, 6)(rng));
      const auto plan = w2_exact(a, b).plan;
      const auto rep_cm = cyclical_monotonicity_check(plan, std::max<std::size_t>(2, plan.support().size()));
      CHECK(rep_cm.pass);
      CHECK_FALSE(rep_cm.witness.has_value());
    }
  }

  TEST_CASE("swap coupling fails cyclical monotonicity with a 2-cycle") {
    const auto r = cyclical_monotonicity_check(swap_coupling(), 2);
    CHECK_FALSE(r.pass);
    REQUIRE(r.witness.has_value());
    CHECK(r.witness->size() == 2);
    CHECK(r.worst_sum < -1e-9);
  }

  TEST_CASE("identity coupling passes cyclical monotonicity") {
    const DiscreteMeasure mu({pt({0, 0}), pt({1, 3}), pt({2, 2})}, {1, 2, 3});
    CHECK(cyclical_monotonicity_check(Coupling::identity(mu), 3).pass);
  }

  TEST_CASE("non-optimal plans are caught by a full-length check") {
    std::mt19937_64 rng(17);
    int caught = 0, suboptimal = 0;
    for (int rep = 0; rep < 60; ++rep) {
      const auto a = testutil::random_measure(rng, 2, 5, 5);
      const auto b = testutil::random_measure(rng, 2, 5, 5);
      std::vector<std::size_t> sigma(5);
      std::iota(sigma.begin(), sigma.end(), 0);
      std::shuffle(sigma.begin(), sigma.end(), rng);
      const auto g = Coupling::from_matching(a, b, sigma);
      if (g.cost() > w2_exact(a, b).squared * (1 + 1e-9) + 1e-9) {
        ++suboptimal;
        if (!cyclical_monotonicity_check(g, std::max<std::size_t>(2, g.support().size())).pass) ++caught;
      }
    }
    CHECK(suboptimal > 0);
    CHECK(caught == suboptimal);
  }

  TEST_CASE("local optimality certificate") {
    const DiscreteMeasure src({pt1(0), pt1(10)}, {1, 1});
    const DiscreteMeasure tgt({pt1(5), pt1(5.5)}, {1, 1});
    Coupling::MassMatrix m(2, 2);
    m << 1, 0, 0, 1;
    const Coupling g(src, tgt, m);
    CHECK(local_optimality_certificate(g) == Certificate::CertifiedOptimal);
    CHECK(w2_exact(src, tgt).squared == doctest::Approx(g.cost()));
    CHECK(local_optimality_certificate(Coupling::identity(src)) == Certificate::CertifiedOptimal);
    CHECK(local_optimality_certificate(swap_coupling()) == Certificate::Unknown);
  }

  TEST_CASE("certificates are never contradicted") {
    std::mt19937_64 rng(19);
    int certified = 0;
    for (int rep = 0; rep < 200; ++rep) {
      const auto a = testutil::random_measure(rng, 2, 4, 4);
      std::vector<Point> moved;
      std::normal_distribution<double> g(0.0, 0.15);
      for (std::size_t i = 0; i < a.size(); ++i) moved.push_back(a.atom(i) + pt({g(rng), g(rng)}));
      const DiscreteMeasure b(moved, a.multiplicities());
      std::vector<std::size_t> sigma(static_cast<std::size_t>(a.denominator()));
      // match each expanded source particle to the image of its own atom
      const auto xa = expand(a, a.denominator());
      const auto xb = expand(b, b.denominator());
      std::vector<bool> used(sigma.size(), false);
      for (std::size_t n = 0; n < sigma.size(); ++n) {
        std::size_t atom = 0;
        while (a.atom(atom) != xa.particle(n)) ++atom;
        for (std::size_t k = 0; k < sigma.size(); ++k)
          if (!used[k] && xb.particle(k) == moved[atom]) {
            sigma[n] = k;
            used[k] = true;
            break;
          }
      }
      const auto plan = Coupling::from_matching(a, b, sigma);
      if (local_optimality_certificate(plan) == Certificate::CertifiedOptimal) {
        ++certified;
        CHECK(plan.cost() == doctest::Approx(w2_exact(a, b).squared).epsilon(1e-9));
      }
    }
    CHECK(certified > 10);
  }

  TEST_CASE("alternative optima detection") {
    // equidistant configuration: two optimal plans
    const DiscreteMeasure a({pt({0, 0}), pt({2, 0})}, {1, 1});
    const DiscreteMeasure b({pt({1, 1}), pt({1, -1})}, {1, 1});
    CHECK(has_alternative_optimum(w2_exact(a, b).plan));
    CHECK_FALSE(has_alternative_optimum(w2_exact(square_bottom(), square_top()).plan));
    // split mass between equal-cost targets
    const DiscreteMeasure c = DiscreteMeasure::dirac(pt1(0));
    const DiscreteMeasure e({pt1(-1), pt1(1)}, {1, 1});
    CHECK_FALSE(has_alternative_optimum(w2_exact(c, e).plan));
  }

  TEST_CASE("geodesic decomposition of optimal plans is one segment") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 20; ++rep) {
      const auto a = testutil::random_measure(rng, 2, 4, 4);
      const auto b = testutil::random_measure(rng, 2, 4, 4);
      const auto plan = w2_exact(a, b).plan;
      const auto dec = geodesic_decompose(plan);
      CHECK(dec.segments() == 1);
      CHECK(dec.breakpoints.front() == 0.0);
      CHECK(dec.breakpoints.back() == 1.0);
    }
  }

  TEST_CASE("identity coupling decomposes trivially") {
    const auto dec = geodesic_decompose(Coupling::identity(square_bottom()));
    CHECK(dec.segments() == 1);
    CHECK(dec.plan_cost == 0.0);
  }

  TEST_CASE("crossing coupling breaks at the midpoint") {
    const auto g = crossing_coupling();
    CHECK(g.cost() == doctest::Approx(4.0));
    CHECK(w2_exact(g.source(), g.target()).squared == doctest::Approx(2.0));
    const auto dec = geodesic_decompose(g);
    REQUIRE(dec.segments() >= 2);
    CHECK(dec.breakpoints[1] == doctest::Approx(0.5).epsilon(1e-6));
    double length = 0.0;
    for (std::size_t k = 0; k < dec.segments(); ++k) {
      CHECK(dec.speeds[k] == doctest::Approx(std::sqrt(dec.plan_cost)).epsilon(1e-6));
      length += (dec.breakpoints[k + 1] - dec.breakpoints[k]) * dec.speeds[k];
    }
    CHECK(length == doctest::Approx(std::sqrt(dec.plan_cost)).epsilon(1e-6));
  }

  TEST_CASE("geodesic decomposition rejects bad tolerance") {
    CHECK_THROWS_AS(geodesic_decompose(crossing_coupling(), 0.0), DomainError);
  }

  TEST_CASE("chord alignment") {
    auto r = check_chords_alignment({pt({0, 0}), pt({1, 0})}, {pt({0, 0}), pt({0, 1})});
    CHECK_FALSE(r.aligned);
    r = check_chords_alignment({pt({0, 0}), pt({1, 1})}, {pt({5, 5}), pt({7, 7})});
    CHECK(r.aligned);
    REQUIRE(r.direction.has_value());
    CHECK(std::abs((*r.direction)(0) - (*r.direction)(1)) < 1e-12);
    CHECK_FALSE(check_chords_alignment({pt({0, 0}), pt({1, 1})}, {pt({5, 5})}).aligned);
    CHECK_THROWS_AS(check_chords_alignment({pt1(0), pt1(1)}, {pt1(2), pt1(3)}), DomainError);
  }

  TEST_CASE("perturbation for injectivity") {
    const std::vector<Point> a{pt({0, 0}), pt({1, 0})};
    const auto b2 = perturb_for_injectivity(a, a, 1e-3, 42);
    REQUIRE(b2.size() == 2);
    for (std::size_t n = 0; n < 2; ++n) CHECK((b2[n] - a[n]).norm() < 1e-3);
    CHECK(injective_family_ok(a, a, b2));
    // the family reaches the perturbed set with no parallel chord for s in (0,1]
    for (double s : {1e-6, 0.1, 0.5, 1.0}) {
      std::vector<Point> bs{(1 - s) * a[0] + s * b2[0], (1 - s) * a[1] + s * b2[1]};
      CHECK_FALSE(check_chords_alignment(a, bs).aligned);
    }
    CHECK(perturb_for_injectivity(a, a, 1e-3, 42) == b2);  // seeded
    CHECK_THROWS_AS(perturb_for_injectivity(a, a, 0.0, 1), DomainError);
  }

  TEST_CASE("perturbation of random point clouds") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<Point> a, b;
      for (int k = 0; k < 10; ++k) {
        a.push_back(pt({g(rng), g(rng)}));
        b.push_back(pt({g(rng), g(rng)}));
      }
      const auto bp = perturb_for_injectivity(a, b, 1e-3, static_cast<std::uint64_t>(rep));
      CHECK(injective_family_ok(a, b, bp));
      for (std::size_t n = 0; n < b.size(); ++n) CHECK((bp[n] - b[n]).norm() < 1e-3);
    }
  }
}
