#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "wflow/error.hpp"
#include "wflow/flows.hpp"
#include "wflow/transport.hpp"

using namespace wflow;
using testutil::pt;
using testutil::pt1;

namespace {

const Functional kQuadInteraction(Profile::zero(), Profile::quadratic(1.0));
const Functional kSticky(Profile::zero(), Profile::abs(1.0));

DiscreteMeasure pair(double a, double b) { return DiscreteMeasure({pt1(a), pt1(b)}, {1, 1}); }

Point mean_of(const DiscreteMeasure& mu) {
  Point m = Point::Zero(mu.dim());
  for (std::size_t i = 0; i < mu.size(); ++i) m += mu.weight(i) * mu.atom(i);
  return m;
}

VelocityField neg_identity() { return linear_field(-Eigen::MatrixXd::Identity(1, 1)); }

}  // namespace

TEST_SUITE("flows") {
  TEST_CASE("quadratic interaction contracts to the barycenter") {
    const double tau = 1e-3;
    const auto flow = evolve(kQuadInteraction, pair(0.0, 2.0), Scheme::implicit(tau), 1.0);
    REQUIRE(flow.size() == 1001);
    CHECK(flow.times.back() == 1.0);
    const auto& mu = flow.final_measure();
    REQUIRE(mu.size() == 2);
    // exact flow 1 -/+ e^{-t}; implicit steps give 1 -/+ (1 + tau)^{-n}
    CHECK(mu.atom(0)(0) == doctest::Approx(1.0 - std::pow(1.0 + tau, -1000.0)).epsilon(1e-8));
    CHECK(mu.atom(1)(0) == doctest::Approx(1.0 + std::pow(1.0 + tau, -1000.0)).epsilon(1e-8));
    CHECK(std::abs(w2_exact(mu, DiscreteMeasure::dirac(pt1(1.0))).distance - std::exp(-1.0)) <= 1e-3);
  }

  TEST_CASE("zero field gives a constant flow") {
    const DiscreteMeasure mu({pt({0, 1}), pt({2, -1}), pt({3, 3})}, {1, 2, 1});
    const auto flow = evolve(zero_field(), mu, Scheme::implicit(0.1), 1.0);
    for (const auto& m : flow.measures) CHECK(m == mu);
    const auto ex = evolve(zero_field(), mu, Scheme::explicit_euler(0.1), 1.0);
    CHECK(ex.final_measure() == mu);
  }

  TEST_CASE("sticky pair collides at t = 2 and stays merged") {
    EvolveOptions opts;
    opts.merge_eps = 1e-6;
    const double tau = 1e-3;
    const auto flow = evolve(kSticky, pair(-1.0, 1.0), Scheme::implicit(tau), 3.0, opts);
    double collision = -1.0;
    for (std::size_t k = 0; k < flow.size(); ++k) {
      if (flow.measures[k].size() == 1 && collision < 0.0) collision = flow.times[k];
      if (collision >= 0.0) {
        CHECK(flow.measures[k].size() == 1);
        CHECK(flow.measures[k].atom(0)(0) == doctest::Approx(0.0).scale(1.0));
      }
    }
    CHECK(collision >= 1.95);
    CHECK(collision <= 2.05);
    CHECK(sticky_diagnostics(flow, 0.0).all());
  }

  TEST_CASE("flow records satisfy the projection invariant") {
    std::mt19937_64 rng(2);
    const auto mu0 = testutil::random_measure(rng, 2, 5);
    EvolveOptions opts;
    opts.record_stride = 3;
    const auto flow = evolve(Functional(Profile::quadratic(0.5), Profile::abs(1.0)), mu0, Scheme::implicit(0.1), 1.0,
                             opts);
    CHECK(flow.times.front() == 0.0);
    CHECK(flow.size() == 5);  // steps 0, 3, 6, 9, 10
    CHECK(flow.times.back() == 1.0);
    for (std::size_t k = 0; k < flow.size(); ++k) {
      if (k > 0) CHECK(flow.times[k] > flow.times[k - 1]);
      CHECK(flow.measures[k] == iota_project(flow.lagrangian[k], opts.merge_eps));
      CHECK(flow.diagnostics[k].support_cardinality == flow.measures[k].size());
    }
  }

  TEST_CASE("uneven step sizes are spread uniformly") {
    const auto flow = evolve(neg_identity(), DiscreteMeasure::dirac(pt1(1.0)), Scheme::implicit(0.3), 1.0);
    REQUIRE(flow.size() == 5);
    CHECK(flow.times[1] == doctest::Approx(0.25));
    CHECK(flow.final_measure().atom(0)(0) == doctest::Approx(std::pow(1.25, -4.0)).epsilon(1e-9));
  }

  TEST_CASE("evolve validates its inputs") {
    const auto mu = pair(0.0, 1.0);
    CHECK_THROWS_AS(evolve(neg_identity(), mu, Scheme::implicit(0.0), 1.0), DomainError);
    CHECK_THROWS_AS(evolve(neg_identity(), mu, Scheme::implicit(0.1), -1.0), DomainError);
    CHECK_THROWS_AS(evolve(neg_identity(), mu, Scheme::exponential(0), 1.0), DomainError);
    CHECK_THROWS_AS(evolve(kSticky, mu, Scheme::explicit_euler(0.1), 1.0), DomainError);
    CHECK_THROWS_AS(evolve(linear_field(Eigen::MatrixXd::Identity(1, 1)), mu, Scheme::implicit(1.0), 2.0),
                    DomainError);
    EvolveOptions bad;
    bad.lift_permutation = {0, 0};
    CHECK_THROWS_AS(evolve(neg_identity(), mu, Scheme::implicit(0.1), 1.0, bad), DomainError);
    bad.lift_permutation = {0};
    CHECK_THROWS_AS(evolve(neg_identity(), mu, Scheme::implicit(0.1), 1.0, bad), DomainError);
  }

  TEST_CASE("flows do not depend on the lift ordering") {
    std::mt19937_64 rng(19);
    const std::vector<VelocityField> fields{
        Functional(Profile::quadratic(0.5), Profile::abs(1.0)).subgradient_field(),
        Functional(Profile::quartic(0.3), Profile::quadratic(1.0)).subgradient_field(),
        barycentric_field(1.0, pt({0.5, 0.0})),
        lipschitz_example_field(0.5),
    };
    for (const auto& f : fields)
      for (int rep = 0; rep < 4; ++rep) {
        const auto mu0 = testutil::random_measure(rng, 2, 6);
        EvolveOptions shuffled;
        shuffled.lift_permutation.resize(6);
        std::iota(shuffled.lift_permutation.begin(), shuffled.lift_permutation.end(), 0);
        std::shuffle(shuffled.lift_permutation.begin(), shuffled.lift_permutation.end(), rng);
        const auto a = evolve(f, mu0, Scheme::implicit(0.05), 1.0);
        const auto b = evolve(f, mu0, Scheme::implicit(0.05), 1.0, shuffled);
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(a.measures[k] == b.measures[k]);
      }
  }

  TEST_CASE("semigroup property at the measure level") {
    std::mt19937_64 rng(23);
    const Functional phi(Profile::quadratic(1.0), Profile::abs(0.5));
    for (int rep = 0; rep < 5; ++rep) {
      const auto mu0 = testutil::random_measure(rng, 2, 4);
      const auto direct = evolve(phi, mu0, Scheme::implicit(0.01), 1.0).final_measure();
      const auto half = evolve(phi, mu0, Scheme::implicit(0.01), 0.4).final_measure();
      const auto rest = evolve(phi, half, Scheme::implicit(0.01), 0.6).final_measure();
      CHECK(w2_exact(direct, rest).distance <= 2e-9);
    }
  }

  TEST_CASE("barycenter is conserved by even interactions") {
    std::mt19937_64 rng(7);
    for (const auto& w : {Profile::quadratic(1.0), Profile::abs(1.0), Profile::quartic(0.5)}) {
      const Functional phi(Profile::zero(), w);
      for (int rep = 0; rep < 4; ++rep) {
        const auto mu0 = testutil::random_measure(rng, 2, 5);
        const auto flow = evolve(phi, mu0, Scheme::implicit(0.05), 1.0);
        for (const auto& mu : flow.measures) CHECK((mean_of(mu) - mean_of(mu0)).norm() <= 1e-9);
      }
    }
  }

  TEST_CASE("exponential and explicit schemes") {
    const auto mu = DiscreteMeasure::dirac(pt1(1.0));
    const auto ex = evolve(neg_identity(), mu, Scheme::exponential(100), 1.0);
    CHECK(ex.size() == 101);
    CHECK(ex.final_measure().atom(0)(0) == doctest::Approx(std::pow(1.01, -100.0)).epsilon(1e-7));
    const auto fe = evolve(neg_identity(), mu, Scheme::explicit_euler(0.1), 1.0);
    CHECK(fe.final_measure().atom(0)(0) == doctest::Approx(std::pow(0.9, 10)).epsilon(1e-12));
  }

  TEST_CASE("closed-form reference flows solve their ODEs") {
    std::mt19937_64 rng(3);
    const auto mu0 = testutil::random_measure(rng, 2, 4, 4);
    // compare each atom path with a centered difference of the ODE it should solve
    auto check = [&](const ReferenceFlow& ref, const std::function<Point(const Point&, const Point&)>& rhs) {
      const double t = 0.7, h = 1e-5;
      const auto a = ref(t - h), b = ref(t + h), c = ref(t);
      const Point m = mean_of(c);
      for (std::size_t i = 0; i < mu0.size(); ++i) {
        // atoms keep their relative order along these smooth flows
        const Point deriv = (b.atom(i) - a.atom(i)) / (2.0 * h);
        CHECK((deriv - rhs(c.atom(i), m)).norm() <= 1e-6);
      }
      CHECK(w2_exact(ref(0.0), mu0).distance <= 1e-14);
    };
    Eigen::MatrixXd a(2, 2);
    a << -1.0, 0.5, 0.0, -0.3;
    const Eigen::Vector2d bvec(0.2, -0.1);
    check(linear_reference(a, bvec, mu0), [&](const Point& x, const Point&) -> Point { return a * x + bvec; });
    const Point v0 = pt({0.3, 0.1});
    check(barycentric_reference(2.0, v0, mu0),
          [&](const Point& x, const Point& m) -> Point { return 2.0 * (m - x) + v0; });
    check(pw_quadratic_reference(0.5, 1.5, mu0),
          [&](const Point& x, const Point& m) -> Point { return -0.5 * x - 1.5 * (x - m); });
  }

  TEST_CASE("EVI residual trivial cases") {
    // stationary flow at the minimizer of a quadratic potential
    const Functional phi(Profile::quadratic(1.0), Profile::zero());
    const auto f = phi.subgradient_field();
    const auto at_min = evolve(phi, DiscreteMeasure::dirac(pt1(0.0)), Scheme::implicit(0.1), 1.0);
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 10; ++rep) {
      const auto nu = testutil::random_measure(rng, 1, 3);
      const auto rep_evi = evi_residual(at_min, f, phi.lambda_conv(), nu);
      for (double r : rep_evi.residuals) CHECK(r <= 1e-12);
    }
    // nu equal to a stationary measure
    const auto still = evolve(zero_field(), pair(0.0, 1.0), Scheme::implicit(0.1), 1.0);
    const auto same = evi_residual(still, zero_field(), 0.0, pair(0.0, 1.0));
    for (double r : same.residuals) CHECK(r == doctest::Approx(0.0).scale(1.0));
    CHECK_THROWS_AS(evi_residual(evolve(zero_field(), pair(0, 1), Scheme::implicit(1.0), 1.0), zero_field(), 0.0,
                                 pair(0, 1)),
                    DomainError);
  }

  TEST_CASE("EVI residuals along the quadratic interaction flow") {
    std::mt19937_64 rng(10);
    const Functional phi(Profile::quadratic(1.0), Profile::quadratic(1.0));
    const auto f = phi.subgradient_field();
    const double tau = 1e-3, dt = 1e-2;
    const auto mu0 = testutil::random_measure(rng, 2, 4, 4);
    EvolveOptions opts;
    opts.record_stride = 10;
    const auto flow = evolve(phi, mu0, Scheme::implicit(tau), 0.5, opts);
    const double m0 = measure_stats(mu0).second_moment;
    for (int rep = 0; rep < 50; ++rep) {
      const auto nu = testutil::random_measure(rng, 2, 3);
      const auto evi = evi_residual(flow, f, phi.lambda_conv(), nu);
      const double scale = 1.0 + measure_stats(nu).second_moment + m0;
      CHECK(evi.max_residual(true) <= 5.0 * (tau + dt * dt) * scale);
    }
  }

  TEST_CASE("contraction checks") {
    const auto mu = pair(0.0, 1.0);
    const auto same = contraction_check(neg_identity(), mu, mu, 0.0, {0.5, 1.0}, Scheme::implicit(0.01));
    CHECK(same.pass);
    for (double r : same.ratios) CHECK(r == 0.0);

    const auto lin = contraction_check(neg_identity(), mu, pair(2.0, 5.0), 0.0, {0.5, 1.0}, Scheme::implicit(1e-3));
    CHECK(lin.pass);
    REQUIRE(lin.ratios.size() == 2);
    CHECK(lin.ratios[0] == doctest::Approx(std::exp(-0.5)).epsilon(1e-3));
    CHECK(lin.ratios[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));

    const auto sticky = contraction_check(kSticky.subgradient_field(), pair(-1.0, 1.0), pair(-0.7, 1.3), 0.0,
                                          {0.5, 1.0, 2.0, 3.0}, Scheme::implicit(1e-3));
    for (double r : sticky.ratios) CHECK(r <= 1.0 + 1e-3);
    CHECK(sticky.pass);

    const auto expand_field = linear_field(Eigen::MatrixXd::Identity(1, 1));
    CHECK_FALSE(contraction_check(expand_field, mu, pair(2.0, 5.0), 0.0, {0.5}, Scheme::implicit(0.01)).pass);
  }

  TEST_CASE("jko step closed forms") {
    const Functional quad(Profile::quadratic(1.0), Profile::zero());
    for (double tau : {0.1, 0.5, 2.0}) {
      const auto out = jko_step(quad, DiscreteMeasure::dirac(pt({1.0, -2.0})), tau);
      REQUIRE(out.size() == 1);
      CHECK(out.atom(0)(0) == doctest::Approx(1.0 / (1.0 + tau)).epsilon(1e-8));
      CHECK(out.atom(0)(1) == doctest::Approx(-2.0 / (1.0 + tau)).epsilon(1e-8));
    }
    const auto mu = DiscreteMeasure({pt1(0.5), pt1(3.0)}, {2, 1});
    CHECK(jko_step(Functional(Profile::zero(), Profile::zero()), mu, 0.3) == mu);
  }

  TEST_CASE("jko step is close to mu for small tau") {
    std::mt19937_64 rng(12);
    const Functional phi(Profile::quadratic(1.0), Profile::quartic(0.5));
    for (int rep = 0; rep < 10; ++rep) {
      const auto mu = testutil::random_measure(rng, 2, 5);
      const double speed = eval_on_measure(phi.subgradient_field(), mu).l2_norm;
      for (double tau : {1e-2, 1e-3}) {
        const auto out = jko_step(phi, mu, tau);
        CHECK(w2_exact(mu, out).distance <= tau * speed / (1.0 - phi.subgradient_field().lambda() * tau) + 1e-9);
      }
    }
  }

  TEST_CASE("jko step beats random competitors on the JKO objective") {
    std::mt19937_64 rng(14);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::vector<Functional> phis{Functional(Profile::quadratic(1.0), Profile::quadratic(0.5)),
                                       Functional(Profile::abs(0.5), Profile::abs(1.0)),
                                       Functional(Profile::quartic(0.2), Profile::abs(0.7))};
    for (const auto& phi : phis)
      for (int rep = 0; rep < 6; ++rep) {
        const auto mu = testutil::random_measure(rng, 2, 4);
        const double tau = 0.2 + 0.3 * rep;
        const auto out = jko_step(phi, mu, tau);
        const double best = jko_objective(phi, mu, out, tau);
        for (int c = 0; c < 100; ++c) {
          const double radius = std::pow(10.0, -1.0 - 4.0 * (c % 5) / 4.0);
          std::vector<Point> atoms;
          for (const auto& a : out.atoms()) atoms.push_back(a + radius * pt({g(rng), g(rng)}));
          const DiscreteMeasure near(atoms, out.multiplicities());
          CHECK(best <= jko_objective(phi, mu, near, tau) + 1e-12);
          if (c % 10 == 0) CHECK(best <= jko_objective(phi, mu, testutil::random_measure(rng, 2, 4), tau) + 1e-12);
        }
        CHECK(best <= jko_objective(phi, mu, mu, tau) + 1e-12);
      }
  }

  TEST_CASE("implicit error study on the linear field") {
    const auto mu0 = DiscreteMeasure::dirac(pt1(1.0));
    const auto f = neg_identity();
    const std::vector<std::size_t> ns{4, 16, 64, 256};
    const auto study = implicit_error_study(f, mu0, 1.0, ns,
                                            linear_reference(-Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1),
                                                             mu0));
    CHECK(study.pass);
    REQUIRE(study.rows.size() == 4);
    for (std::size_t i = 0; i < ns.size(); ++i) {
      const double n = static_cast<double>(ns[i]);
      CHECK(study.rows[i].error == doctest::Approx(std::abs(std::pow(1.0 + 1.0 / n, -n) - std::exp(-1.0))).epsilon(1e-6));
      CHECK(study.rows[i].bound == doctest::Approx(2.0 / std::sqrt(n)));
      if (i > 0) CHECK(study.rows[i].error < study.rows[i - 1].error);
    }
    CHECK(study.rows[1].error == doctest::Approx(0.0122).epsilon(0.01));

    const auto fine = implicit_error_study(f, mu0, 1.0, {4, 16});
    CHECK(fine.pass);
    CHECK(fine.rows[0].error == doctest::Approx(study.rows[0].error).epsilon(2e-2));

    const auto zero = implicit_error_study(zero_field(), pair(0.0, 1.0), 1.0, {4, 16});
    for (const auto& row : zero.rows) CHECK(row.error == 0.0);
    CHECK_THROWS_AS(implicit_error_study(f, mu0, 1.0, {}), DomainError);
  }

  TEST_CASE("atom jitter sampler is seeded and respects its radius") {
    const DiscreteMeasure mu0({pt({0, 0}), pt({1, 0}), pt({0, 1})}, {1, 1, 2});
    const auto sampler = atom_jitter_sampler(mu0, 0.05);
    const auto a = sampler(16, 7), b = sampler(16, 7), c = sampler(16, 8);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.denominator() == 16);
    for (const auto& x : a.atoms()) {
      double nearest = INFINITY;
      for (const auto& y : mu0.atoms()) nearest = std::min(nearest, (x - y).norm());
      CHECK(nearest <= 0.05);
    }
    CHECK(w2_exact(atom_jitter_sampler(mu0, 0.0)(4, 1), mu0).distance < 2.0);
  }

  TEST_CASE("mean field transfer") {
    std::vector<Point> pts;
    for (int i = 0; i < 8; ++i) pts.push_back(pt({std::cos(i * 0.8), std::sin(i * 1.3)}));
    const DiscreteMeasure mu0(pts, std::vector<std::int64_t>(8, 1));
    const auto f = barycentric_field(1.0);

    const MeasureSampler exact = [&](std::size_t, std::uint64_t) { return mu0; };
    const auto trivial = mean_field_study(f, mu0, exact, {8, 16}, {1, 2}, 1.0, 0.0, Scheme::implicit(0.01));
    for (const auto& row : trivial.rows) {
      CHECK(row.initial_error == 0.0);
      CHECK(row.final_error == 0.0);
    }

    const auto study = mean_field_study(f, mu0, atom_jitter_sampler(mu0, 0.1), {8, 16, 32}, {1, 2, 3}, 1.0, 0.0,
                                        Scheme::implicit(0.01));
    CHECK(study.pass);
    CHECK(study.rows.size() == 9);
    for (const auto& row : study.rows) CHECK(row.final_error <= row.initial_error * (1.0 + 1e-6) + 1e-9);

    // the linear flow scales every distance by the same factor
    const double tau = 0.01;
    const auto lin = mean_field_study(linear_field(-Eigen::MatrixXd::Identity(2, 2)), mu0,
                                      atom_jitter_sampler(mu0, 0.2), {8, 16}, {4, 5}, 1.0, -1.0, Scheme::implicit(tau));
    for (const auto& row : lin.rows)
      CHECK(row.final_error == doctest::Approx(std::pow(1.0 + tau, -100.0) * row.initial_error).epsilon(1e-7));
  }

  TEST_CASE("sticky diagnostics") {
    const auto still = evolve(zero_field(), pair(0.0, 1.0), Scheme::implicit(0.1), 1.0);
    CHECK(sticky_diagnostics(still, 0.0).all());

    const auto quad = evolve(kQuadInteraction, pair(0.0, 2.0), Scheme::implicit(0.01), 2.0);
    const auto rep = sticky_diagnostics(quad, 0.0);
    CHECK(rep.all());
    for (std::size_t k = 1; k < quad.size(); ++k) CHECK(quad.diagnostics[k].diameter < quad.diagnostics[k - 1].diameter);

    EvolveOptions opts;
    opts.merge_eps = 1e-6;
    const auto sticky = evolve(kSticky, pair(-1.0, 1.0), Scheme::implicit(0.01), 3.0, opts);
    CHECK(sticky_diagnostics(sticky, 0.0).cardinality_nonincreasing);
    CHECK(sticky.diagnostics.front().support_cardinality == 2);
    CHECK(sticky.diagnostics.back().support_cardinality == 1);

    // an expanding flow violates the bounds at lambda = 0 but not at its own lambda
    const auto grow = evolve(linear_field(Eigen::MatrixXd::Identity(1, 1)), pair(0.0, 1.0),
                             Scheme::explicit_euler(0.01), 1.0);
    CHECK_FALSE(sticky_diagnostics(grow, 0.0).diameter_bound_ok);
    CHECK(sticky_diagnostics(grow, 1.0).all());
  }
}
